#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "test_util.hpp"

using namespace gvimp;
using gvimp::testing::Gen;

namespace {

Matrix system_matrix(Index dof) {
  Matrix a = Matrix::Zero(2 * dof, 2 * dof);
  a.topRightCorner(dof, dof).setIdentity();
  return a;
}

// Composite Simpson over [t_i, t_next] of Phi(t_next, s) F Qc F^T Phi(t_next, s)^T ds.
Matrix grammian_by_quadrature(const LtiModel& model, double t_i, double t_next, int panels = 200) {
  const Index n = model.dof;
  Matrix f = Matrix::Zero(2 * n, n);
  f.bottomRows(n).setIdentity();
  const Matrix a = system_matrix(n);
  auto integrand = [&](double s) {
    const Matrix phi = (a * (t_next - s)).exp();
    return Matrix(phi * f * model.qc * f.transpose() * phi.transpose());
  };
  const double h = (t_next - t_i) / panels;
  Matrix acc = integrand(t_i) + integrand(t_next);
  for (int k = 1; k < panels; ++k) acc += (k % 2 ? 4.0 : 2.0) * integrand(t_i + k * h);
  return acc * h / 3.0;
}

}  // namespace

TEST(GpPrior, TransitionIsTheMatrixExponential) {
  Gen gen(11);
  for (Index dof : {1, 2, 3}) {
    const LtiModel model = LtiModel::constant_velocity(dof, 0.8);
    const double s = gen.uniform(-1, 1);
    const double t = s + gen.uniform(0, 3);
    const Matrix expected = (system_matrix(dof) * (t - s)).exp();
    EXPECT_LE((transition_matrix(model, s, t) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GpPrior, TransitionSemigroup) {
  const LtiModel model = LtiModel::constant_velocity(2, 1.0);
  const Matrix lhs = transition_matrix(model, 0.2, 1.7);
  const Matrix rhs = transition_matrix(model, 0.9, 1.7) * transition_matrix(model, 0.2, 0.9);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(transition_matrix(model, 1.0, 1.0), Matrix::Identity(4, 4));
  EXPECT_THROW(transition_matrix(model, 1.0, 0.5), DomainError);
}

TEST(GpPrior, GrammianMatchesNumericalIntegration) {
  Gen gen(12);
  for (int trial = 0; trial < 5; ++trial) {
    LtiModel model;
    model.dof = gen.integer(1, 3);
    model.qc = gen.spd(model.dof);
    const double t0 = gen.uniform(0, 2);
    const double t1 = t0 + gen.uniform(0.1, 2.0);
    const Matrix expected = grammian_by_quadrature(model, t0, t1);
    EXPECT_LE((grammian(model, t0, t1) - expected).cwiseAbs().maxCoeff(), 1e-10 * (1 + expected.norm()));
  }
}

TEST(GpPrior, GrammianInverseIsInverse) {
  const LtiModel model = LtiModel::constant_velocity(2, 0.8);
  for (double dt : {0.05, 0.2, 1.0, 3.0}) {
    const Matrix q = grammian(model, 1.0, 1.0 + dt);
    const Matrix qi = grammian_inverse(model, 1.0, 1.0 + dt);
    EXPECT_LE((q * qi - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(qi, qi.transpose());
  }
  EXPECT_THROW(grammian(model, 1.0, 1.0), DomainError);
}

TEST(GpPrior, PrecisionEqualsStackedDenseForm) {
  Gen gen(13);
  for (int trial = 0; trial < 10; ++trial) {
    PriorSpec spec;
    spec.model = LtiModel::constant_velocity(gen.integer(1, 3), gen.uniform(0.2, 2.0));
    const Index d = spec.state_dim();
    const Index intervals = gen.integer(1, 12);
    // Non-uniform grid.
    spec.grid.times = {0.0};
    for (Index i = 0; i < intervals; ++i) spec.grid.times.push_back(spec.grid.times.back() + gen.uniform(0.1, 1.0));
    const Index n = spec.num_states();
    spec.mean = gen.vector(n * d);
    spec.k0_inv = gen.spd(d);
    spec.kN_inv = gen.spd(d);

    // K^{-1} = sum of E^T W E over the boundary rows and the rows x_{i+1} - Phi x_i.
    Matrix expected = Matrix::Zero(n * d, n * d);
    const Matrix e0 = gvimp::testing::selection(0, 1, n, d);
    const Matrix en = gvimp::testing::selection(n - 1, 1, n, d);
    expected += e0.transpose() * spec.k0_inv * e0 + en.transpose() * spec.kN_inv * en;
    for (Index i = 0; i + 1 < n; ++i) {
      const double ta = spec.grid.at(i), tb = spec.grid.at(i + 1);
      const Matrix row = gvimp::testing::selection(i + 1, 1, n, d) -
                         transition_matrix(spec.model, ta, tb) * gvimp::testing::selection(i, 1, n, d);
      expected += row.transpose() * gvimp::testing::dense_inverse(grammian(spec.model, ta, tb)) * row;
    }
    const Matrix got = build_prior_precision(spec).to_dense();
    EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-8 * expected.cwiseAbs().maxCoeff());
  }
}

TEST(GpPrior, UniformGridAndInterpolation) {
  const TimeGrid g = TimeGrid::uniform(4, 2.0);
  ASSERT_EQ(g.num_states(), 5);
  EXPECT_DOUBLE_EQ(g.at(2), 1.0);
  EXPECT_DOUBLE_EQ(g.at(4), 2.0);
  Vector a(2), b(2);
  a << 0, 1;
  b << 4, -3;
  const Vector m = interpolate_states(a, b, g);
  EXPECT_EQ(m.head(2), a);
  EXPECT_EQ(m.tail(2), b);
  EXPECT_DOUBLE_EQ(m(2), 1.0);
  EXPECT_DOUBLE_EQ(m(3), 0.0);
  EXPECT_THROW(TimeGrid::uniform(0, 1.0), DomainError);
  EXPECT_THROW(TimeGrid::uniform(3, 0.0), DomainError);
  EXPECT_THROW(interpolate_states(a, Vector::Zero(3), g), ShapeError);
}

TEST(GpPrior, ValidationErrors) {
  PriorSpec spec;
  spec.model = LtiModel::constant_velocity(2, 1.0);
  spec.grid = TimeGrid::uniform(3, 1.0);
  spec.mean = Vector::Zero(16);
  spec.k0_inv = spec.kN_inv = Matrix::Identity(4, 4);
  EXPECT_NO_THROW(spec.validate());

  PriorSpec bad = spec;
  bad.grid.times = {0.0, 0.5, 0.5, 1.0};
  EXPECT_THROW(bad.validate(), DomainError);
  bad = spec;
  bad.mean = Vector::Zero(15);
  EXPECT_THROW(bad.validate(), ShapeError);
  bad = spec;
  bad.k0_inv = -Matrix::Identity(4, 4);
  EXPECT_THROW(bad.validate(), DomainError);
  bad = spec;
  bad.model.qc = Matrix::Zero(2, 2);
  EXPECT_THROW(bad.validate(), DomainError);
  bad = spec;
  bad.model.qc = Matrix::Identity(3, 3);
  EXPECT_THROW(bad.validate(), ShapeError);
}
