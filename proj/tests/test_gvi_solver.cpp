#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace gvimp;
using gvimp::testing::Gen;

namespace {

PriorSpec line_prior(Index intervals, double horizon, Vector2 from, Vector2 to, double boundary = 1e4) {
  PriorSpec p;
  p.model = LtiModel::constant_velocity(2, 0.8);
  p.grid = TimeGrid::uniform(intervals, horizon);
  Vector a = Vector::Zero(4), b = Vector::Zero(4);
  a.head(2) = from;
  b.head(2) = to;
  p.mean = interpolate_states(a, b, p.grid);
  p.k0_inv = p.kN_inv = boundary * Matrix::Identity(4, 4);
  return p;
}

struct LinearProblem {
  FactorGraph graph;
  Vector prior_mean;
  Vector mean;       // closed-form posterior mean
  Matrix precision;  // closed-form posterior precision
};

// GP prior plus random linear measurements on single states and state pairs; the
// posterior exp(-sum psi / T) is Gaussian with the dense moments below.
LinearProblem linear_problem(Gen& gen, Index intervals, double temperature) {
  const PriorSpec prior = line_prior(intervals, 3.0, Vector2(0, 0), Vector2(5, 2));
  LinearProblem out;
  out.graph = build_planning_graph(prior, nullptr);
  out.prior_mean = prior.mean;
  const Index n = prior.num_states(), d = 4;
  Matrix lambda = build_prior_precision(prior).to_dense();
  Vector eta = lambda * prior.mean;
  for (Index i = 0; i < n; ++i) {
    const Index span = (i + 1 < n && gen.integer(0, 1)) ? 2 : 1;
    const Index rows = gen.integer(1, 3);
    const Factor f = Factor::linear(i, span, gen.matrix(rows, span * d), gen.vector(rows, -3, 3), gen.spd(rows));
    out.graph.factors.push_back(f);
    const Matrix sel = gvimp::testing::selection(i, span, n, d);
    lambda += sel.transpose() * f.a.transpose() * f.w * f.a * sel;
    eta += sel.transpose() * f.a.transpose() * f.w * f.b;
  }
  out.precision = lambda / temperature;
  out.mean = lambda.llt().solve(eta);
  return out;
}

FactorGraph box_problem(Index intervals, double horizon, double radius, double epsilon, PriorSpec* prior_out = nullptr) {
  const PriorSpec prior = line_prior(intervals, horizon, Vector2(-6, 0), Vector2(6, 0.3), 1e6);
  auto sdf = std::make_shared<const SdfGrid>(rasterize_rectangles(101, 101, Vector2(-10, -10), 0.2, {{-1.5, -3, 1.5, 0.8}}));
  auto model = std::make_shared<const CollisionModel>(CollisionModel{sdf, RobotModel::point(radius), {epsilon, 0.004}});
  if (prior_out) *prior_out = prior;
  return build_planning_graph(prior, model);
}

double off_band_max(const BlockTridiagonalMatrix& m) {
  const Matrix dense = m.to_dense();
  const Index d = m.block_dim();
  double worst = 0.0;
  for (Index r = 0; r < m.num_blocks(); ++r) {
    for (Index c = 0; c < m.num_blocks(); ++c) {
      if (std::abs(r - c) > 1) worst = std::max(worst, dense.block(r * d, c * d, d, d).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace

TEST(NgdStep, FixedPointAndScalarCase) {
  Gen gen(71);
  const GaussianTrajectory traj{gen.vector(6), gen.spd_band(3, 2)};
  const NgdDirection fixed = ngd_step(traj, Vector::Zero(6), traj.precision);
  EXPECT_EQ(fixed.mean.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(fixed.precision.max_abs(), 0.0);

  const GaussianTrajectory scalar{Vector::Zero(1), BlockTridiagonalMatrix::identity(1, 1, 2.0)};
  const NgdDirection s = ngd_step(scalar, Vector::Constant(1, 4.0), BlockTridiagonalMatrix::identity(1, 1, 5.0));
  EXPECT_DOUBLE_EQ(s.mean(0), -2.0);
  EXPECT_DOUBLE_EQ(s.precision.diag(0)(0, 0), 3.0);
  EXPECT_THROW(ngd_step(scalar, Vector::Zero(2), scalar.precision), ShapeError);
}

TEST(Backtrack, ZeroDirectionMakesNoProgress) {
  const PriorSpec prior = line_prior(4, 2.0, Vector2(0, 0), Vector2(1, 1));
  const FactorGraph g = build_planning_graph(prior, nullptr);
  const GaussianTrajectory traj = GaussianTrajectory::isotropic(prior.mean, 4, 10.0);
  const NgdDirection zero{Vector::Zero(traj.mean.size()), BlockTridiagonalMatrix(5, 4)};
  EXPECT_FALSE(backtrack(g, traj, zero, SolverConfig{}).progressed);
}

TEST(Backtrack, RejectsCandidatesThatLeaveTheMap) {
  PriorSpec prior;
  const FactorGraph g = box_problem(6, 3.0, 0.5, 0.7, &prior);
  const GaussianTrajectory traj = GaussianTrajectory::isotropic(prior.mean, 4, 10.0);
  NgdDirection away{Vector::Zero(traj.mean.size()), BlockTridiagonalMatrix(7, 4)};
  for (Index i = 0; i < 7; ++i) away.mean(4 * i) = 200.0;
  BacktrackResult r;
  EXPECT_NO_THROW(r = backtrack(g, traj, away, SolverConfig{}));
  EXPECT_FALSE(r.progressed);
}

TEST(Gvi, RecoversTheExactLinearGaussianPosterior) {
  Gen gen(72);
  for (double t : {1.0, 3.0}) {
    for (int trial = 0; trial < 3; ++trial) {
      const LinearProblem lp = linear_problem(gen, 10, t);
      SolverConfig cfg;
      cfg.temperature = t;
      cfg.min_backtrack = 0;
      cfg.tolerance = 1e-12;
      cfg.max_iterations = 20;
      const GviResult r = optimize(lp.graph, GaussianTrajectory::isotropic(lp.prior_mean, 4, 10.0), cfg);
      EXPECT_EQ(r.status, SolverStatus::converged);
      EXPECT_LE(r.iterations, 20);
      EXPECT_LE((r.trajectory.mean - lp.mean).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_LE((r.trajectory.precision.to_dense() - lp.precision).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Gvi, PriorOnlyConvergesToThePrior) {
  const PriorSpec prior = line_prior(8, 2.0, Vector2(-1, 2), Vector2(3, -1));
  const FactorGraph g = build_planning_graph(prior, nullptr);
  SolverConfig cfg;
  cfg.temperature = 2.0;
  cfg.tolerance = 1e-13;
  const GviResult r = optimize(g, GaussianTrajectory::isotropic(prior.mean, 4, 1.0), cfg);
  const Matrix target = build_prior_precision(prior).to_dense() / 2.0;
  EXPECT_LE((r.trajectory.mean - prior.mean).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((r.trajectory.precision.to_dense() - target).cwiseAbs().maxCoeff(), 1e-6 * target.cwiseAbs().maxCoeff());
}

TEST(Gvi, FullStepOnASoleQuadraticFactorHitsTheTargetPrecision) {
  Gen gen(73);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = gen.integer(1, 3);
    const double t = gen.uniform(0.5, 4);
    const Matrix a = gen.matrix(2 * d, 2 * d) + 2.0 * Matrix::Identity(2 * d, 2 * d);
    const Matrix w = gen.spd(2 * d);
    const FactorGraph g{2, d, {Factor::linear(0, 2, a, gen.vector(2 * d), w)}};
    const GaussianTrajectory traj = GaussianTrajectory::isotropic(gen.vector(2 * d), d, gen.uniform(0.5, 20));
    const JointDerivatives jd = joint_derivatives(g, traj, t, hermite_rule(3));
    const GaussianTrajectory next = apply_step(traj, ngd_step(traj, jd.gradient, jd.hessian), 1.0);
    const Matrix target = a.transpose() * w * a / t;
    EXPECT_LE((next.precision.to_dense() - target).cwiseAbs().maxCoeff(), 1e-13 * target.cwiseAbs().maxCoeff());
  }
}

TEST(Gvi, CostsDecreaseAndPatternHolds) {
  PriorSpec prior;
  const FactorGraph g = box_problem(14, 3.0, 0.5, 0.7, &prior);
  SolverConfig cfg;
  cfg.temperature = 10.0;
  int steps = 0;
  double worst = 0.0;
  const GviResult r = optimize(g, GaussianTrajectory::isotropic(prior.mean, 4, 10.0), cfg,
                               [&](const GaussianTrajectory& traj, const CostReport&) {
                                 ++steps;
                                 worst = std::max(worst, off_band_max(traj.precision));
                               });
  EXPECT_EQ(steps, r.iterations);
  EXPECT_GT(steps, 3);
  EXPECT_EQ(worst, 0.0);
  ASSERT_EQ(r.history.size(), std::size_t(r.iterations + 1));
  for (std::size_t k = 1; k < r.history.size(); ++k) {
    EXPECT_LT(r.history[k].total, r.history[k - 1].total);
    EXPECT_GE(r.history[k].exponent, cfg.min_backtrack);
    EXPECT_LE(r.history[k].exponent, cfg.max_backtrack);
  }
  EXPECT_EQ(r.history[0].exponent, 0);
  EXPECT_LT(r.history.back().collision, r.history.front().collision);
}

TEST(Gvi, EvaluateSplitsTheObjective) {
  Gen gen(74);
  PriorSpec prior;
  const FactorGraph g = box_problem(6, 3.0, 0.5, 0.7, &prior);
  GaussianTrajectory traj{prior.mean + gen.vector(28, -0.2, 0.2), gen.spd_band(7, 4, 0.5)};
  traj.precision = traj.precision.scaled(10.0);
  const CostReport c = evaluate_costs(g, traj, SolverConfig{});
  EXPECT_NEAR(c.entropy, 0.5 * gvimp::testing::dense_log_det(traj.precision.to_dense()), 1e-9);
  // prior part: E[1/2 ||x - mu||^2_{K^{-1}}] = 1/2 (r^T K^{-1} r + tr(K^{-1} Sigma))
  const Matrix k_inv = build_prior_precision(prior).to_dense();
  const Vector r = traj.mean - prior.mean;
  const Matrix sigma = gvimp::testing::dense_inverse(traj.precision.to_dense());
  EXPECT_NEAR(c.prior, 0.5 * (r.dot(k_inv * r) + (k_inv * sigma).trace()), 1e-8 * c.prior);
  EXPECT_NEAR(c.total, c.prior + c.collision + c.entropy, 1e-12 * std::abs(c.total));
}

TEST(Gvi, JointAssemblyMatchesDenseSum) {
  Gen gen(75);
  PriorSpec prior;
  const FactorGraph g = box_problem(6, 3.0, 0.5, 0.7, &prior);
  const GaussianTrajectory traj{prior.mean + gen.vector(28, -0.3, 0.3), gen.spd_band(7, 4, 0.5).scaled(10.0)};
  const HermiteRule rule = hermite_rule(6);
  const JointDerivatives jd = joint_derivatives(g, traj, 3.0, rule);
  const PartialCovariance cov = partial_inverse(ldl_decompose(traj.precision));
  Vector grad = Vector::Zero(28);
  Matrix hess = Matrix::Zero(28, 28);
  for (const Factor& f : g.factors) {
    const Matrix sel = gvimp::testing::selection(f.first, f.span, 7, 4);
    const FactorDerivatives fd = factor_derivatives(f, marginal(traj.mean, cov, f), 3.0, rule);
    grad += sel.transpose() * fd.gradient;
    hess += sel.transpose() * fd.hessian * sel;
  }
  EXPECT_LE((jd.gradient - grad).cwiseAbs().maxCoeff(), 1e-9 * (1 + grad.cwiseAbs().maxCoeff()));
  EXPECT_LE((jd.hessian.to_dense() - hess).cwiseAbs().maxCoeff(), 1e-9 * (1 + hess.cwiseAbs().maxCoeff()));
  EXPECT_NEAR(jd.at.costs.total, evaluate(g, traj, 3.0, rule).costs.total, 1e-9);
}

TEST(Gvi, TwoPhaseRestartsThePrecision) {
  PriorSpec prior;
  const FactorGraph g = box_problem(8, 3.0, 0.5, 0.7, &prior);
  SolverConfig low;
  low.temperature = 10.0;
  low.max_iterations = 5;
  SolverConfig high = low;
  high.temperature = 30.0;
  high.init_precision = 4.0;
  const GaussianTrajectory init = GaussianTrajectory::isotropic(prior.mean, 4, 10.0);
  const TwoPhaseResult reset = two_phase_replan(g, init, low, high);
  EXPECT_NEAR(reset.high.history[0].entropy, 0.5 * 36 * std::log(4.0), 1e-9);
  EXPECT_LT(reset.high.history.back().total, reset.high.history.front().total);

  const TwoPhaseResult kept = two_phase_replan(g, init, low, high, true);
  EXPECT_NEAR(kept.high.history[0].entropy, kept.low.history.back().entropy, 1e-9);
}

TEST(Gvi, InputValidation) {
  const PriorSpec prior = line_prior(4, 2.0, Vector2(0, 0), Vector2(1, 1));
  const FactorGraph g = build_planning_graph(prior, nullptr);
  EXPECT_THROW(optimize(g, GaussianTrajectory::isotropic(Vector::Zero(16), 4, 1.0), SolverConfig{}), ShapeError);
  EXPECT_THROW(GaussianTrajectory::isotropic(Vector::Zero(7), 4, 1.0), ShapeError);

  GaussianTrajectory bad = GaussianTrajectory::isotropic(prior.mean, 4, 1.0);
  bad.precision.diag(2) = -Matrix::Identity(4, 4);
  EXPECT_THROW(evaluate_costs(g, bad, SolverConfig{}), NumericalError);

  auto invalid = [](auto mutate) {
    SolverConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(invalid([](SolverConfig& c) { c.temperature = 0; }).validate(), DomainError);
  EXPECT_THROW(invalid([](SolverConfig& c) { c.step_base = 1.0; }).validate(), DomainError);
  EXPECT_THROW(invalid([](SolverConfig& c) { c.max_backtrack = 0; }).validate(), DomainError);
  EXPECT_THROW(invalid([](SolverConfig& c) { c.tolerance = -1; }).validate(), DomainError);
  EXPECT_THROW(invalid([](SolverConfig& c) { c.quadrature_degree = 0; }).validate(), DomainError);
  EXPECT_THROW(invalid([](SolverConfig& c) { c.init_precision = 0; }).validate(), DomainError);
}
