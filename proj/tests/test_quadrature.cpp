#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace gvimp;
using gvimp::testing::Gen;

namespace {

double double_factorial(int k) {
  double v = 1.0;
  for (int i = k; i > 1; i -= 2) v *= i;
  return v;
}

}  // namespace

TEST(Hermite, RuleShape) {
  for (int p = 1; p <= kMaxHermiteDegree; ++p) {
    const HermiteRule r = hermite_rule(p);
    ASSERT_EQ(int(r.roots.size()), p);
    double total = 0.0;
    for (int i = 0; i < p; ++i) {
      EXPECT_GT(r.weights[i], 0.0);
      EXPECT_EQ(r.roots[i], -r.roots[p - 1 - i]);
      EXPECT_EQ(r.weights[i], r.weights[p - 1 - i]);
      if (i > 0) {
        EXPECT_LT(r.roots[i - 1], r.roots[i]);
      }
      total += r.weights[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-14);
  }
}

TEST(Hermite, KnownRules) {
  const HermiteRule r3 = hermite_rule(3);
  EXPECT_NEAR(r3.roots[2], std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(r3.weights[1], 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(r3.weights[0], 1.0 / 6.0, 1e-14);

  // He_5 = x^5 - 10 x^3 + 15 x, weights p! / (p^2 He_{p-1}(x)^2).
  const HermiteRule r5 = hermite_rule(5);
  const double roots[2] = {std::sqrt(5.0 - std::sqrt(10.0)), std::sqrt(5.0 + std::sqrt(10.0))};
  for (int k = 0; k < 2; ++k) {
    const double x = roots[k];
    const double he4 = x * x * x * x - 6 * x * x + 3;
    EXPECT_NEAR(r5.roots[3 + k], x, 1e-13);
    EXPECT_NEAR(r5.weights[3 + k], 120.0 / (25.0 * he4 * he4), 1e-13);
  }
  EXPECT_NEAR(r5.weights[2], 120.0 / (25.0 * 9.0), 1e-13);
}

TEST(Hermite, OneDimensionalMomentsUpToTwoPMinusOne) {
  for (int p = 1; p <= kMaxHermiteDegree; ++p) {
    const HermiteRule r = hermite_rule(p);
    for (int k = 0; k <= 2 * p - 1; ++k) {
      // Odd moments cancel between +-x, so the error scales with sum w |x|^k.
      double acc = 0.0, scale = 0.0;
      for (int i = 0; i < p; ++i) {
        acc += r.weights[i] * std::pow(r.roots[i], k);
        scale += r.weights[i] * std::pow(std::abs(r.roots[i]), k);
      }
      const double expected = k % 2 ? 0.0 : double_factorial(k - 1);
      EXPECT_NEAR(acc, expected, 1e-10 * std::max(1.0, scale)) << "p=" << p << " k=" << k;
    }
  }
}

TEST(Hermite, MultivariateMonomialMoments) {
  Gen gen(41);
  for (Index n = 1; n <= 3; ++n) {
    for (int p = 1; p <= 6; ++p) {
      const Vector m = gen.vector(n, -0.7, 0.7);
      const Matrix cov = gen.spd(n, 0.2) * 0.5;
      gvimp::testing::GaussianMoments oracle(m, cov);
      const HermiteRule rule = hermite_rule(p);
      gvimp::testing::for_each_exponent(n, 2 * p - 1, [&](const std::vector<int>& k) {
        const double got = gh_expectation(
            [&](const Vector& x) {
              double v = 1.0;
              for (Index i = 0; i < n; ++i) v *= std::pow(x(i), k[std::size_t(i)]);
              return v;
            },
            m, cov, rule);
        const double expected = oracle(k);
        EXPECT_NEAR(got, expected, 1e-10 * std::max(1.0, std::abs(expected))) << "n=" << n << " p=" << p;
      });
    }
  }
}

TEST(Hermite, VectorValuedIntegrands) {
  Vector m(2);
  m << 0.3, -1.0;
  Matrix cov(2, 2);
  cov << 2.0, 0.4, 0.4, 0.5;
  const Vector mean = gh_expectation([](const Vector& x) { return Vector(x); }, m, cov, 3);
  EXPECT_LE((mean - m).cwiseAbs().maxCoeff(), 1e-13);
  const Matrix second = gh_expectation([&](const Vector& x) { return Matrix((x - m) * (x - m).transpose()); }, m, cov, 3);
  EXPECT_LE((second - cov).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Hermite, SigmaPointOrderAndCount) {
  const HermiteRule r = hermite_rule(3);
  std::vector<Vector> seen;
  double total = 0.0;
  for_each_sigma_point(r, 2, [&](const Vector& z, double w) {
    seen.push_back(z);
    total += w;
  });
  ASSERT_EQ(seen.size(), 9u);
  EXPECT_NEAR(total, 1.0, 1e-14);
  EXPECT_EQ(seen[0](0), seen[1](0));  // last coordinate runs fastest
  EXPECT_NE(seen[0](1), seen[1](1));
  EXPECT_EQ(sigma_point_count(r, 4), 81);
}

TEST(Hermite, Errors) {
  EXPECT_THROW(hermite_rule(0), DomainError);
  EXPECT_THROW(hermite_rule(kMaxHermiteDegree + 1), DomainError);
  EXPECT_THROW(sigma_point_count(hermite_rule(20), 6), ResourceError);
  const auto one = [](const Vector&) { return 1.0; };
  EXPECT_THROW(gh_expectation(one, Vector::Zero(2), Matrix::Identity(3, 3), 3), ShapeError);
  EXPECT_THROW(gh_expectation(one, Vector::Zero(2), -Matrix::Identity(2, 2), 3), NumericalError);
}
