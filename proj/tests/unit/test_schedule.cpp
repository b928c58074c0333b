#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "bridgesampler/errors.hpp"
#include "bridgesampler/schedule.hpp"

namespace bridge {
namespace {

using boost::math::quadrature::gauss_kronrod;

// Independent reference: alpha_t = exp(int_0^t f), rho_t^2 = int_0^t g^2 / alpha^2,
// with f and g^2 written out here rather than taken from the schedule.
struct QuadratureSchedule {
  bool vp;
  double sigma, beta_min, beta_max, T;

  double f(double t) const { return vp ? -0.5 * g2(t) : 0.0; }
  double g2(double t) const { return vp ? beta_min + (beta_max - beta_min) * t / T : sigma * sigma; }
  double alpha(double t) const {
    if (t == 0.0) return 1.0;
    return std::exp(gauss_kronrod<double, 31>::integrate([&](double s) { return f(s); }, 0.0, t, 3, 1e-13));
  }
  double rho2(double t) const {
    if (t == 0.0) return 0.0;
    return gauss_kronrod<double, 31>::integrate(
        [&](double s) {
          const double a = alpha(s);
          return g2(s) / (a * a);
        },
        0.0, t, 3, 1e-13);
  }
};

struct Case {
  BridgeSchedule schedule;
  QuadratureSchedule reference;
};

std::vector<Case> cases() {
  return {
      {BridgeSchedule::brownian_bridge(1.0), {false, 1.0, 0, 0, 1.0}},
      {BridgeSchedule::brownian_bridge(0.7, 2.5), {false, 0.7, 0, 0, 2.5}},
      {BridgeSchedule::variance_preserving(0.1, 2.0), {true, 0, 0.1, 2.0, 1.0}},
      {BridgeSchedule::variance_preserving(0.1, 20.0), {true, 0, 0.1, 20.0, 1.0}},
      {BridgeSchedule::variance_preserving(0.5, 0.5, 3.0), {true, 0, 0.5, 0.5, 3.0}},
  };
}

double rel(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

TEST(Schedule, AlphaAndRhoMatchQuadrature) {
  std::mt19937_64 gen(11);
  for (const auto& c : cases()) {
    std::uniform_real_distribution<double> u(0.0, c.schedule.horizon());
    for (int i = 0; i < 40; ++i) {
      const double t = u(gen);
      EXPECT_LT(rel(c.schedule.alpha(t), c.reference.alpha(t)), 1e-10) << "t=" << t;
      EXPECT_LT(rel(c.schedule.rho2(t), c.reference.rho2(t)), 1e-10) << "t=" << t;
    }
  }
}

TEST(Schedule, CoefficientsMatchQuadrature) {
  std::mt19937_64 gen(12);
  for (const auto& c : cases()) {
    const double T = c.schedule.horizon();
    std::uniform_real_distribution<double> u(0.0, T);
    const double alpha_T = c.reference.alpha(T);
    const double rho2_T = c.reference.rho2(T);
    for (int i = 0; i < 30; ++i) {
      const double t = u(gen);
      const double r = c.reference.rho2(t) / rho2_T;
      const double alpha_t = c.reference.alpha(t);
      const BridgeCoeffs k = coeffs(c.schedule, t);
      EXPECT_LT(rel(k.a, r * alpha_t / alpha_T), 1e-9);
      EXPECT_LT(rel(k.b, alpha_t * (1.0 - r)), 1e-9);
      EXPECT_LT(rel(k.c2(), alpha_t * alpha_t * c.reference.rho2(t) * (1.0 - r)), 1e-9);
    }
  }
}

TEST(Schedule, BrownianBridgeClosedForm) {
  const double sigma = 1.3, T = 2.0;
  const BridgeSchedule s = BridgeSchedule::brownian_bridge(sigma, T);
  for (double t : {0.1, 0.5, 1.0, 1.7}) {
    const BridgeCoeffs k = coeffs(s, t);
    EXPECT_NEAR(k.a, t / T, 1e-15);
    EXPECT_NEAR(k.b, 1.0 - t / T, 1e-15);
    EXPECT_NEAR(k.c2(), sigma * sigma * t * (T - t) / T, 1e-14);
  }
}

TEST(Schedule, EndpointCoefficients) {
  for (const auto& c : cases()) {
    const BridgeCoeffs end = coeffs(c.schedule, c.schedule.horizon());
    EXPECT_NEAR(end.a, 1.0, 1e-12);
    EXPECT_NEAR(end.b, 0.0, 1e-12);
    EXPECT_NEAR(end.c, 0.0, 1e-12);
    const BridgeCoeffs start = coeffs(c.schedule, 0.0);
    EXPECT_NEAR(start.a, 0.0, 1e-12);
    EXPECT_NEAR(start.b, 1.0, 1e-12);
    EXPECT_NEAR(start.c, 0.0, 1e-12);
  }
}

TEST(Schedule, CoefficientsStayInRange) {
  for (const auto& c : cases()) {
    const double T = c.schedule.horizon();
    for (int i = 1; i < 200; ++i) {
      const BridgeCoeffs k = coeffs(c.schedule, T * i / 200.0);
      EXPECT_GE(k.a, 0.0);
      EXPECT_GE(k.b, 0.0);
      EXPECT_GT(k.c, 0.0);
      EXPECT_TRUE(std::isfinite(k.a) && std::isfinite(k.b) && std::isfinite(k.c));
    }
  }
}

TEST(Schedule, VpDriftIsMinusHalfBeta) {
  const BridgeSchedule s = BridgeSchedule::variance_preserving(0.1, 2.0);
  for (double t : {0.0, 0.3, 1.0}) EXPECT_DOUBLE_EQ(s.drift_coef(t), -0.5 * s.diffusion_sq(t));
}

TEST(Schedule, RejectsBadParameters) {
  EXPECT_THROW(BridgeSchedule::brownian_bridge(0.0), ConfigError);
  EXPECT_THROW(BridgeSchedule::brownian_bridge(1.0, -1.0), ConfigError);
  EXPECT_THROW(BridgeSchedule::variance_preserving(2.0, 1.0), ConfigError);
  EXPECT_THROW(BridgeSchedule::variance_preserving(-0.1, 1.0), ConfigError);
}

TEST(Schedule, RejectsTimesOutsideHorizon) {
  const BridgeSchedule s = BridgeSchedule::brownian_bridge(1.0);
  EXPECT_THROW(s.alpha(-1e-9), DomainError);
  EXPECT_THROW(coeffs(s, 1.0 + 1e-9), DomainError);
}

TEST(TimeGrid, UniformLayout) {
  const BridgeSchedule s = BridgeSchedule::brownian_bridge(1.0, 2.0);
  const TimeGrid g = make_time_grid(s, 4);
  ASSERT_EQ(g.times().size(), 5U);
  EXPECT_EQ(g.steps(), 4U);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[2], 1.0);
  EXPECT_DOUBLE_EQ(g.tau(), 1.5);
  EXPECT_DOUBLE_EQ(g.horizon(), 2.0);
}

TEST(TimeGrid, QuadraticIsSymmetricAndIncreasing) {
  const BridgeSchedule s = BridgeSchedule::brownian_bridge(1.0);
  const TimeGrid g = make_time_grid(s, 10, GridSpacing::kQuadratic);
  for (std::size_t i = 1; i < g.times().size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  for (std::size_t i = 0; i <= 10; ++i) EXPECT_NEAR(g[i] + g[10 - i], 1.0, 1e-15);
  // Clusters at both ends: first and last steps are the shortest.
  EXPECT_LT(g[1] - g[0], g[5] - g[4]);
  EXPECT_LT(g[10] - g[9], g[6] - g[5]);
}

TEST(TimeGrid, TMinRaisesFirstKnot) {
  const BridgeSchedule s = BridgeSchedule::brownian_bridge(1.0);
  const TimeGrid g = make_time_grid(s, 10, GridSpacing::kUniform, 0.15);
  EXPECT_DOUBLE_EQ(g[1], 0.15);
  EXPECT_DOUBLE_EQ(g[2], 0.2);
  const TimeGrid h = make_time_grid(s, 10, GridSpacing::kUniform, 0.05);
  EXPECT_DOUBLE_EQ(h[1], 0.1);
  EXPECT_THROW(make_time_grid(s, 10, GridSpacing::kUniform, 0.25), ConfigError);
}

TEST(TimeGrid, Validation) {
  const BridgeSchedule s = BridgeSchedule::brownian_bridge(1.0);
  EXPECT_THROW(make_time_grid(s, 1), ConfigError);
  EXPECT_THROW(make_time_grid(s, 0), ConfigError);
  EXPECT_THROW(TimeGrid({0.0, 0.5}), ConfigError);
  EXPECT_THROW(TimeGrid({0.1, 0.5, 1.0}), ConfigError);
  EXPECT_THROW(TimeGrid({0.0, 0.5, 0.5, 1.0}), ConfigError);
  EXPECT_NO_THROW(TimeGrid({0.0, 0.5, 1.0}));
  EXPECT_THROW(parse_grid_spacing("cubic"), ConfigError);
  EXPECT_THROW(parse_schedule_kind("ve"), ConfigError);
}

}  // namespace
}  // namespace bridge
