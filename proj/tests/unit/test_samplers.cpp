#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>

#include "bridgesampler/errors.hpp"
#include "bridgesampler/samplers.hpp"
#include "test_support.hpp"

namespace bridge {
namespace {

using namespace bridge::testing;

const SamplerMethod kAllMethods[] = {SamplerMethod::kOdes3, SamplerMethod::kEmSde, SamplerMethod::kEmStartHeun,
                                     SamplerMethod::kDeterministicStartHeun};

ConditionalModel default_model() { return GaussianConditionalModel::fixed(vec({0.0, 0.0}), vec({0.5, 1.5})); }

TEST(Nfe, CountsMatchTheLaw) {
  const ConditionalModel model = default_model();
  const Vec y = vec({2.0, -1.0});
  for (const auto& s : {bb(), vp()}) {
    for (std::size_t n : {2, 3, 15, 20, 64}) {
      for (SamplerMethod method : kAllMethods) {
        DataPredictor predictor = make_oracle_predictor(model, s);
        const SampleRun run = run_sampler({method, make_time_grid(s, n), false, 1}, predictor, y, s);
        EXPECT_EQ(run.nfe, expected_nfe(method, n)) << to_string(method) << " N=" << n;
      }
    }
  }
  EXPECT_EQ(expected_nfe(SamplerMethod::kOdes3, 20), 38);
  EXPECT_EQ(expected_nfe(SamplerMethod::kOdes3, 15), 28);
  EXPECT_EQ(expected_nfe(SamplerMethod::kEmSde, 20), 20);
}

TEST(Steppers, HeunIsExactForLinearInTime) {
  const DriftFn field = [](const Vec&, double t) { return vec({3.0 * t + 1.0}); };
  const Vec x = heun_step(field, vec({0.0}), 0.0, 2.0);
  EXPECT_NEAR(x[0], 1.5 * 4.0 + 2.0, 1e-14);
}

TEST(Steppers, HeunLocalErrorIsThirdOrder) {
  const DriftFn field = [](const Vec& x, double) { return -x; };
  const double e1 = std::abs(heun_step(field, vec({1.0}), 0.0, 0.1)[0] - std::exp(-0.1));
  const double e2 = std::abs(heun_step(field, vec({1.0}), 0.0, 0.05)[0] - std::exp(-0.05));
  EXPECT_NEAR(e1 / e2, 8.0, 0.3);
}

TEST(Steppers, EulerAndEulerMaruyama) {
  const DriftFn field = [](const Vec& x, double) { return 2.0 * x; };
  EXPECT_NEAR(euler_step(field, vec({1.0}), 0.5, 0.25)[0], 0.5, 1e-15);
  const Vec z = vec({1.0});
  EXPECT_NEAR(euler_maruyama_step(field, 3.0, vec({1.0}), 0.5, 0.25, z)[0], 0.5 + 3.0 * 0.5, 1e-15);
}

TEST(Starts, PosteriorStartUsesKernelCoefficients) {
  const auto s = vp();
  const Vec y = vec({1.0, 2.0});
  const Vec x0_hat = vec({-0.5, 0.5});
  const BridgeCoeffs k = coeffs(s, 0.8);
  const StartDistribution law = posterior_start_distribution(x0_hat, y, 0.8, s);
  EXPECT_LT((law.mean - (k.a * y + k.b * x0_hat)).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(law.variance, k.c2());
}

TEST(Starts, WorkedBrownianBridgeInstance) {
  const auto s = bb();
  const Vec y = vec({2.0});
  const Vec x0_hat = vec({0.0});
  const StartDistribution post = posterior_start_distribution(x0_hat, y, 0.9, s);
  const StartDistribution em = em_start_distribution(x0_hat, y, 0.9, s);
  EXPECT_NEAR(post.mean[0], 1.8, 1e-15);
  EXPECT_NEAR(post.variance, 0.09, 1e-15);
  // y + (y - x0_hat) / T (tau - T) with sigma = 1.
  EXPECT_NEAR(em.mean[0], 1.8, 1e-15);
  EXPECT_NEAR(em.variance, 0.1, 1e-15);
}

TEST(Starts, VpEulerMaruyamaStartFormula) {
  const auto s = vp();
  const Vec y = vec({1.0});
  const Vec x0_hat = vec({0.3});
  const double tau = 0.85;
  const double aT = s.alpha(1.0), r2T = s.rho2(1.0), f = s.drift_coef(1.0), g2 = s.diffusion_sq(1.0);
  const double mean = y[0] + (f * y[0] + g2 * (y[0] - aT * x0_hat[0]) / (aT * aT * r2T)) * (tau - 1.0);
  const StartDistribution em = em_start_distribution(x0_hat, y, tau, s);
  EXPECT_NEAR(em.mean[0], mean, 1e-14);
  EXPECT_NEAR(em.variance, g2 * (1.0 - tau), 1e-15);
}

TEST(Starts, StartTimeDomain) {
  const Vec y = vec({1.0});
  const StartDistribution at_T = posterior_start_distribution(y, y, 1.0, bb());
  EXPECT_NEAR(at_T.mean[0], 1.0, 1e-15);
  EXPECT_EQ(at_T.variance, 0.0);
  EXPECT_THROW(posterior_start_distribution(y, y, 0.0, bb()), ConfigError);
  EXPECT_THROW(em_start_distribution(y, y, 1.5, bb()), ConfigError);
}

TEST(Heun, PredictorStepRejectsSingularTimes) {
  const ConditionalModel model = default_model();
  DataPredictor d = make_oracle_predictor(model, bb());
  const Vec y = vec({1.0, 1.0});
  EXPECT_THROW(heun_step(d, y, 1.0, 0.9, y, bb()), SingularTimeError);
  EXPECT_THROW(heun_step(d, y, 0.1, 0.0, y, bb()), SingularTimeError);
  EXPECT_THROW(heun_step(d, y, 0.1, 0.2, y, bb()), SingularTimeError);
}

TEST(Odes3, SameSeedSameOutput) {
  const ConditionalModel model = default_model();
  const Vec y = vec({2.0, -1.0});
  const SamplerConfig config{SamplerMethod::kOdes3, make_time_grid(vp(), 20), false, 17};
  DataPredictor d1 = make_oracle_predictor(model, vp());
  DataPredictor d2 = make_oracle_predictor(model, vp());
  EXPECT_EQ(run_sampler(config, d1, y, vp()).x0, run_sampler(config, d2, y, vp()).x0);
  SamplerConfig other = config;
  other.seed = 18;
  DataPredictor d3 = make_oracle_predictor(model, vp());
  EXPECT_NE(run_sampler(config, d1, y, vp()).x0, run_sampler(other, d3, y, vp()).x0);
}

TEST(Odes3, TrajectoryVisitsEveryKnot) {
  const ConditionalModel model = default_model();
  const Vec y = vec({2.0, -1.0});
  const TimeGrid grid = make_time_grid(bb(), 8, GridSpacing::kQuadratic);
  for (SamplerMethod method : kAllMethods) {
    DataPredictor d = make_oracle_predictor(model, bb());
    const SampleRun run = run_sampler({method, grid, true, 3}, d, y, bb());
    ASSERT_EQ(run.trajectory.size(), grid.times().size()) << to_string(method);
    for (std::size_t i = 0; i < run.trajectory.size(); ++i) {
      EXPECT_DOUBLE_EQ(run.trajectory[i].t, grid[grid.steps() - i]);
    }
    EXPECT_EQ(run.trajectory.front().x, y);
    EXPECT_EQ(run.trajectory.back().x, run.x0);
  }
}

TEST(DeterministicStart, IgnoresSeed) {
  const ConditionalModel model = default_model();
  const Vec y = vec({2.0, -1.0});
  const SamplerConfig config{SamplerMethod::kDeterministicStartHeun, make_time_grid(bb(), 10), false, 0};
  const auto runs = sample_batch(config, model, bb(), y, 20);
  for (const auto& r : runs) EXPECT_EQ(r.x0, runs.front().x0);
}

TEST(EmSde, ZeroNoiseIsDeterministic) {
  const ConditionalModel model = default_model();
  const Vec y = vec({2.0, -1.0});
  const TimeGrid grid = make_time_grid(vp(), 30);
  Rng r1(1), r2(2);
  DataPredictor d1 = make_oracle_predictor(model, vp());
  DataPredictor d2 = make_oracle_predictor(model, vp());
  EXPECT_EQ(em_sde_sample(d1, y, grid, vp(), r1, false, 0.0).x0, em_sde_sample(d2, y, grid, vp(), r2, false, 0.0).x0);
}

TEST(EmSde, UsesSuppliedNoiseOrder) {
  const ConditionalModel model = default_model();
  const Vec y = vec({2.0, -1.0});
  const TimeGrid grid = make_time_grid(bb(), 6);
  std::vector<std::size_t> seen;
  DataPredictor d = make_oracle_predictor(model, bb());
  (void)em_sde_integrate(d, y, grid, bb(), [&](std::size_t n) {
    seen.push_back(n);
    return Vec::Zero(2);
  });
  EXPECT_EQ(seen, (std::vector<std::size_t>{6, 5, 4, 3, 2, 1}));
}

TEST(Batch, ThreadCountDoesNotChangeResults) {
  const ConditionalModel model = default_model();
  const Vec y = vec({2.0, -1.0});
  for (SamplerMethod method : kAllMethods) {
    const SamplerConfig config{method, make_time_grid(vp(), 12), false, 5};
    const auto serial = sample_batch(config, model, vp(), y, 17, 1);
    const auto threaded = sample_batch(config, model, vp(), y, 17, 4);
    ASSERT_EQ(serial.size(), threaded.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      EXPECT_EQ(serial[i].x0, threaded[i].x0);
      EXPECT_EQ(serial[i].nfe, threaded[i].nfe);
    }
  }
}

TEST(Batch, RunsUseDerivedSeeds) {
  const ConditionalModel model = default_model();
  const Vec y = vec({2.0, -1.0});
  const SamplerConfig config{SamplerMethod::kOdes3, make_time_grid(bb(), 12), false, 5};
  const auto runs = sample_batch(config, model, bb(), y, 3);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    EXPECT_EQ(runs[i].seed, derive_seed(5, i));
    SamplerConfig single = config;
    single.seed = derive_seed(5, i);
    DataPredictor d = make_oracle_predictor(model, bb());
    EXPECT_EQ(run_sampler(single, d, y, bb()).x0, runs[i].x0);
  }
}

TEST(ParallelFor, PropagatesExceptionsAndVisitsAll) {
  std::atomic<int> visits{0};
  parallel_for(100, 3, [&](std::size_t) { ++visits; });
  EXPECT_EQ(visits.load(), 100);
  EXPECT_THROW(parallel_for(50, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Methods, ParseRoundTrip) {
  for (SamplerMethod m : kAllMethods) EXPECT_EQ(parse_sampler_method(to_string(m)), m);
  EXPECT_THROW(parse_sampler_method("ddim"), ConfigError);
}

}  // namespace
}  // namespace bridge
