#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bridgesampler/oracle_models.hpp"
#include "bridgesampler/rng.hpp"
#include "bridgesampler/schedule.hpp"

namespace bridge {

enum class SamplerMethod { kOdes3, kEmSde, kEmStartHeun, kDeterministicStartHeun };

std::string_view to_string(SamplerMethod method);
SamplerMethod parse_sampler_method(std::string_view name);

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::kOdes3;
  TimeGrid grid;
  bool record_trajectory = false;
  std::uint64_t seed = 0;
};

struct TrajectoryPoint {
  double t;
  Vec x;
};

struct SampleRun {
  Vec x0;
  std::vector<TrajectoryPoint> trajectory;
  std::int64_t nfe = 0;
  std::uint64_t seed = 0;
};

// Expected predictor evaluations for one run on an N-step grid.
std::int64_t expected_nfe(SamplerMethod method, std::size_t steps);

// ---- generic one-step integrators (time may run in either direction) ----

using DriftFn = std::function<Vec(const Vec& x, double t)>;

Vec euler_step(const DriftFn& drift, const Vec& x, double t_from, double t_to);

// Explicit trapezoidal predictor-corrector:
//   x' = x + h d(x, t_from),  x_out = x + h/2 (d(x, t_from) + d(x', t_to)).
Vec heun_step(const DriftFn& drift, const Vec& x, double t_from, double t_to);

// x + h d(x, t_from) + diffusion sqrt|h| z.
Vec euler_maruyama_step(const DriftFn& drift, double diffusion, const Vec& x, double t_from, double t_to,
                        const Vec& z);

// ---- bridge-specific pieces ----

// PF-ODE drift at (x, t) with the score taken from one predictor call.
Vec predictor_pf_ode_drift(DataPredictor& predictor, const Vec& x, const Vec& y, double t, const BridgeSchedule& s);

// One Heun step of the PF-ODE from t_from down to t_to; two predictor calls.
// Requires 0 < t_to < t_from < T.
Vec heun_step(DataPredictor& predictor, const Vec& x, double t_from, double t_to, const Vec& y,
              const BridgeSchedule& s);

// Isotropic Gaussian law of X_tau used to leave the singular endpoint.
struct StartDistribution {
  Vec mean;
  double variance = 0.0;
};

// q_post = N(a_tau y + b_tau x0_hat_T, c_tau^2 I).
StartDistribution posterior_start_distribution(const Vec& x0_hat_T, const Vec& y, double tau,
                                               const BridgeSchedule& s);

// Single Euler-Maruyama step of the reverse SDE from T to tau, with the
// well-defined limit drift at T.
StartDistribution em_start_distribution(const Vec& x0_hat_T, const Vec& y, double tau, const BridgeSchedule& s);

Vec posterior_start(const Vec& x0_hat_T, const Vec& y, double tau, const BridgeSchedule& s, Rng& rng);
Vec em_start(const Vec& x0_hat_T, const Vec& y, double tau, const BridgeSchedule& s, Rng& rng);

// Integrates the PF-ODE from knots.back() = tau down to knots.front() = 0:
// Heun on every interval except the last, which is an Euler step. Appends
// to `trajectory` when given.
Vec pf_ode_leg(DataPredictor& predictor, Vec x_tau, const Vec& y, std::span<const double> knots,
               const BridgeSchedule& s, std::vector<TrajectoryPoint>* trajectory = nullptr);

SampleRun odes3_sample(DataPredictor& predictor, const Vec& y, const TimeGrid& grid, const BridgeSchedule& s,
                       Rng& rng, bool record_trajectory = false);

// Standard-normal draw for the step that ends at knot n - 1 (n = N ... 1).
using NoiseSource = std::function<Vec(std::size_t n)>;

// Euler-Maruyama on the reverse SDE with caller-supplied noise. The first
// step leaves T with the limit drift of sde_limit_drift.
SampleRun em_sde_integrate(DataPredictor& predictor, const Vec& y, const TimeGrid& grid, const BridgeSchedule& s,
                           const NoiseSource& noise, bool record_trajectory = false);

// Euler-Maruyama on the reverse SDE; `noise_scale` = 0 turns it into Euler.
SampleRun em_sde_sample(DataPredictor& predictor, const Vec& y, const TimeGrid& grid, const BridgeSchedule& s,
                        Rng& rng, bool record_trajectory = false, double noise_scale = 1.0);

SampleRun em_start_heun_sample(DataPredictor& predictor, const Vec& y, const TimeGrid& grid,
                               const BridgeSchedule& s, Rng& rng, bool record_trajectory = false);

// Starts at the posterior mean instead of a posterior draw; no randomness.
SampleRun deterministic_start_heun(DataPredictor& predictor, const Vec& y, const TimeGrid& grid,
                                   const BridgeSchedule& s, bool record_trajectory = false);

// Dispatches on config.method, seeding from config.seed.
SampleRun run_sampler(const SamplerConfig& config, DataPredictor& predictor, const Vec& y, const BridgeSchedule& s);

// `runs` independent runs; run i uses seed derive_seed(config.seed, i) and a
// private oracle predictor. Results are ordered by run index regardless of
// `threads`.
std::vector<SampleRun> sample_batch(const SamplerConfig& config, const ConditionalModel& model,
                                    const BridgeSchedule& s, const Vec& y, std::size_t runs,
                                    unsigned threads = 1);

// Calls body(i) for i in [0, count) on up to `threads` worker threads.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace bridge
