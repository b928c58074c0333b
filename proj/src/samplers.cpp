#include "bridgesampler/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include "bridgesampler/dynamics.hpp"
#include "bridgesampler/errors.hpp"

namespace bridge {

namespace {

void check_finite(const Vec& x, double t) {
  if (!x.allFinite()) {
    std::ostringstream msg;
    msg << "sampler state became non-finite at t = " << t;
    throw NonFiniteStateError(msg.str(), t);
  }
}

// tau = T is the degenerate limit where both starts collapse onto y.
void check_start_time(double tau, const BridgeSchedule& s) {
  if (!(tau > 0.0 && tau <= s.horizon())) {
    std::ostringstream msg;
    msg << "start time tau = " << tau << " must lie in (0, T]";
    throw ConfigError(msg.str());
  }
}

Vec draw(const StartDistribution& law, Rng& rng) {
  if (law.variance == 0.0) return law.mean;
  return law.mean + std::sqrt(law.variance) * rng.normal_vector(law.mean.size());
}

void record(std::vector<TrajectoryPoint>* trajectory, double t, const Vec& x) {
  if (trajectory != nullptr) trajectory->push_back({t, x});
}

std::span<const double> ode_knots(const TimeGrid& grid) {
  return std::span<const double>(grid.times()).first(grid.steps());
}

// Shared tail of the three Heun-based samplers.
SampleRun finish_with_heun(DataPredictor& predictor, const Vec& y, const TimeGrid& grid, const BridgeSchedule& s,
                           Vec x_tau, std::uint64_t seed, bool record_trajectory) {
  SampleRun run;
  run.seed = seed;
  check_finite(x_tau, grid.tau());
  if (record_trajectory) {
    run.trajectory.reserve(grid.steps() + 1);
    run.trajectory.push_back({grid.horizon(), y});
    run.trajectory.push_back({grid.tau(), x_tau});
  }
  run.x0 = pf_ode_leg(predictor, std::move(x_tau), y, ode_knots(grid), s,
                      record_trajectory ? &run.trajectory : nullptr);
  run.nfe = predictor.nfe();
  return run;
}

}  // namespace

std::string_view to_string(SamplerMethod method) {
  switch (method) {
    case SamplerMethod::kOdes3:
      return "odes3";
    case SamplerMethod::kEmSde:
      return "em_sde";
    case SamplerMethod::kEmStartHeun:
      return "em_start_heun";
    case SamplerMethod::kDeterministicStartHeun:
      return "deterministic_start_heun";
  }
  return "unknown";
}

SamplerMethod parse_sampler_method(std::string_view name) {
  if (name == "odes3") return SamplerMethod::kOdes3;
  if (name == "em_sde") return SamplerMethod::kEmSde;
  if (name == "em_start_heun") return SamplerMethod::kEmStartHeun;
  if (name == "deterministic_start_heun") return SamplerMethod::kDeterministicStartHeun;
  throw ConfigError("unknown sampler method '" + std::string(name) + "'");
}

std::int64_t expected_nfe(SamplerMethod method, std::size_t steps) {
  const auto n = static_cast<std::int64_t>(steps);
  return method == SamplerMethod::kEmSde ? n : 2 * n - 2;
}

Vec euler_step(const DriftFn& drift, const Vec& x, double t_from, double t_to) {
  return x + (t_to - t_from) * drift(x, t_from);
}

Vec heun_step(const DriftFn& drift, const Vec& x, double t_from, double t_to) {
  const double h = t_to - t_from;
  const Vec d = drift(x, t_from);
  const Vec x_pred = x + h * d;
  const Vec d_pred = drift(x_pred, t_to);
  return x + 0.5 * h * (d + d_pred);
}

Vec euler_maruyama_step(const DriftFn& drift, double diffusion, const Vec& x, double t_from, double t_to,
                        const Vec& z) {
  const double h = t_to - t_from;
  return x + h * drift(x, t_from) + diffusion * std::sqrt(std::abs(h)) * z;
}

Vec predictor_pf_ode_drift(DataPredictor& predictor, const Vec& x, const Vec& y, double t, const BridgeSchedule& s) {
  const Vec x0_hat = predictor(x, y, t);
  const Vec score = score_from_predictor(x0_hat, x, y, t, s);
  return pf_ode_drift(s, x, y, t, score).value();
}

Vec heun_step(DataPredictor& predictor, const Vec& x, double t_from, double t_to, const Vec& y,
              const BridgeSchedule& s) {
  if (!(0.0 < t_to && t_to < t_from && t_from < s.horizon())) {
    std::ostringstream msg;
    msg << "Heun step needs 0 < t_to < t_from < T; got " << t_from << " -> " << t_to;
    throw SingularTimeError(msg.str(), t_to <= 0.0 ? t_to : t_from);
  }
  return heun_step([&](const Vec& state, double t) { return predictor_pf_ode_drift(predictor, state, y, t, s); },
                   x, t_from, t_to);
}

StartDistribution posterior_start_distribution(const Vec& x0_hat_T, const Vec& y, double tau,
                                               const BridgeSchedule& s) {
  check_start_time(tau, s);
  const BridgeCoeffs k = coeffs(s, tau);
  return {k.a * y + k.b * x0_hat_T, k.c2()};
}

StartDistribution em_start_distribution(const Vec& x0_hat_T, const Vec& y, double tau, const BridgeSchedule& s) {
  check_start_time(tau, s);
  const double T = s.horizon();
  const Vec drift_T = s.drift_coef(T) * y - s.diffusion_sq(T) * sde_limit_drift(s, y, x0_hat_T);
  return {y + drift_T * (tau - T), s.diffusion_sq(T) * (T - tau)};
}

Vec posterior_start(const Vec& x0_hat_T, const Vec& y, double tau, const BridgeSchedule& s, Rng& rng) {
  return draw(posterior_start_distribution(x0_hat_T, y, tau, s), rng);
}

Vec em_start(const Vec& x0_hat_T, const Vec& y, double tau, const BridgeSchedule& s, Rng& rng) {
  return draw(em_start_distribution(x0_hat_T, y, tau, s), rng);
}

Vec pf_ode_leg(DataPredictor& predictor, Vec x, const Vec& y, std::span<const double> knots, const BridgeSchedule& s,
               std::vector<TrajectoryPoint>* trajectory) {
  if (knots.size() < 2) throw ConfigError("PF-ODE leg needs at least one interval");
  for (std::size_t n = knots.size() - 1; n >= 2; --n) {
    x = heun_step(predictor, x, knots[n], knots[n - 1], y, s);
    check_finite(x, knots[n - 1]);
    record(trajectory, knots[n - 1], x);
  }
  // Last interval: Euler only; the corrector would need the score at t_0.
  const Vec d = predictor_pf_ode_drift(predictor, x, y, knots[1], s);
  x += (knots[0] - knots[1]) * d;
  check_finite(x, knots[0]);
  record(trajectory, knots[0], x);
  return x;
}

SampleRun odes3_sample(DataPredictor& predictor, const Vec& y, const TimeGrid& grid, const BridgeSchedule& s,
                       Rng& rng, bool record_trajectory) {
  predictor.reset_nfe();
  const Vec x0_hat_T = predictor(y, y, grid.horizon());
  Vec x_tau = posterior_start(x0_hat_T, y, grid.tau(), s, rng);
  return finish_with_heun(predictor, y, grid, s, std::move(x_tau), rng.seed(), record_trajectory);
}

SampleRun em_start_heun_sample(DataPredictor& predictor, const Vec& y, const TimeGrid& grid,
                               const BridgeSchedule& s, Rng& rng, bool record_trajectory) {
  predictor.reset_nfe();
  const Vec x0_hat_T = predictor(y, y, grid.horizon());
  Vec x_tau = em_start(x0_hat_T, y, grid.tau(), s, rng);
  return finish_with_heun(predictor, y, grid, s, std::move(x_tau), rng.seed(), record_trajectory);
}

SampleRun deterministic_start_heun(DataPredictor& predictor, const Vec& y, const TimeGrid& grid,
                                   const BridgeSchedule& s, bool record_trajectory) {
  predictor.reset_nfe();
  const Vec x0_hat_T = predictor(y, y, grid.horizon());
  Vec x_tau = posterior_start_distribution(x0_hat_T, y, grid.tau(), s).mean;
  return finish_with_heun(predictor, y, grid, s, std::move(x_tau), 0, record_trajectory);
}

SampleRun em_sde_integrate(DataPredictor& predictor, const Vec& y, const TimeGrid& grid, const BridgeSchedule& s,
                           const NoiseSource& noise, bool record_trajectory) {
  predictor.reset_nfe();
  SampleRun run;
  const auto& t = grid.times();
  const std::size_t N = grid.steps();
  const double T = grid.horizon();
  if (record_trajectory) {
    run.trajectory.reserve(N + 1);
    run.trajectory.push_back({T, y});
  }

  // The score is undefined at T but the nonlinear drift has a finite limit.
  const Vec x0_hat_T = predictor(y, y, T);
  const Vec drift_T = s.drift_coef(T) * y - s.diffusion_sq(T) * sde_limit_drift(s, y, x0_hat_T);
  const double h_first = t[N - 1] - T;
  Vec x = y + h_first * drift_T + s.diffusion(T) * std::sqrt(-h_first) * noise(N);
  check_finite(x, t[N - 1]);
  if (record_trajectory) run.trajectory.push_back({t[N - 1], x});

  for (std::size_t n = N - 1; n >= 1; --n) {
    const double t_n = t[n];
    const double h = t[n - 1] - t_n;
    const Vec x0_hat = predictor(x, y, t_n);
    const Vec score = score_from_predictor(x0_hat, x, y, t_n, s);
    const Vec drift = reverse_sde_drift(s, x, y, t_n, score).value();
    x = x + h * drift + s.diffusion(t_n) * std::sqrt(-h) * noise(n);
    check_finite(x, t[n - 1]);
    if (record_trajectory) run.trajectory.push_back({t[n - 1], x});
  }
  run.x0 = std::move(x);
  run.nfe = predictor.nfe();
  return run;
}

SampleRun em_sde_sample(DataPredictor& predictor, const Vec& y, const TimeGrid& grid, const BridgeSchedule& s,
                        Rng& rng, bool record_trajectory, double noise_scale) {
  SampleRun run = em_sde_integrate(
      predictor, y, grid, s, [&](std::size_t) -> Vec { return noise_scale * rng.normal_vector(y.size()); },
      record_trajectory);
  run.seed = rng.seed();
  return run;
}

SampleRun run_sampler(const SamplerConfig& config, DataPredictor& predictor, const Vec& y, const BridgeSchedule& s) {
  Rng rng(config.seed);
  switch (config.method) {
    case SamplerMethod::kOdes3:
      return odes3_sample(predictor, y, config.grid, s, rng, config.record_trajectory);
    case SamplerMethod::kEmSde:
      return em_sde_sample(predictor, y, config.grid, s, rng, config.record_trajectory);
    case SamplerMethod::kEmStartHeun:
      return em_start_heun_sample(predictor, y, config.grid, s, rng, config.record_trajectory);
    case SamplerMethod::kDeterministicStartHeun: {
      SampleRun run = deterministic_start_heun(predictor, y, config.grid, s, config.record_trajectory);
      run.seed = config.seed;
      return run;
    }
  }
  throw ConfigError("unhandled sampler method");
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1U, threads), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<SampleRun> sample_batch(const SamplerConfig& config, const ConditionalModel& model,
                                    const BridgeSchedule& s, const Vec& y, std::size_t runs, unsigned threads) {
  std::vector<SampleRun> out(runs);
  parallel_for(runs, threads, [&](std::size_t i) {
    SamplerConfig per_run = config;
    per_run.seed = derive_seed(config.seed, i);
    DataPredictor predictor = make_oracle_predictor(model, s);
    out[i] = run_sampler(per_run, predictor, y, s);
  });
  return out;
}

}  // namespace bridge
