#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bridgesampler/oracle_models.hpp"
#include "bridgesampler/rng.hpp"
#include "bridgesampler/samplers.hpp"
#include "bridgesampler/schedule.hpp"

namespace bridge {

// Diagonal Gaussian.
struct GaussianSummary {
  Vec mean;
  Vec variance;
};

// KL(p || q) for diagonal Gaussians.
double kl_gaussian(const GaussianSummary& p, const GaussianSummary& q);

enum class TheoremId { kT1, kT2, kT3 };
std::string_view to_string(TheoremId id);

// One numerical check. `params` are the sweep abscissae (epsilons, taus),
// `observed` the primary measurement per abscissa, `secondary` an optional
// companion series (t2: ||drift|| * c; t3: MC relative error).
struct TheoremReport {
  TheoremId id;
  std::vector<double> params;
  std::vector<double> observed;
  std::vector<double> secondary;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

// t1: the reverse-SDE nonlinear drift at T - eps along the forward
// mean path converges to sde_limit_drift. Passes when the errors are
// non-increasing in eps and the last one is below 1e-3 (1 + ||limit||).
TheoremReport check_theorem1(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                             std::span<const double> epsilons);

// t2: ||PF-ODE drift|| at T - eps along x = a y + b x0 + c z. Passes
// when the norms increase strictly as eps shrinks over >= 4 decades, the last
// norm exceeds 10x the first, and ||drift|| c stays within +-20% of its final
// value over the last two decades.
TheoremReport check_theorem2(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                             std::span<const double> epsilons, const Vec& x0, const Vec& z);
// Draws x0 ~ q_data and z ~ N(0, I) from `rng`.
TheoremReport check_theorem2(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                             std::span<const double> epsilons, Rng& rng);

enum class StartKind { kPosterior, kEulerMaruyama };
std::string_view to_string(StartKind kind);
StartKind parse_start_kind(std::string_view name);

GaussianSummary start_summary(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y, double tau,
                              StartKind kind);

// E_{X0 ~ q_data}[KL(start || N(a y + b X0, c^2 I))], closed form through the
// prior mean and variance of q_data.
double expected_kl(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y, double tau,
                   const GaussianSummary& start);
double expected_kl_start(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y, double tau,
                         StartKind kind);

// Monte-Carlo estimate of the same expectation.
double expected_kl_monte_carlo(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y, double tau,
                               const GaussianSummary& start, std::size_t draws, Rng& rng);

struct Theorem3Options {
  StartKind comparator = StartKind::kEulerMaruyama;
  std::size_t mc_draws = 1'000'000;
  // Only the first `mc_pairs` (tau, y) pairs get a Monte-Carlo cross-check.
  std::size_t mc_pairs = 4;
  double mc_rel_tol = 0.01;
};

// t3 over every (tau, y) pair: observed = KL(comparator) - KL(post).
TheoremReport check_theorem3(const ConditionalModel& model, const BridgeSchedule& s, std::span<const Vec> ys,
                             std::span<const double> taus, const Theorem3Options& options, Rng& rng);

// Minimizes expected_kl over diagonal Gaussians by per-coordinate Newton
// iterations with finite-difference derivatives.
GaussianSummary optimal_gaussian_projection(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                                            double tau);

// Moments of the exact-score PF-ODE pushforward of N(start) from tau to 0.
// For Gaussian data the drift is affine, so mean and variance follow linear
// ODEs; integrated with `steps` RK4 steps down to the last fine knot, then one
// Euler step to 0.
GaussianSummary gaussian_flow_oracle(const GaussianConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                                     const GaussianSummary& start, double tau, std::size_t steps = 20'000);

struct ConvergenceResult {
  std::vector<std::size_t> grid_sizes;
  std::vector<double> step_sizes;
  std::vector<double> errors;
  // Least-squares slope of log(error) against log(h); empty when any error
  // is zero.
  std::optional<double> order;
};

std::optional<double> fit_order(std::span<const double> step_sizes, std::span<const double> errors);

enum class FieldSolver { kEuler, kHeun };

// Integrates dx/dt = field(x, t) from t_start to t_end with each grid size
// and compares against `exact(t_end)`.
ConvergenceResult convergence_order(FieldSolver solver, const DriftFn& field, const Vec& x_start, double t_start,
                                    double t_end, const Vec& exact_end, std::span<const std::size_t> grid_sizes);

struct SamplerConvergenceOptions {
  // Start time of the ODE leg (odes3); the leg runs on a uniform grid on [0, tau].
  double tau = 0.9;
  std::size_t runs = 32;
  std::size_t reference_steps = 20'000;
};

// Empirical order of a sampler family on the Gaussian oracle with common
// random numbers.
//   odes3:  ODE leg from a shared posterior-start draw, vs the exact flow of
//           that point (gaussian_flow_oracle with zero variance).
//   em_sde: strong error vs a fine Euler-Maruyama solution driven by the
//           same Brownian path.
ConvergenceResult convergence_order(SamplerMethod family, const GaussianConditionalModel& model,
                                    const BridgeSchedule& s, const Vec& y, std::span<const std::size_t> grid_sizes,
                                    const SamplerConvergenceOptions& options, Rng& rng);

// Mean absolute difference of sorted samples.
double wasserstein1_1d(std::span<const double> a, std::span<const double> b);

}  // namespace bridge
