#include "bridgesampler/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "bridgesampler/errors.hpp"

namespace bridge {

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kBrownianBridge:
      return "brownian_bridge";
    case ScheduleKind::kVariancePreserving:
      return "variance_preserving";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "brownian_bridge") return ScheduleKind::kBrownianBridge;
  if (name == "variance_preserving") return ScheduleKind::kVariancePreserving;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

BridgeSchedule::BridgeSchedule(ScheduleKind kind, double horizon, double sigma, double beta_min,
                               double beta_max)
    : kind_(kind), horizon_(horizon), sigma_(sigma), beta_min_(beta_min), beta_max_(beta_max) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("schedule horizon T must be finite and strictly positive");
  }
}

BridgeSchedule BridgeSchedule::brownian_bridge(double sigma, double horizon) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("brownian_bridge sigma must be finite and strictly positive");
  }
  return BridgeSchedule(ScheduleKind::kBrownianBridge, horizon, sigma, 0.0, 0.0);
}

BridgeSchedule BridgeSchedule::variance_preserving(double beta_min, double beta_max, double horizon) {
  if (!(beta_min >= 0.0) || !(beta_max >= beta_min) || !(beta_max > 0.0) || !std::isfinite(beta_max)) {
    throw ConfigError("variance_preserving needs 0 <= beta_min <= beta_max, beta_max > 0");
  }
  return BridgeSchedule(ScheduleKind::kVariancePreserving, horizon, 0.0, beta_min, beta_max);
}

void BridgeSchedule::check_time(double t) const {
  if (!(t >= 0.0 && t <= horizon_)) {
    std::ostringstream msg;
    msg << "time " << t << " outside [0, " << horizon_ << "]";
    throw DomainError(msg.str());
  }
}

double BridgeSchedule::integrated_beta(double t) const {
  return beta_min_ * t + 0.5 * (beta_max_ - beta_min_) * t * t / horizon_;
}

double BridgeSchedule::drift_coef(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::kBrownianBridge) return 0.0;
  return -0.5 * diffusion_sq(t);
}

double BridgeSchedule::diffusion_sq(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::kBrownianBridge) return sigma_ * sigma_;
  return beta_min_ + (beta_max_ - beta_min_) * t / horizon_;
}

double BridgeSchedule::diffusion(double t) const { return std::sqrt(diffusion_sq(t)); }

double BridgeSchedule::alpha(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::kBrownianBridge) return 1.0;
  return std::exp(-0.5 * integrated_beta(t));
}

double BridgeSchedule::rho2(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::kBrownianBridge) return sigma_ * sigma_ * t;
  // g^2 / alpha^2 = beta e^{B}, so the integral is e^{B(t)} - 1.
  return std::expm1(integrated_beta(t));
}

BridgeCoeffs coeffs(const BridgeSchedule& s, double t) {
  const double T = s.horizon();
  const double alpha_t = s.alpha(t);
  const double alpha_T = s.alpha(T);
  const double rho2_t = s.rho2(t);
  const double rho2_T = s.rho2(T);
  const double ratio = rho2_t / rho2_T;
  const double remaining = 1.0 - ratio;

  BridgeCoeffs out;
  out.t = t;
  out.a = ratio * alpha_t / alpha_T;
  out.b = alpha_t * remaining;
  out.c = std::sqrt(std::max(0.0, alpha_t * alpha_t * rho2_t * remaining));
  return out;
}

std::string_view to_string(GridSpacing spacing) {
  switch (spacing) {
    case GridSpacing::kUniform:
      return "uniform";
    case GridSpacing::kQuadratic:
      return "quadratic";
  }
  return "unknown";
}

GridSpacing parse_grid_spacing(std::string_view name) {
  if (name == "uniform") return GridSpacing::kUniform;
  if (name == "quadratic") return GridSpacing::kQuadratic;
  throw ConfigError("unknown grid spacing '" + std::string(name) + "'");
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.size() < 3) throw ConfigError("time grid needs at least 2 steps");
  if (times_.front() != 0.0) throw ConfigError("time grid must start at exactly 0");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1]) || !std::isfinite(times_[i])) {
      throw ConfigError("time grid must be strictly increasing");
    }
  }
}

namespace {

double quadratic_warp(double u) {
  if (u <= 0.5) return 2.0 * u * u;
  const double v = 1.0 - u;
  return 1.0 - 2.0 * v * v;
}

}  // namespace

TimeGrid make_time_grid(const BridgeSchedule& s, std::size_t steps, GridSpacing spacing, double t_min) {
  if (steps < 2) throw ConfigError("time grid needs N >= 2 steps");
  if (!(t_min >= 0.0)) throw ConfigError("t_min must be non-negative");

  const double T = s.horizon();
  std::vector<double> times(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(steps);
    times[i] = spacing == GridSpacing::kUniform ? T * u : T * quadratic_warp(u);
  }
  times.front() = 0.0;
  times.back() = T;

  if (t_min > times[1]) {
    if (!(t_min < times[2])) {
      throw ConfigError("t_min must lie below the second grid knot");
    }
    times[1] = t_min;
  }
  return TimeGrid(std::move(times));
}

}  // namespace bridge
