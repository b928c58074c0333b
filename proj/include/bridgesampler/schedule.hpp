#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace bridge {

enum class ScheduleKind { kBrownianBridge, kVariancePreserving };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

// Linear forward SDE dX = f(t) X dt + g(t) dw on [0, T], pinned to y at T
// through the Doob h-transform. All bridge coefficients derive from the
// integrals alpha_t = exp(int_0^t f) and rho_t^2 = int_0^t g^2 / alpha^2.
//
//   brownian_bridge:      f = 0,        g = sigma
//   variance_preserving:  f = -beta/2,  g^2 = beta,
//                         beta(t) = beta_min + (beta_max - beta_min) t / T
class BridgeSchedule {
 public:
  static BridgeSchedule brownian_bridge(double sigma, double horizon = 1.0);
  static BridgeSchedule variance_preserving(double beta_min, double beta_max, double horizon = 1.0);

  ScheduleKind kind() const noexcept { return kind_; }
  double horizon() const noexcept { return horizon_; }
  double sigma() const noexcept { return sigma_; }
  double beta_min() const noexcept { return beta_min_; }
  double beta_max() const noexcept { return beta_max_; }

  // Linear drift coefficient f(t).
  double drift_coef(double t) const;
  // Squared diffusion g^2(t).
  double diffusion_sq(double t) const;
  double diffusion(double t) const;

  double alpha(double t) const;
  double rho2(double t) const;

 private:
  BridgeSchedule(ScheduleKind kind, double horizon, double sigma, double beta_min, double beta_max);

  void check_time(double t) const;
  // int_0^t beta(s) ds for the VP schedule.
  double integrated_beta(double t) const;

  ScheduleKind kind_;
  double horizon_;
  double sigma_ = 0.0;
  double beta_min_ = 0.0;
  double beta_max_ = 0.0;
};

// Transition-kernel coefficients: X_t | X_0, y ~ N(a y + b X_0, c^2 I).
struct BridgeCoeffs {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double t = 0.0;

  double c2() const noexcept { return c * c; }
};

BridgeCoeffs coeffs(const BridgeSchedule& s, double t);

inline double alpha(const BridgeSchedule& s, double t) { return s.alpha(t); }
inline double rho2(const BridgeSchedule& s, double t) { return s.rho2(t); }

enum class GridSpacing { kUniform, kQuadratic };

std::string_view to_string(GridSpacing spacing);
GridSpacing parse_grid_spacing(std::string_view name);

// 0 = t_0 < t_1 < ... < t_{N-1} = tau < t_N = T.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> times);

  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t steps() const noexcept { return times_.size() - 1; }
  double operator[](std::size_t i) const { return times_[i]; }
  double tau() const { return times_[times_.size() - 2]; }
  double horizon() const { return times_.back(); }

 private:
  std::vector<double> times_;
};

// Uniform: t_i = T i / N. Quadratic: symmetric piecewise-quadratic warp
// w(u) = 2u^2 for u <= 1/2 and 1 - 2(1-u)^2 above, which clusters knots at
// both ends of [0, T]. A positive t_min raises t_1 to at least t_min.
TimeGrid make_time_grid(const BridgeSchedule& s, std::size_t steps,
                        GridSpacing spacing = GridSpacing::kUniform, double t_min = 0.0);

}  // namespace bridge
