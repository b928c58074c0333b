#pragma once

#include <string_view>

#include "bridgesampler/rng.hpp"
#include "bridgesampler/schedule.hpp"

namespace bridge {

enum class DriftKind { kReverseSdeNonlinear, kPfOdeTotal, kSdeTotal };

std::string_view to_string(DriftKind kind);

// A drift vector tagged with where it was evaluated. Construction rejects
// non-finite components.
class DriftEvaluation {
 public:
  DriftEvaluation(Vec value, double t, DriftKind kind);

  const Vec& value() const noexcept { return value_; }
  double time() const noexcept { return t_; }
  DriftKind kind() const noexcept { return kind_; }

 private:
  Vec value_;
  double t_;
  DriftKind kind_;
};

// grad_x log p_{T|t}(y | x) = ((alpha_t / alpha_T) y - x) / (alpha_t^2 (rho_T^2 - rho_t^2)).
// Requires 0 <= t < T.
Vec h_drift(const BridgeSchedule& s, const Vec& x, const Vec& y, double t);

// Score recovered from a data prediction: (b_t d - x + a_t y) / c_t^2.
Vec score_from_predictor(const Vec& prediction, const Vec& x, const Vec& y, double t, const BridgeSchedule& s);

// f(t) x - g^2(t) (score - h).
DriftEvaluation reverse_sde_drift(const BridgeSchedule& s, const Vec& x, const Vec& y, double t, const Vec& score);

// score - h written through the posterior mean: -(x - alpha_t x0_hat) / (alpha_t^2 rho_t^2).
// Defined for 0 < t <= T.
DriftEvaluation reverse_sde_nonlinear(const BridgeSchedule& s, const Vec& x, double t, const Vec& x0_hat);

// Same total drift as reverse_sde_drift, evaluated from x0_hat instead of the score.
DriftEvaluation reverse_sde_drift_from_x0(const BridgeSchedule& s, const Vec& x, double t, const Vec& x0_hat);

// f(t) x - g^2(t) (score / 2 - h). Singular at t = T.
DriftEvaluation pf_ode_drift(const BridgeSchedule& s, const Vec& x, const Vec& y, double t, const Vec& score);

// Limit of score - h as t -> T along x_t -> y:
//   -(y - alpha_T x0_hat_T) / (alpha_T^2 rho_T^2).
Vec sde_limit_drift(const BridgeSchedule& s, const Vec& y, const Vec& x0_hat_T);

}  // namespace bridge
