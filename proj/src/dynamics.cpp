#include "bridgesampler/dynamics.hpp"

#include <sstream>

#include "bridgesampler/errors.hpp"

namespace bridge {

namespace {

void require_open(const BridgeSchedule& s, double t, const char* what) {
  if (!(t > 0.0 && t < s.horizon())) {
    std::ostringstream msg;
    msg << what << " requested at t = " << t << "; only defined on (0, T)";
    throw SingularTimeError(msg.str(), t);
  }
}

}  // namespace

std::string_view to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::kReverseSdeNonlinear:
      return "reverse_sde_nonlinear";
    case DriftKind::kPfOdeTotal:
      return "pf_ode_total";
    case DriftKind::kSdeTotal:
      return "sde_total";
  }
  return "unknown";
}

DriftEvaluation::DriftEvaluation(Vec value, double t, DriftKind kind)
    : value_(std::move(value)), t_(t), kind_(kind) {
  if (!value_.allFinite()) {
    std::ostringstream msg;
    msg << to_string(kind) << " drift is not finite at t = " << t;
    throw NonFiniteStateError(msg.str(), t);
  }
}

Vec h_drift(const BridgeSchedule& s, const Vec& x, const Vec& y, double t) {
  const double T = s.horizon();
  if (t == T) throw SingularTimeError("h-transform drift is singular at t = T", t);
  const double alpha_t = s.alpha(t);
  const double denom = alpha_t * alpha_t * (s.rho2(T) - s.rho2(t));
  return ((alpha_t / s.alpha(T)) * y - x) / denom;
}

Vec score_from_predictor(const Vec& prediction, const Vec& x, const Vec& y, double t, const BridgeSchedule& s) {
  const BridgeCoeffs k = coeffs(s, t);
  if (!(k.c > 0.0)) {
    std::ostringstream msg;
    msg << "score conversion needs c_t > 0; t = " << t;
    throw SingularTimeError(msg.str(), t);
  }
  return (k.b * prediction - x + k.a * y) / k.c2();
}

DriftEvaluation reverse_sde_drift(const BridgeSchedule& s, const Vec& x, const Vec& y, double t, const Vec& score) {
  require_open(s, t, "reverse SDE drift");
  Vec value = s.drift_coef(t) * x - s.diffusion_sq(t) * (score - h_drift(s, x, y, t));
  return DriftEvaluation(std::move(value), t, DriftKind::kSdeTotal);
}

DriftEvaluation reverse_sde_nonlinear(const BridgeSchedule& s, const Vec& x, double t, const Vec& x0_hat) {
  if (!(t > 0.0)) throw SingularTimeError("reverse SDE nonlinear term is singular at t = 0", t);
  const double alpha_t = s.alpha(t);
  Vec value = -(x - alpha_t * x0_hat) / (alpha_t * alpha_t * s.rho2(t));
  return DriftEvaluation(std::move(value), t, DriftKind::kReverseSdeNonlinear);
}

DriftEvaluation reverse_sde_drift_from_x0(const BridgeSchedule& s, const Vec& x, double t, const Vec& x0_hat) {
  const DriftEvaluation nonlinear = reverse_sde_nonlinear(s, x, t, x0_hat);
  Vec value = s.drift_coef(t) * x - s.diffusion_sq(t) * nonlinear.value();
  return DriftEvaluation(std::move(value), t, DriftKind::kSdeTotal);
}

DriftEvaluation pf_ode_drift(const BridgeSchedule& s, const Vec& x, const Vec& y, double t, const Vec& score) {
  require_open(s, t, "PF-ODE drift");
  Vec value = s.drift_coef(t) * x - s.diffusion_sq(t) * (0.5 * score - h_drift(s, x, y, t));
  return DriftEvaluation(std::move(value), t, DriftKind::kPfOdeTotal);
}

Vec sde_limit_drift(const BridgeSchedule& s, const Vec& y, const Vec& x0_hat_T) {
  const double T = s.horizon();
  const double alpha_T = s.alpha(T);
  return -(y - alpha_T * x0_hat_T) / (alpha_T * alpha_T * s.rho2(T));
}

}  // namespace bridge
