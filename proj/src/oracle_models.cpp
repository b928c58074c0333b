#include "bridgesampler/oracle_models.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "bridgesampler/errors.hpp"

namespace bridge {

namespace {

void check_positive_variance(const Vec& variance) {
  if (variance.size() == 0) throw ConfigError("model dimension must be positive");
  for (Eigen::Index i = 0; i < variance.size(); ++i) {
    if (!(variance[i] > 0.0) || !std::isfinite(variance[i])) {
      throw ConfigError("model variances must be finite and strictly positive");
    }
  }
}

void check_mean_map(const Eigen::MatrixXd& mean_matrix, const Vec& offset, Eigen::Index dim) {
  if (offset.size() != dim) throw ConfigError("mean offset dimension mismatch");
  if (mean_matrix.rows() != dim || mean_matrix.cols() != dim) {
    throw ConfigError("mean matrix must be dim x dim");
  }
}

void check_condition(const Vec& y, Eigen::Index dim) {
  if (y.size() != dim) throw DomainError("condition y has wrong dimension");
}

// 0 < t < T with c_t > 0 required for anything that divides by c_t^2.
void check_open_interval(const BridgeSchedule& s, double t, const char* what) {
  if (!(t > 0.0 && t < s.horizon())) {
    std::ostringstream msg;
    msg << what << " is singular at t = " << t << " (requires 0 < t < T)";
    throw SingularTimeError(msg.str(), t);
  }
}

// X_t must equal y at the horizon; anything else has zero density.
void check_terminal_state(const Vec& x, const Vec& y) {
  const double tol = 1e-12 * (1.0 + y.norm());
  if ((x - y).norm() > tol) {
    throw DomainError("at t = T the bridge is pinned to y; x_t != y has zero density");
  }
}

}  // namespace

GaussianConditionalModel::GaussianConditionalModel(Eigen::MatrixXd mean_matrix, Vec mean_offset, Vec variance)
    : mean_matrix_(std::move(mean_matrix)), mean_offset_(std::move(mean_offset)), variance_(std::move(variance)) {
  check_positive_variance(variance_);
  check_mean_map(mean_matrix_, mean_offset_, variance_.size());
}

GaussianConditionalModel GaussianConditionalModel::fixed(Vec mean, Vec variance) {
  const Eigen::Index d = mean.size();
  return GaussianConditionalModel(Eigen::MatrixXd::Zero(d, d), std::move(mean), std::move(variance));
}

Vec GaussianConditionalModel::prior_mean(const Vec& y) const {
  check_condition(y, dim());
  return mean_matrix_ * y + mean_offset_;
}

Vec GaussianConditionalModel::prior_variance(const Vec& y) const {
  check_condition(y, dim());
  return variance_;
}

Vec GaussianConditionalModel::sample(const Vec& y, Rng& rng) const {
  Vec x = prior_mean(y);
  for (Eigen::Index i = 0; i < dim(); ++i) x[i] += std::sqrt(variance_[i]) * rng.normal();
  return x;
}

Vec GaussianConditionalModel::posterior_mean(const BridgeSchedule& s, const Vec& x, const Vec& y, double t) const {
  const Vec mu = prior_mean(y);
  if (t == s.horizon()) {
    check_terminal_state(x, y);
    return mu;
  }
  const BridgeCoeffs k = coeffs(s, t);
  const Vec marginal_var = (k.c2() + k.b * k.b * variance_.array()).matrix();
  const Vec residual = x - k.a * y - k.b * mu;
  return mu + (k.b * variance_.array() * residual.array() / marginal_var.array()).matrix();
}

Vec GaussianConditionalModel::marginal_score(const BridgeSchedule& s, const Vec& x, const Vec& y, double t) const {
  check_open_interval(s, t, "marginal score");
  const Vec mu = prior_mean(y);
  const BridgeCoeffs k = coeffs(s, t);
  const Vec residual = x - k.a * y - k.b * mu;
  return (-residual.array() / (k.c2() + k.b * k.b * variance_.array())).matrix();
}

GaussianMixtureConditionalModel::GaussianMixtureConditionalModel(Vec weights, std::vector<Component> components,
                                                                 Vec variance)
    : weights_(std::move(weights)), components_(std::move(components)), variance_(std::move(variance)) {
  check_positive_variance(variance_);
  if (components_.empty() || static_cast<Eigen::Index>(components_.size()) != weights_.size()) {
    throw ConfigError("mixture needs one weight per component");
  }
  double total = 0.0;
  for (Eigen::Index k = 0; k < weights_.size(); ++k) {
    if (!(weights_[k] >= 0.0)) throw ConfigError("mixture weights must be non-negative");
    total += weights_[k];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
  for (const auto& c : components_) check_mean_map(c.mean_matrix, c.mean_offset, variance_.size());
}

GaussianMixtureConditionalModel GaussianMixtureConditionalModel::fixed(Vec weights, const std::vector<Vec>& means,
                                                                       Vec variance) {
  std::vector<Component> components;
  components.reserve(means.size());
  for (const auto& m : means) {
    components.push_back({Eigen::MatrixXd::Zero(m.size(), m.size()), m});
  }
  return GaussianMixtureConditionalModel(std::move(weights), std::move(components), std::move(variance));
}

Vec GaussianMixtureConditionalModel::component_mean(std::size_t k, const Vec& y) const {
  check_condition(y, dim());
  return components_[k].mean_matrix * y + components_[k].mean_offset;
}

Vec GaussianMixtureConditionalModel::prior_mean(const Vec& y) const {
  Vec mean = Vec::Zero(dim());
  for (std::size_t k = 0; k < components_.size(); ++k) mean += weights_[k] * component_mean(k, y);
  return mean;
}

Vec GaussianMixtureConditionalModel::prior_variance(const Vec& y) const {
  const Vec mean = prior_mean(y);
  Vec second = Vec::Zero(dim());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const Vec m = component_mean(k, y);
    second += weights_[k] * m.cwiseAbs2();
  }
  return variance_ + second - mean.cwiseAbs2();
}

Vec GaussianMixtureConditionalModel::sample(const Vec& y, Rng& rng) const {
  const double u = rng.uniform();
  std::size_t chosen = components_.size() - 1;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    cumulative += weights_[k];
    if (weights_[k] > 0.0 && u < cumulative) {
      chosen = k;
      break;
    }
  }
  while (weights_[chosen] == 0.0) --chosen;  // u rounding past the last positive weight

  Vec x = component_mean(chosen, y);
  for (Eigen::Index i = 0; i < dim(); ++i) x[i] += std::sqrt(variance_[i]) * rng.normal();
  return x;
}

Vec GaussianMixtureConditionalModel::responsibilities(const BridgeSchedule& s, const Vec& x, const Vec& y,
                                                      double t) const {
  const std::size_t K = components_.size();
  Vec log_r(K);
  if (t == s.horizon()) {
    check_terminal_state(x, y);
    return weights_;
  }
  const BridgeCoeffs k = coeffs(s, t);
  const Eigen::ArrayXd marginal_var = k.c2() + k.b * k.b * variance_.array();
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < K; ++j) {
    if (weights_[j] == 0.0) {
      log_r[j] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const Eigen::ArrayXd residual = (x - k.a * y - k.b * component_mean(j, y)).array();
    log_r[j] = std::log(weights_[j]) - 0.5 * (residual.square() / marginal_var).sum();
    max_log = std::max(max_log, log_r[j]);
  }
  Vec r(K);
  double total = 0.0;
  for (std::size_t j = 0; j < K; ++j) {
    r[j] = std::exp(log_r[j] - max_log);
    total += r[j];
  }
  return r / total;
}

Vec GaussianMixtureConditionalModel::posterior_mean(const BridgeSchedule& s, const Vec& x, const Vec& y,
                                                    double t) const {
  const Vec r = responsibilities(s, x, y, t);
  if (t == s.horizon()) return prior_mean(y);

  const BridgeCoeffs k = coeffs(s, t);
  const Eigen::ArrayXd gain = k.b * variance_.array() / (k.c2() + k.b * k.b * variance_.array());
  Vec mean = Vec::Zero(dim());
  for (std::size_t j = 0; j < components_.size(); ++j) {
    if (r[j] == 0.0) continue;
    const Vec m = component_mean(j, y);
    const Vec residual = x - k.a * y - k.b * m;
    mean += r[j] * (m + (gain * residual.array()).matrix());
  }
  return mean;
}

Vec GaussianMixtureConditionalModel::marginal_score(const BridgeSchedule& s, const Vec& x, const Vec& y,
                                                    double t) const {
  check_open_interval(s, t, "marginal score");
  const Vec r = responsibilities(s, x, y, t);
  const BridgeCoeffs k = coeffs(s, t);
  const Eigen::ArrayXd marginal_var = k.c2() + k.b * k.b * variance_.array();
  Vec score = Vec::Zero(dim());
  for (std::size_t j = 0; j < components_.size(); ++j) {
    if (r[j] == 0.0) continue;
    const Vec residual = x - k.a * y - k.b * component_mean(j, y);
    score -= r[j] * (residual.array() / marginal_var).matrix();
  }
  return score;
}

Eigen::Index model_dim(const ConditionalModel& model) {
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

Vec prior_mean(const ConditionalModel& model, const Vec& y) {
  return std::visit([&](const auto& m) { return m.prior_mean(y); }, model);
}

Vec prior_variance(const ConditionalModel& model, const Vec& y) {
  return std::visit([&](const auto& m) { return m.prior_variance(y); }, model);
}

Vec sample_x0(const ConditionalModel& model, const Vec& y, Rng& rng) {
  return std::visit([&](const auto& m) { return m.sample(y, rng); }, model);
}

Vec forward_sample(const BridgeSchedule& s, const Vec& x0, const Vec& y, double t, const Vec& z) {
  const BridgeCoeffs k = coeffs(s, t);
  return k.a * y + k.b * x0 + k.c * z;
}

Vec forward_sample(const BridgeSchedule& s, const Vec& x0, const Vec& y, double t, Rng& rng) {
  return forward_sample(s, x0, y, t, rng.normal_vector(x0.size()));
}

Vec posterior_mean(const ConditionalModel& model, const Vec& x, const Vec& y, double t, const BridgeSchedule& s) {
  return std::visit([&](const auto& m) { return m.posterior_mean(s, x, y, t); }, model);
}

Vec marginal_score_exact(const GaussianConditionalModel& model, const Vec& x, const Vec& y, double t,
                         const BridgeSchedule& s) {
  return model.marginal_score(s, x, y, t);
}

DataPredictor make_oracle_predictor(const ConditionalModel& model, const BridgeSchedule& s) {
  return DataPredictor([model, s](const Vec& x, const Vec& y, double t) { return posterior_mean(model, x, y, t, s); });
}

}  // namespace bridge
