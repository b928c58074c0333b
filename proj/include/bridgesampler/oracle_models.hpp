#pragma once

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "bridgesampler/rng.hpp"
#include "bridgesampler/schedule.hpp"

namespace bridge {

// q_data(X0 | y) = N(A y + u, diag(variance)).
class GaussianConditionalModel {
 public:
  GaussianConditionalModel(Eigen::MatrixXd mean_matrix, Vec mean_offset, Vec variance);
  // Condition-independent mean (A = 0).
  static GaussianConditionalModel fixed(Vec mean, Vec variance);

  Eigen::Index dim() const noexcept { return mean_offset_.size(); }
  const Eigen::MatrixXd& mean_matrix() const noexcept { return mean_matrix_; }
  const Vec& mean_offset() const noexcept { return mean_offset_; }
  const Vec& variance() const noexcept { return variance_; }

  Vec prior_mean(const Vec& y) const;
  Vec prior_variance(const Vec& y) const;

  Vec sample(const Vec& y, Rng& rng) const;

  // E[X0 | X_t = x, y]. Conjugate update, written as
  //   mu + b var (x - a y - b mu) / (c^2 + b^2 var)
  // which stays finite at t = 0.
  Vec posterior_mean(const BridgeSchedule& s, const Vec& x, const Vec& y, double t) const;

  // grad log q_{t|y}(x | y) = -(x - a y - b mu) / (c^2 + b^2 var).
  Vec marginal_score(const BridgeSchedule& s, const Vec& x, const Vec& y, double t) const;

 private:
  Eigen::MatrixXd mean_matrix_;
  Vec mean_offset_;
  Vec variance_;
};

// Finite mixture sharing one diagonal covariance; component k has mean
// A_k y + u_k.
class GaussianMixtureConditionalModel {
 public:
  struct Component {
    Eigen::MatrixXd mean_matrix;
    Vec mean_offset;
  };

  GaussianMixtureConditionalModel(Vec weights, std::vector<Component> components, Vec variance);
  static GaussianMixtureConditionalModel fixed(Vec weights, const std::vector<Vec>& means, Vec variance);

  Eigen::Index dim() const noexcept { return variance_.size(); }
  const Vec& weights() const noexcept { return weights_; }
  const std::vector<Component>& components() const noexcept { return components_; }
  const Vec& variance() const noexcept { return variance_; }

  Vec component_mean(std::size_t k, const Vec& y) const;
  Vec prior_mean(const Vec& y) const;
  Vec prior_variance(const Vec& y) const;

  Vec sample(const Vec& y, Rng& rng) const;

  // Posterior responsibilities of each component given X_t = x (log-sum-exp).
  Vec responsibilities(const BridgeSchedule& s, const Vec& x, const Vec& y, double t) const;
  Vec posterior_mean(const BridgeSchedule& s, const Vec& x, const Vec& y, double t) const;
  Vec marginal_score(const BridgeSchedule& s, const Vec& x, const Vec& y, double t) const;

 private:
  Vec weights_;
  std::vector<Component> components_;
  Vec variance_;
};

using ConditionalModel = std::variant<GaussianConditionalModel, GaussianMixtureConditionalModel>;

Eigen::Index model_dim(const ConditionalModel& model);
Vec prior_mean(const ConditionalModel& model, const Vec& y);
Vec prior_variance(const ConditionalModel& model, const Vec& y);

Vec sample_x0(const ConditionalModel& model, const Vec& y, Rng& rng);

// a_t y + b_t x0 + c_t z.
Vec forward_sample(const BridgeSchedule& s, const Vec& x0, const Vec& y, double t, const Vec& z);
Vec forward_sample(const BridgeSchedule& s, const Vec& x0, const Vec& y, double t, Rng& rng);

// Exact E[X0 | X_t = x, y]. At t = T the kernel is a Dirac at y, so only
// x == y is admissible and the prior mean is returned.
Vec posterior_mean(const ConditionalModel& model, const Vec& x, const Vec& y, double t,
                   const BridgeSchedule& s);

// Exact marginal score of the Gaussian model; t must lie in (0, T).
Vec marginal_score_exact(const GaussianConditionalModel& model, const Vec& x, const Vec& y, double t,
                         const BridgeSchedule& s);

using PredictorFn = std::function<Vec(const Vec& x, const Vec& y, double t)>;

// D(X_t, y, t) with an evaluation counter. Each sampler run owns its own
// instance, so the counter is never shared between threads.
class DataPredictor {
 public:
  explicit DataPredictor(PredictorFn fn) : fn_(std::move(fn)) {}

  Vec operator()(const Vec& x, const Vec& y, double t) {
    ++nfe_;
    return fn_(x, y, t);
  }

  std::int64_t nfe() const noexcept { return nfe_; }
  void reset_nfe() noexcept { nfe_ = 0; }

 private:
  PredictorFn fn_;
  std::int64_t nfe_ = 0;
};

// Wraps the analytic posterior mean as a perfectly trained predictor.
DataPredictor make_oracle_predictor(const ConditionalModel& model, const BridgeSchedule& s);

}  // namespace bridge
