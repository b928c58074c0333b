#include "bridgesampler/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "bridgesampler/dynamics.hpp"
#include "bridgesampler/errors.hpp"

namespace bridge {

double kl_gaussian(const GaussianSummary& p, const GaussianSummary& q) {
  const Eigen::Index d = p.mean.size();
  if (q.mean.size() != d || p.variance.size() != d || q.variance.size() != d) {
    throw DomainError("kl_gaussian: dimension mismatch");
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(q.variance[i] > 0.0)) throw DomainError("kl_gaussian: q variance must be strictly positive");
    if (!(p.variance[i] > 0.0)) throw DomainError("kl_gaussian: p variance must be strictly positive");
    const double ratio = p.variance[i] / q.variance[i];
    const double diff = p.mean[i] - q.mean[i];
    // ratio - 1 - ln(ratio) loses everything to cancellation near ratio = 1.
    const double delta = ratio - 1.0;
    const double shape = std::abs(delta) < 1e-3
                             ? delta * delta * (0.5 - delta * (1.0 / 3.0 - delta * (0.25 - delta / 5.0)))
                             : delta - std::log(ratio);
    kl += 0.5 * shape + diff * diff / (2.0 * q.variance[i]);
  }
  return kl;
}

std::string_view to_string(TheoremId id) {
  switch (id) {
    case TheoremId::kT1:
      return "T1";
    case TheoremId::kT2:
      return "T2";
    case TheoremId::kT3:
      return "T3";
  }
  return "unknown";
}

std::string_view to_string(StartKind kind) {
  return kind == StartKind::kPosterior ? "post" : "em";
}

StartKind parse_start_kind(std::string_view name) {
  if (name == "post") return StartKind::kPosterior;
  if (name == "em") return StartKind::kEulerMaruyama;
  throw ConfigError("unknown start kind '" + std::string(name) + "'");
}

namespace {

std::vector<double> sorted_descending(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

double decades_spanned(const std::vector<double>& eps_desc) {
  return std::log10(eps_desc.front() / eps_desc.back());
}

}  // namespace

TheoremReport check_theorem1(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                             std::span<const double> epsilons) {
  TheoremReport report{TheoremId::kT1, {}, {}, {}, 0.0, false, {}};
  if (epsilons.empty()) throw ConfigError("drift-limit check needs at least one epsilon");
  const double T = s.horizon();
  const Vec mu = prior_mean(model, y);
  const Vec limit = sde_limit_drift(s, y, mu);
  report.tolerance = 1e-3 * (1.0 + limit.norm());
  report.params = sorted_descending(epsilons);

  for (double eps : report.params) {
    const double t = T - eps;
    const BridgeCoeffs k = coeffs(s, t);
    const Vec x = k.a * y + k.b * mu;
    const Vec x0_hat = posterior_mean(model, x, y, t, s);
    const Vec nonlinear = reverse_sde_nonlinear(s, x, t, x0_hat).value();
    report.observed.push_back((nonlinear - limit).norm());
  }

  // Non-increasing, allowing for rounding at the 1e-12 level.
  const double slack = 1e-12 * (1.0 + limit.norm());
  bool monotone = true;
  for (std::size_t i = 1; i < report.observed.size(); ++i) {
    monotone = monotone && report.observed[i] <= report.observed[i - 1] + slack;
  }
  report.pass = monotone && report.observed.back() < report.tolerance;
  std::ostringstream note;
  note << "limit norm " << limit.norm() << (monotone ? "; errors non-increasing" : "; errors NOT monotone");
  report.note = note.str();
  return report;
}

TheoremReport check_theorem2(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                             std::span<const double> epsilons, const Vec& x0, const Vec& z) {
  TheoremReport report{TheoremId::kT2, {}, {}, {}, 0.2, false, {}};
  if (epsilons.size() < 2) throw ConfigError("blow-up check needs at least two epsilons");
  const double T = s.horizon();
  report.params = sorted_descending(epsilons);

  for (double eps : report.params) {
    const double t = T - eps;
    const BridgeCoeffs k = coeffs(s, t);
    const Vec x = forward_sample(s, x0, y, t, z);
    const Vec x0_hat = posterior_mean(model, x, y, t, s);
    const Vec score = score_from_predictor(x0_hat, x, y, t, s);
    const double norm = pf_ode_drift(s, x, y, t, score).value().norm();
    report.observed.push_back(norm);
    report.secondary.push_back(norm * k.c);
  }

  const auto& norms = report.observed;
  const auto& products = report.secondary;
  if (z.norm() == 0.0) {
    // On the noiseless path the 1/c term cancels; nothing diverges.
    const double peak = *std::max_element(norms.begin(), norms.end());
    report.pass = peak <= 10.0 * (norms.front() + 1.0);
    report.note = "z = 0: measure-zero exception, drift stays bounded";
    return report;
  }

  bool increasing = true;
  for (std::size_t i = 1; i < norms.size(); ++i) increasing = increasing && norms[i] > norms[i - 1];
  const bool spans = decades_spanned(report.params) >= 4.0 - 1e-9;
  const bool grows = norms.back() > 10.0 * norms.front();

  const double eps_cut = report.params.back() * 100.0 * (1.0 + 1e-9);
  bool stable = true;
  for (std::size_t i = 0; i < products.size(); ++i) {
    if (report.params[i] <= eps_cut) {
      stable = stable && std::abs(products[i] / products.back() - 1.0) <= report.tolerance;
    }
  }
  report.pass = increasing && spans && grows && stable;
  std::ostringstream note;
  note << (increasing ? "increasing" : "NOT increasing") << "; growth x" << norms.back() / norms.front()
       << "; ||drift||*c -> " << products.back() << (stable ? " (stable)" : " (NOT stable)");
  if (!spans) note << "; sweep spans fewer than 4 decades";
  report.note = note.str();
  return report;
}

TheoremReport check_theorem2(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                             std::span<const double> epsilons, Rng& rng) {
  const Vec x0 = sample_x0(model, y, rng);
  const Vec z = rng.normal_vector(y.size());
  return check_theorem2(model, s, y, epsilons, x0, z);
}

GaussianSummary start_summary(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y, double tau,
                              StartKind kind) {
  const Vec x0_hat_T = prior_mean(model, y);
  const StartDistribution law = kind == StartKind::kPosterior ? posterior_start_distribution(x0_hat_T, y, tau, s)
                                                              : em_start_distribution(x0_hat_T, y, tau, s);
  return {law.mean, Vec::Constant(y.size(), law.variance)};
}

namespace {

void check_interior_tau(const BridgeSchedule& s, double tau) {
  if (!(tau > 0.0 && tau < s.horizon())) {
    std::ostringstream msg;
    msg << "tau = " << tau << " must lie strictly inside (0, T)";
    throw DomainError(msg.str());
  }
}

}  // namespace

double expected_kl(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y, double tau,
                   const GaussianSummary& start) {
  check_interior_tau(s, tau);
  const BridgeCoeffs k = coeffs(s, tau);
  const Vec mu = prior_mean(model, y);
  const Vec var = prior_variance(model, y);
  const double c2 = k.c2();
  // KL against N(a y + b X0, c^2) with the mean term averaged over X0:
  // E (a y + b X0 - m)^2 = (a y + b mu - m)^2 + b^2 var.
  const GaussianSummary truth_mean{k.a * y + k.b * mu, Vec::Constant(y.size(), c2)};
  const double spread = k.b * k.b * var.sum() / (2.0 * c2);
  return kl_gaussian(start, truth_mean) + spread;
}

double expected_kl_start(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y, double tau,
                         StartKind kind) {
  check_interior_tau(s, tau);
  return expected_kl(model, s, y, tau, start_summary(model, s, y, tau, kind));
}

double expected_kl_monte_carlo(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y, double tau,
                               const GaussianSummary& start, std::size_t draws, Rng& rng) {
  check_interior_tau(s, tau);
  if (draws == 0) throw ConfigError("Monte-Carlo estimate needs at least one draw");
  const BridgeCoeffs k = coeffs(s, tau);
  GaussianSummary truth{Vec(y.size()), Vec::Constant(y.size(), k.c2())};
  double total = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Vec x0 = sample_x0(model, y, rng);
    truth.mean = k.a * y + k.b * x0;
    total += kl_gaussian(start, truth);
  }
  return total / static_cast<double>(draws);
}

TheoremReport check_theorem3(const ConditionalModel& model, const BridgeSchedule& s, std::span<const Vec> ys,
                             std::span<const double> taus, const Theorem3Options& options, Rng& rng) {
  TheoremReport report{TheoremId::kT3, {}, {}, {}, 1e-12, true, {}};
  if (ys.empty() || taus.empty()) throw ConfigError("start comparison needs at least one tau and one condition");

  std::size_t pair = 0;
  double worst_mc = 0.0;
  bool strict_ok = true;
  bool order_ok = true;
  for (double tau : taus) {
    const BridgeCoeffs k = coeffs(s, tau);
    for (const Vec& y : ys) {
      const GaussianSummary post = start_summary(model, s, y, tau, StartKind::kPosterior);
      const GaussianSummary other = start_summary(model, s, y, tau, options.comparator);
      const double kl_post = expected_kl(model, s, y, tau, post);
      const double kl_other = expected_kl(model, s, y, tau, other);
      const double gap = kl_other - kl_post;
      const double slack = report.tolerance * (1.0 + kl_post);
      report.params.push_back(tau);
      report.observed.push_back(gap);
      order_ok = order_ok && gap >= -slack;

      const bool differs = std::abs(other.variance[0] - k.c2()) > 1e-12 * k.c2() ||
                           (other.mean - post.mean).norm() > 1e-12 * (1.0 + post.mean.norm());
      if (differs) strict_ok = strict_ok && gap > 0.0;

      double mc_err = 0.0;
      if (pair < options.mc_pairs && options.mc_draws > 0) {
        Rng stream = rng.split(pair);
        const double mc_post = expected_kl_monte_carlo(model, s, y, tau, post, options.mc_draws, stream);
        const double mc_other = expected_kl_monte_carlo(model, s, y, tau, other, options.mc_draws, stream);
        mc_err = std::max(std::abs(mc_post - kl_post) / kl_post, std::abs(mc_other - kl_other) / kl_other);
        worst_mc = std::max(worst_mc, mc_err);
      }
      report.secondary.push_back(mc_err);
      ++pair;
    }
  }

  const bool mc_ok = worst_mc <= options.mc_rel_tol;
  report.pass = order_ok && strict_ok && mc_ok;
  std::ostringstream note;
  if (options.comparator == StartKind::kPosterior) {
    note << "comparator is the posterior start itself; inequality holds with equality";
  } else {
    note << (order_ok ? "KL(post) <= KL(em) everywhere" : "KL(post) > KL(em) somewhere")
         << (strict_ok ? "" : "; strictness violated");
  }
  note << "; worst MC rel. error " << worst_mc;
  report.note = note.str();
  return report;
}

GaussianSummary optimal_gaussian_projection(const ConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                                            double tau) {
  check_interior_tau(s, tau);
  const Eigen::Index d = y.size();
  Vec mean = y;
  Vec log_var = Vec::Zero(d);

  auto objective = [&](const Vec& m, const Vec& lv) {
    return expected_kl(model, s, y, tau, {m, lv.array().exp().matrix()});
  };

  constexpr int kMaxSweeps = 500;
  constexpr double kStepTol = 1e-9;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double largest = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      // Mean coordinate.
      {
        const double h = 1e-4 * (1.0 + std::abs(mean[i]));
        Vec up = mean, down = mean;
        up[i] += h;
        down[i] -= h;
        const double f0 = objective(mean, log_var);
        const double fp = objective(up, log_var);
        const double fm = objective(down, log_var);
        const double grad = (fp - fm) / (2.0 * h);
        const double curv = (fp - 2.0 * f0 + fm) / (h * h);
        if (!(curv > 0.0)) throw ConvergenceError("projection objective is not convex in the mean");
        const double step = -grad / curv;
        mean[i] += step;
        largest = std::max(largest, std::abs(step));
      }
      // Log-variance coordinate, damped to at most one unit per step.
      {
        const double h = 1e-5;
        Vec up = log_var, down = log_var;
        up[i] += h;
        down[i] -= h;
        const double f0 = objective(mean, log_var);
        const double fp = objective(mean, up);
        const double fm = objective(mean, down);
        const double grad = (fp - fm) / (2.0 * h);
        const double curv = (fp - 2.0 * f0 + fm) / (h * h);
        if (!(curv > 0.0)) throw ConvergenceError("projection objective is not convex in the variance");
        const double step = std::clamp(-grad / curv, -1.0, 1.0);
        log_var[i] += step;
        largest = std::max(largest, std::abs(step));
      }
    }
    if (largest < kStepTol) return {mean, log_var.array().exp().matrix()};
  }
  std::ostringstream msg;
  msg << "optimal_gaussian_projection did not converge in " << kMaxSweeps << " sweeps";
  throw ConvergenceError(msg.str());
}

GaussianSummary gaussian_flow_oracle(const GaussianConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                                     const GaussianSummary& start, double tau, std::size_t steps) {
  check_interior_tau(s, tau);
  if (steps < 2) throw ConfigError("flow oracle needs at least two steps");
  const double T = s.horizon();
  const Vec mu = model.prior_mean(y);
  const Eigen::ArrayXd var0 = model.variance().array();
  const double alpha_T = s.alpha(T);
  const double rho2_T = s.rho2(T);

  // drift(x, t) = slope(t) * x + intercept(t), componentwise.
  auto coefficients = [&](double t, Eigen::ArrayXd& slope, Eigen::ArrayXd& intercept) {
    const BridgeCoeffs k = coeffs(s, t);
    const double f = s.drift_coef(t);
    const double g2 = s.diffusion_sq(t);
    const double alpha_t = s.alpha(t);
    const double pin = alpha_t * alpha_t * (rho2_T - s.rho2(t));
    const Eigen::ArrayXd marginal_var = k.c2() + k.b * k.b * var0;
    const Eigen::ArrayXd marginal_mean = (k.a * y + k.b * mu).array();
    slope = f + g2 / (2.0 * marginal_var) - g2 / pin;
    intercept = -g2 * marginal_mean / (2.0 * marginal_var) + g2 * (alpha_t / alpha_T) * y.array() / pin;
  };

  // State: mean and variance per dimension.
  auto rhs = [&](double t, const Eigen::ArrayXd& m, const Eigen::ArrayXd& v, Eigen::ArrayXd& dm,
                 Eigen::ArrayXd& dv) {
    Eigen::ArrayXd slope, intercept;
    coefficients(t, slope, intercept);
    dm = slope * m + intercept;
    dv = 2.0 * slope * v;
  };

  Eigen::ArrayXd m = start.mean.array();
  Eigen::ArrayXd v = start.variance.array();
  const double h = -tau / static_cast<double>(steps);
  Eigen::ArrayXd k1m, k1v, k2m, k2v, k3m, k3v, k4m, k4v;
  for (std::size_t i = 0; i + 1 < steps; ++i) {
    const double t = tau + static_cast<double>(i) * h;
    rhs(t, m, v, k1m, k1v);
    rhs(t + 0.5 * h, m + 0.5 * h * k1m, v + 0.5 * h * k1v, k2m, k2v);
    rhs(t + 0.5 * h, m + 0.5 * h * k2m, v + 0.5 * h * k2v, k3m, k3v);
    rhs(t + h, m + h * k3m, v + h * k3v, k4m, k4v);
    m += h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  const double t_last = tau + static_cast<double>(steps - 1) * h;
  rhs(t_last, m, v, k1m, k1v);
  m += (0.0 - t_last) * k1m;
  v += (0.0 - t_last) * k1v;
  return {m.matrix(), v.matrix()};
}

std::optional<double> fit_order(std::span<const double> step_sizes, std::span<const double> errors) {
  if (step_sizes.size() != errors.size() || step_sizes.size() < 2) return std::nullopt;
  const std::size_t n = errors.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(errors[i] > 0.0) || !(step_sizes[i] > 0.0)) return std::nullopt;
    lx[i] = std::log(step_sizes[i]);
    ly[i] = std::log(errors[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

ConvergenceResult convergence_order(FieldSolver solver, const DriftFn& field, const Vec& x_start, double t_start,
                                    double t_end, const Vec& exact_end, std::span<const std::size_t> grid_sizes) {
  ConvergenceResult result;
  for (std::size_t steps : grid_sizes) {
    if (steps == 0) throw ConfigError("grid sizes must be positive");
    const double h = (t_end - t_start) / static_cast<double>(steps);
    Vec x = x_start;
    for (std::size_t i = 0; i < steps; ++i) {
      const double t0 = t_start + static_cast<double>(i) * h;
      const double t1 = i + 1 == steps ? t_end : t0 + h;
      x = solver == FieldSolver::kHeun ? heun_step(field, x, t0, t1) : euler_step(field, x, t0, t1);
    }
    result.grid_sizes.push_back(steps);
    result.step_sizes.push_back(std::abs(h));
    result.errors.push_back((x - exact_end).norm());
  }
  result.order = fit_order(result.step_sizes, result.errors);
  return result;
}

namespace {

std::vector<double> uniform_knots(double end, std::size_t steps) {
  std::vector<double> knots(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) knots[i] = end * static_cast<double>(i) / static_cast<double>(steps);
  knots.back() = end;
  return knots;
}

ConvergenceResult ode_leg_convergence(const GaussianConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                                      std::span<const std::size_t> grid_sizes,
                                      const SamplerConvergenceOptions& options, Rng& rng) {
  const ConditionalModel wrapped = model;
  const double tau = options.tau;
  check_interior_tau(s, tau);
  const StartDistribution law = posterior_start_distribution(model.prior_mean(y), y, tau, s);

  std::vector<Vec> starts, references;
  for (std::size_t r = 0; r < options.runs; ++r) {
    Vec x_tau = law.mean + std::sqrt(law.variance) * rng.normal_vector(y.size());
    const GaussianSummary point{x_tau, Vec::Zero(y.size())};
    references.push_back(gaussian_flow_oracle(model, s, y, point, tau, options.reference_steps).mean);
    starts.push_back(std::move(x_tau));
  }

  ConvergenceResult result;
  for (std::size_t steps : grid_sizes) {
    if (steps < 1) throw ConfigError("grid sizes must be positive");
    const std::vector<double> knots = uniform_knots(tau, steps);
    double sq = 0.0;
    for (std::size_t r = 0; r < options.runs; ++r) {
      DataPredictor predictor = make_oracle_predictor(wrapped, s);
      const Vec x0 = pf_ode_leg(predictor, starts[r], y, knots, s);
      sq += (x0 - references[r]).squaredNorm();
    }
    result.grid_sizes.push_back(steps);
    result.step_sizes.push_back(tau / static_cast<double>(steps));
    result.errors.push_back(std::sqrt(sq / static_cast<double>(options.runs)));
  }
  result.order = fit_order(result.step_sizes, result.errors);
  return result;
}

ConvergenceResult em_sde_convergence(const GaussianConditionalModel& model, const BridgeSchedule& s, const Vec& y,
                                     std::span<const std::size_t> grid_sizes,
                                     const SamplerConvergenceOptions& options, Rng& rng) {
  const ConditionalModel wrapped = model;
  std::size_t common = 1;
  for (std::size_t steps : grid_sizes) {
    if (steps < 2) throw ConfigError("EM grid sizes must be >= 2");
    common = std::lcm(common, steps);
  }
  const std::size_t fine = common * ((options.reference_steps + common - 1) / common);
  const Eigen::Index d = y.size();
  const TimeGrid fine_grid = make_time_grid(s, fine);

  ConvergenceResult result;
  std::vector<double> sq(grid_sizes.size(), 0.0);
  for (std::size_t r = 0; r < options.runs; ++r) {
    // Column j - 1 holds the standard normal of fine interval [t_{j-1}, t_j].
    Eigen::MatrixXd z(d, static_cast<Eigen::Index>(fine));
    for (Eigen::Index j = 0; j < z.cols(); ++j) z.col(j) = rng.normal_vector(d);

    DataPredictor predictor = make_oracle_predictor(wrapped, s);
    const Vec reference =
        em_sde_integrate(predictor, y, fine_grid, s, [&](std::size_t n) -> Vec { return z.col(n - 1); }).x0;

    for (std::size_t g = 0; g < grid_sizes.size(); ++g) {
      const std::size_t steps = grid_sizes[g];
      const std::size_t block = fine / steps;
      const double scale = 1.0 / std::sqrt(static_cast<double>(block));
      const TimeGrid grid = make_time_grid(s, steps);
      auto coarse = [&](std::size_t n) -> Vec {
        const auto first = static_cast<Eigen::Index>((n - 1) * block);
        return scale * z.middleCols(first, static_cast<Eigen::Index>(block)).rowwise().sum();
      };
      const Vec x0 = em_sde_integrate(predictor, y, grid, s, coarse).x0;
      sq[g] += (x0 - reference).squaredNorm();
    }
  }
  for (std::size_t g = 0; g < grid_sizes.size(); ++g) {
    result.grid_sizes.push_back(grid_sizes[g]);
    result.step_sizes.push_back(s.horizon() / static_cast<double>(grid_sizes[g]));
    result.errors.push_back(std::sqrt(sq[g] / static_cast<double>(options.runs)));
  }
  result.order = fit_order(result.step_sizes, result.errors);
  return result;
}

}  // namespace

ConvergenceResult convergence_order(SamplerMethod family, const GaussianConditionalModel& model,
                                    const BridgeSchedule& s, const Vec& y, std::span<const std::size_t> grid_sizes,
                                    const SamplerConvergenceOptions& options, Rng& rng) {
  if (grid_sizes.empty()) throw ConfigError("convergence study needs grid sizes");
  if (options.runs == 0) throw ConfigError("convergence study needs at least one run");
  switch (family) {
    case SamplerMethod::kOdes3:
      return ode_leg_convergence(model, s, y, grid_sizes, options, rng);
    case SamplerMethod::kEmSde:
      return em_sde_convergence(model, s, y, grid_sizes, options, rng);
    default:
      throw ConfigError("convergence study supports odes3 and em_sde only");
  }
}

double wasserstein1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("wasserstein1_1d needs equal-length samples");
  if (a.empty()) return 0.0;
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) total += std::abs(sa[i] - sb[i]);
  return total / static_cast<double>(sa.size());
}

}  // namespace bridge
