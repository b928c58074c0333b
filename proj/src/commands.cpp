#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "bridgesampler/errors.hpp"
#include "bridgesampler/experiment.hpp"

namespace bridge {

using nlohmann::json;

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return out.str();
}

void write_result_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << kResultHeader << '\n';
  for (const auto& r : rows) {
    out << r.command << ',' << r.method << ',';
    if (r.steps) out << *r.steps;
    out << ',';
    if (r.nfe) out << *r.nfe;
    out << ',';
    if (r.seed) out << *r.seed;
    out << ',' << r.metric << ',' << format_number(r.value) << ',';
    if (r.wall_time) out << format_number(*r.wall_time);
    out << '\n';
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

void write_summary_json(const std::filesystem::path& dir, const ExperimentConfig& config, std::string_view command,
                        json extra) {
  json summary = {{"toolkit", std::string(kToolkitName)},
                  {"version", std::string(kToolkitVersion)},
                  {"command", std::string(command)},
                  {"config_hash", hex64(config_hash(config.canonical))},
                  {"config", config.canonical}};
  summary.update(extra);
  std::ofstream out(dir / "summary.json", std::ios::binary);
  out << summary.dump(2) << '\n';
}

// Short form for parameter tags inside metric names.
std::string tag(double value) {
  std::ostringstream out;
  out << std::setprecision(6) << value;
  return out.str();
}

std::string tagged(std::string_view name, double value) { return std::string(name) + "@" + tag(value); }

void add_theorem_rows(std::vector<ResultRow>& rows, const TheoremReport& report, std::uint64_t seed,
                      std::string_view primary, std::string_view secondary, bool pair_index) {
  const std::string method(to_string(report.id));
  for (std::size_t i = 0; i < report.params.size(); ++i) {
    std::string suffix = tag(report.params[i]);
    if (pair_index) suffix += "#" + std::to_string(i);
    rows.push_back({"validate", method, {}, {}, seed, std::string(primary) + "@" + suffix, report.observed[i], {}});
    if (!secondary.empty() && i < report.secondary.size()) {
      rows.push_back(
          {"validate", method, {}, {}, seed, std::string(secondary) + "@" + suffix, report.secondary[i], {}});
    }
  }
  rows.push_back({"validate", method, {}, {}, seed, "pass", report.pass ? 1.0 : 0.0, {}});
}

struct Verdict {
  std::string name;
  bool pass;
  std::string note;
};

// Optimal diagonal projection vs the posterior start, per tau.
Verdict projection_check(const ExperimentConfig& config, std::vector<ResultRow>& rows) {
  constexpr double kTol = 1e-8;
  double worst = 0.0;
  for (double tau : config.validate.taus) {
    const GaussianSummary best = optimal_gaussian_projection(config.model, config.schedule, config.condition, tau);
    const GaussianSummary post =
        start_summary(config.model, config.schedule, config.condition, tau, StartKind::kPosterior);
    const double mean_err = (best.mean - post.mean).cwiseAbs().maxCoeff();
    const double sd_err = (best.variance.cwiseSqrt() - post.variance.cwiseSqrt()).cwiseAbs().maxCoeff();
    rows.push_back({"validate", "projection", {}, {}, {}, tagged("mean_error", tau), mean_err, {}});
    rows.push_back({"validate", "projection", {}, {}, {}, tagged("sd_error", tau), sd_err, {}});
    worst = std::max({worst, mean_err, sd_err});
  }
  const bool pass = worst < kTol;
  rows.push_back({"validate", "projection", {}, {}, {}, "pass", pass ? 1.0 : 0.0, {}});
  std::ostringstream note;
  note << "worst deviation from the posterior start " << worst;
  return {"projection", pass, note.str()};
}

// The exact-score flow carries the true tau-marginal back onto q_data.
std::optional<Verdict> flow_exactness_check(const ExperimentConfig& config, std::vector<ResultRow>& rows) {
  const auto* gaussian = std::get_if<GaussianConditionalModel>(&config.model);
  if (gaussian == nullptr) return std::nullopt;
  constexpr double kTol = 1e-6;
  const Vec& y = config.condition;
  const Vec mu = gaussian->prior_mean(y);
  const Vec var = gaussian->prior_variance(y);
  double worst = 0.0;
  for (double tau : config.validate.taus) {
    const BridgeCoeffs k = coeffs(config.schedule, tau);
    const GaussianSummary marginal{k.a * y + k.b * mu, (k.c2() + k.b * k.b * var.array()).matrix()};
    const GaussianSummary out = gaussian_flow_oracle(*gaussian, config.schedule, y, marginal, tau);
    const double err = std::max((out.mean - mu).cwiseAbs().maxCoeff(),
                                ((out.variance - var).array() / var.array()).abs().maxCoeff());
    rows.push_back({"validate", "flow_exactness", {}, {}, {}, tagged("error", tau), err, {}});
    worst = std::max(worst, err);
  }
  const bool pass = worst < kTol;
  rows.push_back({"validate", "flow_exactness", {}, {}, {}, "pass", pass ? 1.0 : 0.0, {}});
  std::ostringstream note;
  note << "worst moment error " << worst;
  return Verdict{"flow_exactness", pass, note.str()};
}

SamplerConfig sampler_config(const ExperimentConfig& config, SamplerMethod method, std::size_t steps) {
  return SamplerConfig{method,
                       make_time_grid(config.schedule, steps, config.sampler.spacing, config.sampler.t_min),
                       config.sampler.record_trajectory, config.sampler.seed};
}

std::vector<double> column(const std::vector<Vec>& samples, Eigen::Index dim) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& x : samples) out.push_back(x[dim]);
  return out;
}

std::vector<double> projected(const std::vector<Vec>& samples, const Vec& direction) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& x : samples) out.push_back(direction.dot(x));
  return out;
}

}  // namespace

int cmd_validate(const ExperimentConfig& config, const RunOptions& options, std::ostream& log) {
  const ValidateSpec& v = config.validate;
  std::vector<ResultRow> rows;
  std::vector<Verdict> verdicts;

  const TheoremReport t1 = check_theorem1(config.model, config.schedule, config.condition, v.t1_epsilons);
  add_theorem_rows(rows, t1, v.seed, "error", "", false);
  verdicts.push_back({"T1", t1.pass, t1.note});

  Rng t2_rng(v.t2_seed);
  const TheoremReport t2 = check_theorem2(config.model, config.schedule, config.condition, v.t2_epsilons, t2_rng);
  add_theorem_rows(rows, t2, v.t2_seed, "drift_norm", "drift_norm_times_c", false);
  verdicts.push_back({"T2", t2.pass, t2.note});

  Theorem3Options t3_options;
  t3_options.comparator = v.t3_comparator;
  t3_options.mc_draws = v.mc_draws;
  t3_options.mc_pairs = v.mc_pairs;
  Rng t3_rng(v.seed);
  const TheoremReport t3 = check_theorem3(config.model, config.schedule, v.conditions, v.taus, t3_options, t3_rng);
  add_theorem_rows(rows, t3, v.seed, "kl_gap", "mc_rel_error", true);
  verdicts.push_back({"T3", t3.pass, t3.note});

  verdicts.push_back(projection_check(config, rows));
  if (auto flow = flow_exactness_check(config, rows)) verdicts.push_back(*flow);

  std::filesystem::create_directories(options.out_dir);
  write_result_csv(options.out_dir / "theorem_report.csv", rows);

  bool all_pass = true;
  std::ostringstream summary;
  json verdict_json = json::object();
  for (const auto& verdict : verdicts) {
    all_pass = all_pass && verdict.pass;
    summary << verdict.name << ' ' << (verdict.pass ? "PASS" : "FAIL") << "  " << verdict.note << '\n';
    verdict_json[verdict.name] = {{"pass", verdict.pass}, {"note", verdict.note}};
  }
  summary << (all_pass ? "all checks passed" : "some checks failed") << '\n';
  {
    std::ofstream out(options.out_dir / "summary.txt", std::ios::binary);
    out << summary.str();
  }
  write_summary_json(options.out_dir, config, "validate", {{"verdicts", verdict_json}, {"pass", all_pass}});
  log << summary.str();
  return all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_sample(const ExperimentConfig& config, const RunOptions& options, std::ostream& log) {
  const SamplerSpec& spec = config.sampler;
  const SamplerConfig sc = sampler_config(config, spec.method, spec.steps);
  const auto start = Clock::now();
  const std::vector<SampleRun> runs =
      sample_batch(sc, config.model, config.schedule, config.condition, spec.runs, config.threads);
  const double wall = seconds_since(start);

  const Eigen::Index dim = model_dim(config.model);
  std::filesystem::create_directories(options.out_dir);
  {
    std::ofstream out(options.out_dir / "samples.csv", std::ios::binary);
    out << "run,dim";
    for (Eigen::Index j = 0; j < dim; ++j) out << ",x0_" << j;
    out << ",nfe\n";
    for (std::size_t r = 0; r < runs.size(); ++r) {
      out << r << ',' << dim;
      for (Eigen::Index j = 0; j < dim; ++j) out << ',' << format_number(runs[r].x0[j]);
      out << ',' << runs[r].nfe << '\n';
    }
  }
  if (spec.record_trajectory) {
    std::ofstream out(options.out_dir / "trajectories.csv", std::ios::binary);
    out << "run,step,t";
    for (Eigen::Index j = 0; j < dim; ++j) out << ",x_" << j;
    out << '\n';
    for (std::size_t r = 0; r < runs.size(); ++r) {
      for (std::size_t k = 0; k < runs[r].trajectory.size(); ++k) {
        const TrajectoryPoint& p = runs[r].trajectory[k];
        out << r << ',' << k << ',' << format_number(p.t);
        for (Eigen::Index j = 0; j < dim; ++j) out << ',' << format_number(p.x[j]);
        out << '\n';
      }
    }
  }
  json extra = {{"method", std::string(to_string(spec.method))},
                {"N", spec.steps},
                {"runs", spec.runs},
                {"nfe_per_run", expected_nfe(spec.method, spec.steps)}};
  if (options.timing) extra["wall_time_s"] = wall;
  write_summary_json(options.out_dir, config, "sample", extra);
  log << "sampled " << runs.size() << " runs with " << to_string(spec.method) << " (N=" << spec.steps
      << ", nfe=" << expected_nfe(spec.method, spec.steps) << ")\n";
  return kExitOk;
}

int cmd_compare(const ExperimentConfig& config, const RunOptions& options, std::ostream& log) {
  const CompareSpec& spec = config.compare;
  const Vec& y = config.condition;
  const Eigen::Index dim = model_dim(config.model);
  const Vec target_mean = prior_mean(config.model, y);
  const Vec target_var = prior_variance(config.model, y);

  // Reference draws from q_data and projection directions are shared by every method.
  Rng reference_rng = Rng(config.sampler.seed).split(0xc0ffee);
  std::vector<Vec> reference(spec.runs);
  for (auto& x : reference) x = sample_x0(config.model, y, reference_rng);
  std::vector<Vec> directions(spec.projections);
  for (auto& d : directions) {
    d = reference_rng.normal_vector(dim);
    d /= d.norm();
  }

  std::vector<ResultRow> rows;
  for (SamplerMethod method : spec.methods) {
    const std::string name(to_string(method));
    for (std::size_t steps : spec.steps) {
      const SamplerConfig sc = sampler_config(config, method, steps);
      const auto start = Clock::now();
      const std::vector<SampleRun> runs = sample_batch(sc, config.model, config.schedule, y, spec.runs, config.threads);
      const std::optional<double> wall =
          options.timing ? std::optional<double>(seconds_since(start)) : std::nullopt;

      std::vector<Vec> samples;
      samples.reserve(runs.size());
      for (const auto& r : runs) samples.push_back(r.x0);
      const double n = static_cast<double>(samples.size());
      Vec mean = Vec::Zero(dim);
      for (const auto& x : samples) mean += x;
      mean /= n;
      Vec var = Vec::Zero(dim);
      for (const auto& x : samples) var += (x - mean).cwiseAbs2();
      var /= n - 1.0;

      double w1 = 0.0;
      for (Eigen::Index j = 0; j < dim; ++j) w1 += wasserstein1_1d(column(samples, j), column(reference, j));
      w1 /= static_cast<double>(dim);
      double w1_projected = 0.0;
      for (const auto& d : directions) w1_projected += wasserstein1_1d(projected(samples, d), projected(reference, d));
      if (!directions.empty()) w1_projected /= static_cast<double>(directions.size());

      const std::int64_t nfe = runs.front().nfe;
      auto row = [&](std::string metric, double value) {
        rows.push_back({"compare", name, steps, nfe, config.sampler.seed, std::move(metric), value, wall});
      };
      row("mean_error", (mean - target_mean).cwiseAbs().maxCoeff());
      row("variance_error", (var - target_var).cwiseAbs().maxCoeff());
      row("w1", w1);
      if (!directions.empty()) row("w1_projected", w1_projected);
      log << name << " N=" << steps << " nfe=" << nfe << " w1=" << w1 << '\n';
    }
  }
  std::filesystem::create_directories(options.out_dir);
  write_result_csv(options.out_dir / "comparison.csv", rows);
  write_summary_json(options.out_dir, config, "compare", json::object());
  return kExitOk;
}

int cmd_converge(const ExperimentConfig& config, const RunOptions& options, std::ostream& log) {
  const auto* gaussian = std::get_if<GaussianConditionalModel>(&config.model);
  if (gaussian == nullptr) throw ConfigError("converge needs a gaussian model (the reference flow is Gaussian-only)");
  const ConvergeSpec& spec = config.converge;
  SamplerConvergenceOptions conv{spec.tau, spec.runs, spec.reference_steps};

  std::vector<ResultRow> rows;
  json orders = json::object();
  for (SamplerMethod method : spec.methods) {
    const std::string name(to_string(method));
    Rng rng = Rng(config.sampler.seed).split(static_cast<std::uint64_t>(method));
    const auto start = Clock::now();
    const ConvergenceResult result =
        convergence_order(method, *gaussian, config.schedule, config.condition, spec.grid_sizes, conv, rng);
    const std::optional<double> wall = options.timing ? std::optional<double>(seconds_since(start)) : std::nullopt;
    for (std::size_t i = 0; i < result.grid_sizes.size(); ++i) {
      rows.push_back({"converge", name, result.grid_sizes[i], {}, config.sampler.seed, "error", result.errors[i], wall});
      rows.push_back(
          {"converge", name, result.grid_sizes[i], {}, config.sampler.seed, "step_size", result.step_sizes[i], wall});
    }
    const double order = result.order.value_or(std::nan(""));
    rows.push_back({"converge", name, {}, {}, config.sampler.seed, "order", order, wall});
    orders[name] = result.order ? json(order) : json(nullptr);
    log << name << " fitted order " << format_number(order) << '\n';
  }
  std::filesystem::create_directories(options.out_dir);
  write_result_csv(options.out_dir / "convergence.csv", rows);
  write_summary_json(options.out_dir, config, "converge", {{"orders", orders}});
  return kExitOk;
}

int run_command(std::string_view command, const ExperimentConfig& config, const RunOptions& options,
                std::ostream& log) {
  if (command == "validate") return cmd_validate(config, options, log);
  if (command == "sample") return cmd_sample(config, options, log);
  if (command == "compare") return cmd_compare(config, options, log);
  if (command == "converge") return cmd_converge(config, options, log);
  throw ConfigError("unknown command '" + std::string(command) + "'");
}

}  // namespace bridge
