#include <cmath>
#include <fstream>
#include <sstream>

#include "bridgesampler/errors.hpp"
#include "bridgesampler/experiment.hpp"

namespace bridge {

using nlohmann::json;

json default_config_json() {
  return json::parse(R"({
    "schedule": {"kind": "brownian_bridge", "T": 1.0, "sigma": 1.0, "beta_min": 0.1, "beta_max": 2.0},
    "model": {
      "kind": "gaussian",
      "mean": [0.0, 0.0],
      "mean_matrix": null,
      "variance": [0.5, 1.5],
      "weights": null,
      "means": null
    },
    "condition": [2.0, -1.0],
    "sampler": {
      "method": "odes3", "N": 20, "spacing": "uniform", "t_min": 0.0,
      "seed": 0, "runs": 100, "record_trajectory": false
    },
    "validate": {
      "t1_epsilons": [1e-2, 1e-3, 1e-4, 1e-5],
      "t2_epsilons": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
      "t2_seed": 7,
      "taus": [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95],
      "conditions": null,
      "random_conditions": 5,
      "t3_comparator": "em",
      "mc_draws": 1000000,
      "mc_pairs": 4,
      "seed": 1
    },
    "compare": {
      "methods": ["odes3", "em_sde", "em_start_heun", "deterministic_start_heun"],
      "N": [5, 10, 20, 40],
      "runs": 2000,
      "projections": 8
    },
    "converge": {
      "methods": ["odes3", "em_sde"],
      "grid_sizes": [8, 16, 32, 64],
      "runs": 32,
      "tau": 0.9,
      "reference_steps": 16384
    },
    "threads": 1
  })");
}

namespace {

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::size_t end = dot == std::string_view::npos ? path.size() : dot;
    if (end == start) throw ConfigError("empty segment in override path '" + std::string(path) + "'");
    parts.emplace_back(path.substr(start, end - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

void reject_unknown(const json& defaults, const json& user, const std::string& where) {
  for (const auto& [key, value] : user.items()) {
    if (!defaults.contains(key)) {
      throw ConfigError("unknown config key '" + where + key + "'");
    }
    const json& reference = defaults.at(key);
    if (reference.is_object()) {
      if (!value.is_object()) throw ConfigError("config key '" + where + key + "' must be an object");
      reject_unknown(reference, value, where + key + ".");
    }
  }
}

const json& field(const json& node, const char* key, const std::string& where) {
  if (!node.contains(key)) throw ConfigError("missing config key '" + where + key + "'");
  return node.at(key);
}

double number(const json& node, const char* key, const std::string& where) {
  const json& v = field(node, key, where);
  if (!v.is_number()) throw ConfigError("config key '" + where + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError("config key '" + where + key + "' must be finite");
  return x;
}

std::uint64_t count(const json& node, const char* key, const std::string& where) {
  const json& v = field(node, key, where);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError("config key '" + where + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string text(const json& node, const char* key, const std::string& where) {
  const json& v = field(node, key, where);
  if (!v.is_string()) throw ConfigError("config key '" + where + key + "' must be a string");
  return v.get<std::string>();
}

Vec vector_of(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) throw ConfigError(what + " must be a non-empty array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(what + " must contain numbers only");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

std::vector<double> doubles_of(const json& v, const std::string& what) {
  const Vec x = vector_of(v, what);
  return {x.data(), x.data() + x.size()};
}

std::vector<std::size_t> sizes_of(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) throw ConfigError(what + " must be a non-empty array of integers");
  std::vector<std::size_t> out;
  for (const auto& item : v) {
    if (!item.is_number_integer() || item.get<std::int64_t>() < 1) {
      throw ConfigError(what + " must contain positive integers");
    }
    out.push_back(item.get<std::size_t>());
  }
  return out;
}

std::vector<SamplerMethod> methods_of(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) throw ConfigError(what + " must be a non-empty array of method names");
  std::vector<SamplerMethod> out;
  for (const auto& item : v) {
    if (!item.is_string()) throw ConfigError(what + " must contain strings");
    out.push_back(parse_sampler_method(item.get<std::string>()));
  }
  return out;
}

Eigen::MatrixXd matrix_of(const json& v, Eigen::Index dim, const std::string& what) {
  if (v.is_null()) return Eigen::MatrixXd::Zero(dim, dim);
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != dim) {
    throw ConfigError(what + " must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " array");
  }
  Eigen::MatrixXd m(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    const Vec row = vector_of(v[static_cast<std::size_t>(r)], what);
    if (row.size() != dim) throw ConfigError(what + " rows must have length " + std::to_string(dim));
    m.row(r) = row.transpose();
  }
  return m;
}

BridgeSchedule parse_schedule(const json& node) {
  const std::string where = "schedule.";
  const ScheduleKind kind = parse_schedule_kind(text(node, "kind", where));
  const double T = number(node, "T", where);
  if (kind == ScheduleKind::kBrownianBridge) {
    return BridgeSchedule::brownian_bridge(number(node, "sigma", where), T);
  }
  return BridgeSchedule::variance_preserving(number(node, "beta_min", where), number(node, "beta_max", where), T);
}

ConditionalModel parse_model(const json& node) {
  const std::string where = "model.";
  const std::string kind = text(node, "kind", where);
  const Vec variance = vector_of(field(node, "variance", where), "model.variance");
  const Eigen::Index dim = variance.size();
  const Eigen::MatrixXd mean_matrix = matrix_of(field(node, "mean_matrix", where), dim, "model.mean_matrix");

  if (kind == "gaussian") {
    const Vec mean = vector_of(field(node, "mean", where), "model.mean");
    if (mean.size() != dim) throw ConfigError("model.mean and model.variance differ in length");
    return GaussianConditionalModel(mean_matrix, mean, variance);
  }
  if (kind == "mixture") {
    const Vec weights = vector_of(field(node, "weights", where), "model.weights");
    const json& means = field(node, "means", where);
    if (!means.is_array() || means.size() != static_cast<std::size_t>(weights.size())) {
      throw ConfigError("model.means needs one mean vector per weight");
    }
    std::vector<GaussianMixtureConditionalModel::Component> components;
    for (const auto& m : means) {
      const Vec offset = vector_of(m, "model.means[]");
      if (offset.size() != dim) throw ConfigError("model.means entries must match model.variance length");
      components.push_back({mean_matrix, offset});
    }
    return GaussianMixtureConditionalModel(weights, std::move(components), variance);
  }
  throw ConfigError("unknown model kind '" + kind + "' (expected gaussian or mixture)");
}

SamplerSpec parse_sampler(const json& node) {
  const std::string where = "sampler.";
  SamplerSpec spec;
  spec.method = parse_sampler_method(text(node, "method", where));
  spec.steps = count(node, "N", where);
  if (spec.steps < 2) throw ConfigError("sampler.N must be >= 2");
  spec.spacing = parse_grid_spacing(text(node, "spacing", where));
  spec.t_min = number(node, "t_min", where);
  spec.seed = count(node, "seed", where);
  spec.runs = count(node, "runs", where);
  if (spec.runs == 0) throw ConfigError("sampler.runs must be positive");
  const json& record = field(node, "record_trajectory", where);
  if (!record.is_boolean()) throw ConfigError("sampler.record_trajectory must be true or false");
  spec.record_trajectory = record.get<bool>();
  return spec;
}

ValidateSpec parse_validate(const json& node, const Vec& condition) {
  const std::string where = "validate.";
  ValidateSpec spec;
  spec.t1_epsilons = doubles_of(field(node, "t1_epsilons", where), "validate.t1_epsilons");
  spec.t2_epsilons = doubles_of(field(node, "t2_epsilons", where), "validate.t2_epsilons");
  if (spec.t2_epsilons.size() < 2) throw ConfigError("validate.t2_epsilons needs at least two values");
  spec.t2_seed = count(node, "t2_seed", where);
  spec.taus = doubles_of(field(node, "taus", where), "validate.taus");
  spec.t3_comparator = parse_start_kind(text(node, "t3_comparator", where));
  spec.mc_draws = count(node, "mc_draws", where);
  spec.mc_pairs = count(node, "mc_pairs", where);
  spec.seed = count(node, "seed", where);

  spec.conditions.push_back(condition);
  const json& explicit_conditions = field(node, "conditions", where);
  if (!explicit_conditions.is_null()) {
    if (!explicit_conditions.is_array()) throw ConfigError("validate.conditions must be an array of vectors");
    for (const auto& c : explicit_conditions) {
      Vec y = vector_of(c, "validate.conditions[]");
      if (y.size() != condition.size()) throw ConfigError("validate.conditions entries must match condition length");
      spec.conditions.push_back(std::move(y));
    }
  }
  const std::uint64_t extra = count(node, "random_conditions", where);
  Rng rng = Rng(spec.seed).split(0x5eed);
  for (std::uint64_t i = 0; i < extra; ++i) spec.conditions.push_back(condition + rng.normal_vector(condition.size()));
  return spec;
}

CompareSpec parse_compare(const json& node) {
  const std::string where = "compare.";
  CompareSpec spec;
  spec.methods = methods_of(field(node, "methods", where), "compare.methods");
  spec.steps = sizes_of(field(node, "N", where), "compare.N");
  for (std::size_t n : spec.steps) {
    if (n < 2) throw ConfigError("compare.N entries must be >= 2");
  }
  spec.runs = count(node, "runs", where);
  if (spec.runs < 2) throw ConfigError("compare.runs must be >= 2");
  spec.projections = count(node, "projections", where);
  return spec;
}

ConvergeSpec parse_converge(const json& node) {
  const std::string where = "converge.";
  ConvergeSpec spec;
  spec.methods = methods_of(field(node, "methods", where), "converge.methods");
  for (SamplerMethod m : spec.methods) {
    if (m != SamplerMethod::kOdes3 && m != SamplerMethod::kEmSde) {
      throw ConfigError("converge.methods supports odes3 and em_sde only");
    }
  }
  spec.grid_sizes = sizes_of(field(node, "grid_sizes", where), "converge.grid_sizes");
  for (std::size_t n : spec.grid_sizes) {
    if (n < 2) throw ConfigError("converge.grid_sizes entries must be >= 2");
  }
  spec.runs = count(node, "runs", where);
  if (spec.runs == 0) throw ConfigError("converge.runs must be positive");
  spec.tau = number(node, "tau", where);
  spec.reference_steps = count(node, "reference_steps", where);
  if (spec.reference_steps < 10'000) throw ConfigError("converge.reference_steps must be >= 10000");
  return spec;
}

}  // namespace

void apply_override(json& config, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' must look like key.path=value");
  }
  const std::vector<std::string> path = split_path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* node = &config;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object() || !node->contains(path[i])) {
      throw ConfigError("unknown config key in override '" + std::string(assignment) + "'");
    }
    node = &(*node)[path[i]];
  }
  if (!node->is_object() || !node->contains(path.back())) {
    throw ConfigError("unknown config key in override '" + std::string(assignment) + "'");
  }
  (*node)[path.back()] = std::move(value);
}

json merge_config(const json& defaults, const json& user) {
  if (!user.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(defaults, user, "");
  json merged = defaults;
  for (const auto& [key, value] : user.items()) {
    if (defaults.at(key).is_object()) {
      merged[key] = merge_config(defaults.at(key), value);
    } else {
      merged[key] = value;
    }
  }
  return merged;
}

ExperimentConfig parse_config(const json& merged) {
  reject_unknown(default_config_json(), merged, "");
  BridgeSchedule schedule = parse_schedule(field(merged, "schedule", ""));
  ConditionalModel model = parse_model(field(merged, "model", ""));
  Vec condition = vector_of(field(merged, "condition", ""), "condition");
  if (condition.size() != model_dim(model)) throw ConfigError("condition length must match the model dimension");

  const json& threads = field(merged, "threads", "");
  if (!threads.is_number_integer() || threads.get<std::int64_t>() < 1) {
    throw ConfigError("threads must be a positive integer");
  }

  SamplerSpec sampler = parse_sampler(field(merged, "sampler", ""));
  // Building the grid here surfaces bad N / t_min combinations before any work.
  (void)make_time_grid(schedule, sampler.steps, sampler.spacing, sampler.t_min);

  ValidateSpec validate = parse_validate(field(merged, "validate", ""), condition);
  for (double tau : validate.taus) {
    if (!(tau > 0.0 && tau < schedule.horizon())) throw ConfigError("validate.taus must lie inside (0, T)");
  }
  for (double eps : validate.t1_epsilons) {
    if (!(eps > 0.0 && eps < schedule.horizon())) throw ConfigError("validate.t1_epsilons must lie inside (0, T)");
  }
  for (double eps : validate.t2_epsilons) {
    if (!(eps > 0.0 && eps < schedule.horizon())) throw ConfigError("validate.t2_epsilons must lie inside (0, T)");
  }
  ConvergeSpec converge = parse_converge(field(merged, "converge", ""));
  if (!(converge.tau > 0.0 && converge.tau < schedule.horizon())) {
    throw ConfigError("converge.tau must lie inside (0, T)");
  }

  return ExperimentConfig{merged,
                          std::move(schedule),
                          std::move(model),
                          std::move(condition),
                          sampler,
                          std::move(validate),
                          parse_compare(field(merged, "compare", "")),
                          std::move(converge),
                          threads.get<unsigned>()};
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides) {
  json user = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file '" + path->string() + "'");
    try {
      user = json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      throw ConfigError("malformed config file '" + path->string() + "': " + e.what());
    }
  }
  json merged = merge_config(default_config_json(), user);
  for (const auto& assignment : overrides) apply_override(merged, assignment);
  try {
    return parse_config(merged);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
}

std::uint64_t config_hash(const json& canonical) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical.dump()) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace bridge
