#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bridgesampler/oracle_models.hpp"
#include "bridgesampler/samplers.hpp"
#include "bridgesampler/schedule.hpp"
#include "bridgesampler/validation.hpp"

namespace bridge {

inline constexpr std::string_view kToolkitName = "bridgesampler";
inline constexpr std::string_view kToolkitVersion = "0.1.0";

struct SamplerSpec {
  SamplerMethod method = SamplerMethod::kOdes3;
  std::size_t steps = 20;
  GridSpacing spacing = GridSpacing::kUniform;
  double t_min = 0.0;
  std::uint64_t seed = 0;
  std::size_t runs = 1;
  bool record_trajectory = false;
};

struct ValidateSpec {
  std::vector<double> t1_epsilons;
  std::vector<double> t2_epsilons;
  std::uint64_t t2_seed = 0;
  std::vector<double> taus;
  std::vector<Vec> conditions;
  StartKind t3_comparator = StartKind::kEulerMaruyama;
  std::size_t mc_draws = 0;
  std::size_t mc_pairs = 0;
  std::uint64_t seed = 0;
};

struct CompareSpec {
  std::vector<SamplerMethod> methods;
  std::vector<std::size_t> steps;
  std::size_t runs = 0;
  std::size_t projections = 0;
};

struct ConvergeSpec {
  std::vector<SamplerMethod> methods;
  std::vector<std::size_t> grid_sizes;
  std::size_t runs = 0;
  double tau = 0.9;
  std::size_t reference_steps = 0;
};

// Fully validated experiment description. `canonical` is the merged JSON
// (defaults + file + overrides) that produced it.
struct ExperimentConfig {
  nlohmann::json canonical;
  BridgeSchedule schedule;
  ConditionalModel model;
  Vec condition;
  SamplerSpec sampler;
  ValidateSpec validate;
  CompareSpec compare;
  ConvergeSpec converge;
  unsigned threads = 1;
};

nlohmann::json default_config_json();

// Sets the leaf at a dotted path, e.g. "sampler.N=15". The value is parsed as
// JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& config, std::string_view assignment);

// Merges `user` onto the defaults, rejecting keys the defaults do not have.
nlohmann::json merge_config(const nlohmann::json& defaults, const nlohmann::json& user);

ExperimentConfig parse_config(const nlohmann::json& merged);

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides);

// FNV-1a over the canonical JSON dump.
std::uint64_t config_hash(const nlohmann::json& canonical);

// One CSV row shared by every report file.
struct ResultRow {
  std::string command;
  std::string method;
  std::optional<std::size_t> steps;
  std::optional<std::int64_t> nfe;
  std::optional<std::uint64_t> seed;
  std::string metric;
  double value = 0.0;
  std::optional<double> wall_time;
};

inline constexpr std::string_view kResultHeader = "command,method,N,nfe,seed,metric,value,wall_time_s";

std::string format_number(double value);
void write_result_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

struct RunOptions {
  std::filesystem::path out_dir = ".";
  // Wall-clock times vary between invocations; they are only written when asked.
  bool timing = false;
};

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfigError = 2 };

int cmd_validate(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);
int cmd_sample(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);
int cmd_compare(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);
int cmd_converge(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);

int run_command(std::string_view command, const ExperimentConfig& config, const RunOptions& options,
                std::ostream& log);

}  // namespace bridge
