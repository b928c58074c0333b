#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "bridgesampler/errors.hpp"
#include "bridgesampler/experiment.hpp"

namespace bridge {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("bridgesampler_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

ExperimentConfig quick(std::vector<std::string> overrides = {}) {
  overrides.push_back("validate.mc_draws=200000");
  overrides.push_back("validate.mc_pairs=1");
  overrides.push_back("compare.runs=200");
  overrides.push_back("compare.N=[5,10]");
  overrides.push_back("converge.runs=4");
  overrides.push_back("converge.reference_steps=10240");
  return load_config(std::nullopt, overrides);
}

TEST(Config, DefaultsParse) {
  const ExperimentConfig c = load_config(std::nullopt, {});
  EXPECT_EQ(c.schedule.kind(), ScheduleKind::kBrownianBridge);
  EXPECT_EQ(c.condition.size(), 2);
  EXPECT_EQ(c.sampler.steps, 20U);
  EXPECT_EQ(c.validate.taus.size(), 10U);
  EXPECT_EQ(c.validate.conditions.size(), 6U);
  EXPECT_EQ(c.compare.methods.size(), 4U);
}

TEST(Config, OverridesReachLeaves) {
  const ExperimentConfig c = load_config(
      std::nullopt, {"sampler.N=15", "sampler.method=em_sde", "schedule.kind=variance_preserving", "threads=2"});
  EXPECT_EQ(c.sampler.steps, 15U);
  EXPECT_EQ(c.sampler.method, SamplerMethod::kEmSde);
  EXPECT_EQ(c.schedule.kind(), ScheduleKind::kVariancePreserving);
  EXPECT_EQ(c.threads, 2U);
  EXPECT_EQ(c.canonical["sampler"]["N"], 15);
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(load_config(std::nullopt, {"sampler.bogus=1"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"nothing=1"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"sampler.N"}), ConfigError);
  EXPECT_THROW(merge_config(default_config_json(), json{{"model", {{"extra", 1}}}}), ConfigError);
  EXPECT_THROW(merge_config(default_config_json(), json{{"sampler", 3}}), ConfigError);
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(load_config(std::nullopt, {"sampler.N=1"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"sampler.N=\"ten\""}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"sampler.method=ddim"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"condition=[1,2,3]"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"model.variance=[1,-1]"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"schedule.sigma=0"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"validate.taus=[0.5,1.0]"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"converge.methods=[\"em_start_heun\"]"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"threads=0"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"sampler.t_min=0.5"}), ConfigError);
}

TEST(Config, MixtureModel) {
  const ExperimentConfig c = load_config(
      std::nullopt, {"model.kind=mixture", "model.weights=[0.25,0.75]", "model.means=[[0,0],[1,1]]"});
  ASSERT_TRUE(std::holds_alternative<GaussianMixtureConditionalModel>(c.model));
  EXPECT_THROW(load_config(std::nullopt, {"model.kind=mixture", "model.weights=[1.0]", "model.means=[[0,0],[1,1]]"}),
               ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"model.kind=student"}), ConfigError);
}

TEST(Config, FilesAndMalformedInput) {
  TempDir dir;
  const fs::path good = dir.path() / "good.json";
  std::ofstream(good) << R"({"sampler": {"N": 12}, "condition": [0.5, 0.5]})";
  const ExperimentConfig c = load_config(good, {"sampler.N=14"});
  EXPECT_EQ(c.sampler.steps, 14U);
  EXPECT_DOUBLE_EQ(c.condition[0], 0.5);

  const fs::path bad = dir.path() / "bad.json";
  std::ofstream(bad) << R"({"sampler": {"N": 12,})";
  EXPECT_THROW(load_config(bad, {}), ConfigError);
  EXPECT_THROW(load_config(dir.path() / "missing.json", {}), ConfigError);
}

TEST(Config, HashTracksContent) {
  const json a = load_config(std::nullopt, {}).canonical;
  const json b = load_config(std::nullopt, {"sampler.seed=1"}).canonical;
  EXPECT_EQ(config_hash(a), config_hash(load_config(std::nullopt, {}).canonical));
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Csv, NumbersRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.123}) EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(Commands, SampleReportsNfeAndIsReproducible) {
  TempDir a, b;
  std::ostringstream log;
  const ExperimentConfig c = quick({"sampler.runs=7"});
  ASSERT_EQ(cmd_sample(c, {a.path()}, log), kExitOk);
  ASSERT_EQ(cmd_sample(c, {b.path()}, log), kExitOk);
  EXPECT_EQ(slurp(a.path() / "samples.csv"), slurp(b.path() / "samples.csv"));
  EXPECT_EQ(slurp(a.path() / "summary.json"), slurp(b.path() / "summary.json"));

  const auto rows = lines(a.path() / "samples.csv");
  ASSERT_EQ(rows.size(), 8U);
  EXPECT_EQ(rows[0], "run,dim,x0_0,x0_1,nfe");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(split(rows[i]).back(), "38");

  const json summary = json::parse(slurp(a.path() / "summary.json"));
  EXPECT_EQ(summary["version"], std::string(kToolkitVersion));
  EXPECT_EQ(summary["nfe_per_run"], 38);
  EXPECT_FALSE(summary.contains("wall_time_s"));
}

TEST(Commands, DeterministicStartRowsAreIdentical) {
  TempDir dir;
  std::ostringstream log;
  ASSERT_EQ(cmd_sample(quick({"sampler.method=deterministic_start_heun", "sampler.runs=100"}), {dir.path()}, log),
            kExitOk);
  const auto rows = lines(dir.path() / "samples.csv");
  ASSERT_EQ(rows.size(), 101U);
  auto payload = [](const std::string& row) { return row.substr(row.find(',') + 1); };
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_EQ(payload(rows[i]), payload(rows[1]));
}

TEST(Commands, TrajectoryDump) {
  TempDir dir;
  std::ostringstream log;
  ASSERT_EQ(cmd_sample(quick({"sampler.runs=2", "sampler.N=5", "sampler.record_trajectory=true"}), {dir.path()}, log),
            kExitOk);
  const auto rows = lines(dir.path() / "trajectories.csv");
  EXPECT_EQ(rows[0], "run,step,t,x_0,x_1");
  EXPECT_EQ(rows.size(), 1U + 2U * 6U);
}

TEST(Commands, ValidatePassesOnDefaults) {
  TempDir dir;
  std::ostringstream log;
  EXPECT_EQ(cmd_validate(quick(), {dir.path()}, log), kExitOk) << log.str();
  const auto rows = lines(dir.path() / "theorem_report.csv");
  EXPECT_EQ(rows[0], std::string(kResultHeader));
  int verdicts = 0;
  for (const auto& r : rows) {
    const auto cells = split(r);
    if (cells.size() > 6 && cells[5] == "pass") {
      ++verdicts;
      EXPECT_EQ(cells[6], "1") << r;
    }
  }
  EXPECT_EQ(verdicts, 5);
  EXPECT_TRUE(fs::exists(dir.path() / "summary.txt"));
}

TEST(Commands, ValidateWithPosteriorComparatorNotes) {
  TempDir dir;
  std::ostringstream log;
  EXPECT_EQ(cmd_validate(quick({"validate.t3_comparator=post"}), {dir.path()}, log), kExitOk);
  EXPECT_NE(slurp(dir.path() / "summary.txt").find("equality"), std::string::npos);
}

TEST(Commands, ValidateFailsOnTooShortSweep) {
  TempDir dir;
  std::ostringstream log;
  EXPECT_EQ(cmd_validate(quick({"validate.t2_epsilons=[0.01,0.001]"}), {dir.path()}, log), kExitCheckFailed);
}

TEST(Commands, CompareShowsVarianceCollapse) {
  TempDir dir;
  std::ostringstream log;
  ASSERT_EQ(cmd_compare(quick(), {dir.path()}, log), kExitOk);
  const auto rows = lines(dir.path() / "comparison.csv");
  bool seen = false;
  for (const auto& r : rows) {
    const auto cells = split(r);
    if (cells[1] == "deterministic_start_heun" && cells[5] == "variance_error") {
      EXPECT_NEAR(std::stod(cells[6]), 1.5, 1e-9);
      seen = true;
    }
    if (cells[1] == "odes3" && cells[5] == "mean_error") EXPECT_EQ(cells[3], cells[2] == "5" ? "8" : "18");
  }
  EXPECT_TRUE(seen);
}

TEST(Commands, ConvergeWritesOrders) {
  TempDir dir;
  std::ostringstream log;
  ASSERT_EQ(cmd_converge(quick(), {dir.path()}, log), kExitOk);
  const json summary = json::parse(slurp(dir.path() / "summary.json"));
  EXPECT_TRUE(summary["orders"].contains("odes3"));
  EXPECT_TRUE(summary["orders"].contains("em_sde"));
  EXPECT_THROW(cmd_converge(quick({"model.kind=mixture", "model.weights=[0.5,0.5]", "model.means=[[0,0],[1,1]]"}),
                            {dir.path()}, log),
               ConfigError);
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(BRIDGESAMPLER_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodesAndNoFilesOnConfigError) {
  TempDir dir;
  const fs::path bad = dir.path() / "bad.json";
  std::ofstream(bad) << "{ not json";
  const fs::path out = dir.path() / "out";
  EXPECT_EQ(run_cli("sample --config " + bad.string() + " --out " + out.string()), kExitConfigError);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(run_cli("sample --set sampler.nope=1 --out " + out.string()), kExitConfigError);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(run_cli("frobnicate"), kExitConfigError);
  EXPECT_EQ(run_cli("sample --set sampler.runs=3 --out " + out.string()), kExitOk);
  EXPECT_TRUE(fs::exists(out / "samples.csv"));
}

TEST(Cli, ByteIdenticalOutputs) {
  TempDir dir;
  const std::string args = " --set sampler.runs=20 --set sampler.method=em_start_heun";
  ASSERT_EQ(run_cli("sample --out " + (dir.path() / "a").string() + args + " --set threads=3"), kExitOk);
  ASSERT_EQ(run_cli("sample --out " + (dir.path() / "b").string() + args), kExitOk);
  EXPECT_EQ(slurp(dir.path() / "a" / "samples.csv"), slurp(dir.path() / "b" / "samples.csv"));
}

}  // namespace
}  // namespace bridge
