#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "smclimits/commands.hpp"
#include "smclimits/config.hpp"
#include "smclimits/error.hpp"

using namespace smclimits;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("smc_limits_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const fs::path& dir, const std::string& text) {
  const auto path = dir / "config.json";
  std::ofstream(path) << text;
  return path.string();
}

int run(const std::string& cmd, const fs::path& dir, const std::string& config, std::string* err_text = nullptr) {
  CommandOptions opts;
  opts.config_path = config;
  opts.out_dir = dir.string();
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_command(cmd, opts, out, err);
  if (err_text != nullptr) {
    *err_text = err.str();
  }
  return code;
}

json fast_resampling_config(double tolerance) {
  auto j = default_config_json();
  j["verification"] = {{"tolerance", tolerance}, {"cases", 10},   {"instances", 10}, {"ess_vectors", 50},
                       {"w_M", 2000},           {"w_tolerance", 0.2}, {"seed", 3}};
  return j;
}

ErrorCode parse_code(const json& j) {
  try {
    (void)parse_config(j);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("default configuration parses") {
  const auto cfg = parse_config(default_config_json());
  CHECK(cfg.experiment.horizon == 4);
  CHECK(cfg.experiment.m_list == std::vector<std::size_t>{256, 1024, 4096, 16384});
  CHECK(cfg.experiment.policy.trigger.effective_kappa2() == 1.0);
  CHECK(cfg.obs_seed == 7u);
  CHECK(cfg.observations == json::array({0, 1, 1, 1, 1}));
  REQUIRE(cfg.clt.has_value());
  CHECK(cfg.clt->m == 4096);
}

TEST_CASE("schema violations are configuration errors") {
  auto j = default_config_json();
  j["policy"]["surprise"] = 1;
  CHECK(parse_code(j) == ErrorCode::kConfig);
  j = default_config_json();
  j["model"]["transition"] = json::array({json::array({0.5, 0.6}), json::array({0.2, 0.8})});
  CHECK(parse_code(j) == ErrorCode::kConfig);
  j = default_config_json();
  j["model"]["observations"] = json::array({0, 1, 1, 1, 1});
  CHECK(parse_code(j) == ErrorCode::kConfig);
  j = default_config_json();
  j["experiment"]["M_list"] = json::parse("[256]");
  CHECK_NOTHROW(parse_config(j));
  j["experiment"]["M_list"] = json::array({256, 128});
  CHECK(parse_code(j) == ErrorCode::kConfig);
  j = default_config_json();
  j["policy"]["kappa2"] = -2;
  CHECK(parse_code(j) == ErrorCode::kConfig);
}

TEST_CASE("kappa2 accepts inf") {
  CHECK(parse_kappa2(json("inf")) == std::numeric_limits<double>::infinity());
  CHECK(parse_kappa2(json(0.5)) == 0.5);
  CHECK_THROWS_AS(parse_kappa2(json("big")), Error);
  auto j = default_config_json();
  j["policy"]["kappa2"] = "inf";
  CHECK(parse_config(j).experiment.policy.trigger.effective_kappa2() == std::numeric_limits<double>::infinity());
}

TEST_CASE("seed override replaces every master seed") {
  auto cfg = parse_config(default_config_json());
  override_seed(cfg, 99);
  CHECK(cfg.experiment.seed == 99);
  CHECK(cfg.verification.seed == 99);
  CHECK(cfg.counterexample.seed == 99);
}

TEST_CASE("malformed and missing configs exit with code 2") {
  const auto dir = scratch("malformed");
  std::string err;
  CHECK(run("verify-lln", dir, write_config(dir, "{ not json"), &err) == kExitConfig);
  CHECK_FALSE(err.empty());
  CHECK(run("verify-lln", dir, (dir / "absent.json").string()) == kExitConfig);
  CHECK(run("verify-lln", dir, write_config(dir, R"({"model": {"type": "mystery"}})")) == kExitConfig);
  CHECK(run("no-such-command", dir, "") == kExitConfig);
}

TEST_CASE("verify-resampling passes and fails on tolerance") {
  const auto dir = scratch("resampling");
  CHECK(run("verify-resampling", dir, write_config(dir, fast_resampling_config(1e-12).dump())) == kExitPass);
  std::ifstream in(dir / "resampling_report.json");
  const auto report = json::parse(in);
  CHECK(report["pass"] == true);
  CHECK(report["command"] == "verify-resampling");
  CHECK(run("verify-resampling", dir, write_config(dir, fast_resampling_config(0.0).dump())) == kExitFail);
}

TEST_CASE("variance-table writes one row per step") {
  const auto dir = scratch("table");
  CHECK(run("variance-table", dir, "") == kExitPass);
  std::ifstream in(dir / "variance_table.json");
  const auto j = json::parse(in);
  REQUIRE(j["rows"].size() == 5);
  CHECK(j["rows"][0]["epsilon"].is_null());
  CHECK(j["rows"][2]["epsilon"] == 1);
  std::ifstream csv(dir / "variance_table.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) {
    ++lines;
  }
  CHECK(lines == 6);
}

TEST_CASE("variance-table rejects the linear-Gaussian model") {
  const auto dir = scratch("table_lg");
  const std::string cfg = R"({
    "model": {"type": "linear_gaussian", "phi": 0.9, "sigma_x": 1, "tau": 1, "horizon": 4, "obs_seed": 2},
    "proposal": "prior",
    "policy": {"scheme": "multinomial", "kappa2": 1},
    "experiment": {"functions": [{"type": "affine", "a": 1, "b": 0}], "M_list": [64, 256, 1024, 4096],
                   "replicates": 40}
  })";
  CHECK(run("variance-table", dir, write_config(dir, cfg)) == kExitConfig);
  CHECK(run("verify-lln", dir, write_config(dir, cfg)) == kExitPass);
  CHECK(fs::exists(dir / "lln_summary.json"));
  std::ifstream in(dir / "lln_replicates.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "m,replicate,estimate,scaled_error,final_ess,n_resamples");
}
