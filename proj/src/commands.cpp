#include "smclimits/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "smclimits/config.hpp"
#include "smclimits/error.hpp"
#include "smclimits/variance_oracle.hpp"
#include "smclimits/verification.hpp"

namespace smclimits {

namespace {

using nlohmann::json;

struct Context {
  AppConfig config;
  std::filesystem::path out_dir;
  std::ostream& out;
};

json kappa_json(double k2) { return std::isinf(k2) ? json("inf") : json(k2); }

json base_summary(const std::string& command, const AppConfig& config) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["config_hash"] = config_hash(config.experiment);
  j["observations"] = config.observations;
  j["obs_seed"] = config.obs_seed ? json(*config.obs_seed) : json(nullptr);
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot write " + path.string());
  }
  f << text;
  if (!f) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string replicates_csv(const ExperimentReport& report) {
  std::string csv = "m,replicate,estimate,scaled_error,final_ess,n_resamples\n";
  for (const auto& row : report.rows) {
    csv += fmt::format("{},{},{},{},{},{}\n", row.m, row.replicate, row.estimates.at(0), row.scaled_errors.at(0),
                       row.final_ess, row.n_resamples);
  }
  return csv;
}

json aggregates_json(const ExperimentReport& report) {
  json arr = json::array();
  for (const auto& a : report.aggregates) {
    arr.push_back({{"m", a.m},
                   {"rmse", a.rmse},
                   {"median_final_max_weight_fraction", a.median_final_max_weight_fraction},
                   {"mean_final_ess", a.mean_final_ess},
                   {"mean_resamples", a.mean_resamples},
                   {"mean_step_cv2", a.mean_step_cv2},
                   {"resample_frequency", a.resample_frequency}});
  }
  return arr;
}

json function_labels(const ExperimentConfig& e) {
  json arr = json::array();
  for (const auto& f : e.functions) {
    arr.push_back(f.label());
  }
  return arr;
}

int verify_resampling(Context& ctx) {
  const auto& v = ctx.config.verification;
  const auto unbiased = unbiasedness_suite(v.cases, v.seed, v.tolerance);
  const auto order = variance_order_suite(v.instances, v.seed, v.tolerance);
  const auto identity = ess_identity_suite(v.ess_vectors, v.seed, v.ess_tolerance);
  const auto w = w_ell_phi_suite(v.w_m, v.w_tolerance);
  const bool pass = unbiased.pass && order.pass && identity.pass && w.pass;

  json j = base_summary("verify-resampling", ctx.config);
  j["seed"] = v.seed;
  j["unbiasedness"] = {{"checks", unbiased.checks},
                       {"max_abs_error", unbiased.max_abs_error},
                       {"tolerance", v.tolerance},
                       {"pass", unbiased.pass}};
  j["variance_order"] = {{"instances", order.instances},
                         {"min_slack", order.min_slack},
                         {"tolerance", v.tolerance},
                         {"pass", order.pass}};
  j["ess_identity"] = {{"vectors", identity.vectors},
                       {"max_rel_error", identity.max_rel_error},
                       {"extremes_exact", identity.extremes_exact},
                       {"tolerance", v.ess_tolerance},
                       {"pass", identity.pass}};
  json rows = json::array();
  for (const auto& r : w.rows) {
    rows.push_back({{"ell", r.ell}, {"scaled_variance", r.scaled_variance}, {"limit", r.limit}, {"rel_error", r.rel_error}});
  }
  j["w_ell_phi"] = {{"M", w.m}, {"rows", rows}, {"tolerance", v.w_tolerance}, {"pass", w.pass}};
  j["pass"] = pass;
  write_json(ctx.out_dir / "resampling_report.json", j);

  ctx.out << fmt::format("unbiasedness      {:4}  max |error| = {:.3e} over {} checks\n", unbiased.pass ? "PASS" : "FAIL",
                         unbiased.max_abs_error, unbiased.checks);
  ctx.out << fmt::format("variance order    {:4}  min slack = {:.3e}\n", order.pass ? "PASS" : "FAIL", order.min_slack);
  ctx.out << fmt::format("ess identity      {:4}  max rel error = {:.3e}, extremes exact = {}\n",
                         identity.pass ? "PASS" : "FAIL", identity.max_rel_error, identity.extremes_exact);
  for (const auto& r : w.rows) {
    ctx.out << fmt::format("W[ell,Phi] ell={:<4} {:4}  scaled var = {:.6f}, limit = {:.6f}, rel = {:.2e}\n", r.ell,
                           r.rel_error <= v.w_tolerance ? "PASS" : "FAIL", r.scaled_variance, r.limit, r.rel_error);
  }
  return pass ? kExitPass : kExitFail;
}

int verify_lln(Context& ctx) {
  const auto& e = ctx.config.experiment;
  const ExperimentReport report = run_replicates(e);
  write_text(ctx.out_dir / "lln_replicates.csv", replicates_csv(report));
  bool pass = true;
  json checks = json::array();
  for (std::size_t i = 0; i < e.functions.size(); ++i) {
    const auto r = lln_check(report, i);
    pass = pass && r.pass;
    checks.push_back({{"function", e.functions[i].label()},
                      {"slope", r.slope},
                      {"max_weight_decreasing", r.max_weight_decreasing},
                      {"pass", r.pass}});
    ctx.out << fmt::format("{:<20} {:4}  slope = {:.4f}, max-weight fraction decreasing = {}\n", e.functions[i].label(),
                           r.pass ? "PASS" : "FAIL", r.slope, r.max_weight_decreasing);
  }
  json j = base_summary("verify-lln", ctx.config);
  j["seed"] = e.seed;
  j["functions"] = function_labels(e);
  j["truths"] = report.truths;
  j["aggregates"] = aggregates_json(report);
  j["checks"] = checks;
  j["pass"] = pass;
  write_json(ctx.out_dir / "lln_summary.json", j);
  return pass ? kExitPass : kExitFail;
}

const DiscreteHMM& require_discrete(const ExperimentConfig& e, const char* command) {
  const auto* hmm = std::get_if<DiscreteHMM>(&e.model);
  if (hmm == nullptr) {
    throw Error(ErrorCode::kConfig, std::string(command) + " needs the exact variance oracle, which covers discrete HMMs only");
  }
  return *hmm;
}

void require_oracle_policy(const ExperimentConfig& e, const char* command) {
  if (e.policy.scheme != ResamplingScheme::kMultinomial) {
    throw Error(ErrorCode::kConfig, std::string(command) + ": the variance oracle covers multinomial resampling only");
  }
  if (e.policy.size.absolute != 0 || e.policy.size.ratio != 1.0) {
    throw Error(ErrorCode::kConfig, std::string(command) + ": the variance oracle assumes ell = 1");
  }
}

int verify_clt(Context& ctx) {
  ExperimentConfig e = ctx.config.experiment;
  const DiscreteHMM& hmm = require_discrete(e, "verify-clt");
  require_oracle_policy(e, "verify-clt");
  if (ctx.config.clt) {
    e.m_list = {ctx.config.clt->m};
    e.replicates = ctx.config.clt->replicates;
  } else {
    e.m_list = {e.m_list.back()};
  }
  const double k2 = e.policy.trigger.effective_kappa2();
  const auto state = run_recursion(hmm.truncated(e.horizon), e.proposal, k2, e.horizon);
  const ExperimentReport report = run_replicates(e);
  write_text(ctx.out_dir / "clt_replicates.csv", replicates_csv(report));

  bool pass = true;
  json checks = json::array();
  for (std::size_t i = 0; i < e.functions.size(); ++i) {
    const double s2 = sigma2(state, e.functions[i].on_paths());
    const auto r = clt_check(report.scaled_errors(e.m_list[0], i), s2);
    pass = pass && r.pass;
    checks.push_back({{"function", e.functions[i].label()},
                      {"truth", report.truths[i]},
                      {"sigma2", s2},
                      {"var_ratio", r.var_ratio},
                      {"ks_stat", r.ks_stat},
                      {"ks_p", r.ks_p},
                      {"degenerate_oracle", r.degenerate_oracle},
                      {"pass", r.pass}});
    ctx.out << fmt::format("{:<20} {:4}  sigma2 = {:.6f}, var ratio = {:.4f}, KS D = {:.4f}, p = {:.4f}\n",
                           e.functions[i].label(), r.pass ? "PASS" : "FAIL", s2, r.var_ratio, r.ks_stat, r.ks_p);
  }
  json j = base_summary("verify-clt", ctx.config);
  j["seed"] = e.seed;
  j["M"] = e.m_list[0];
  j["replicates"] = e.replicates;
  j["kappa2"] = kappa_json(k2);
  j["epsilons"] = state.epsilons();
  j["aggregates"] = aggregates_json(report);
  j["checks"] = checks;
  j["pass"] = pass;
  write_json(ctx.out_dir / "clt_summary.json", j);
  return pass ? kExitPass : kExitFail;
}

int counterexample(Context& ctx, std::size_t workers) {
  const auto& c = ctx.config.counterexample;
  const auto r = counterexample_run(c.m, c.replicates, c.seed, workers);
  std::string csv = "replicate,t_m\n";
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    csv += fmt::format("{},{}\n", i, r.values[i]);
  }
  write_text(ctx.out_dir / "counterexample.csv", csv);

  // Histogram on [0.5, 1.5] with bins of width 0.05.
  constexpr int kBins = 20;
  std::vector<std::size_t> bins(kBins, 0);
  std::size_t outside = 0;
  for (double v : r.values) {
    const int b = static_cast<int>(std::floor((v - 0.5) / 0.05));
    if (b < 0 || b >= kBins) {
      ++outside;
    } else {
      ++bins[static_cast<std::size_t>(b)];
    }
  }
  json j = base_summary("counterexample", ctx.config);
  j["seed"] = c.seed;
  j["M"] = c.m;
  j["replicates"] = c.replicates;
  j["mass_near_2_3"] = r.mass_near_low;
  j["mass_near_4_3"] = r.mass_near_high;
  j["max_window_mass_0_1"] = r.max_window_mass;
  j["histogram"] = {{"lo", 0.5}, {"width", 0.05}, {"counts", bins}, {"outside", outside}};
  j["pass"] = r.pass;
  write_json(ctx.out_dir / "counterexample_summary.json", j);

  ctx.out << fmt::format("{:4}  mass near 2/3 = {:.3f}, near 4/3 = {:.3f}, max width-0.1 mass = {:.3f}\n",
                         r.pass ? "PASS" : "FAIL", r.mass_near_low, r.mass_near_high, r.max_window_mass);
  for (int b = 0; b < kBins; ++b) {
    if (bins[static_cast<std::size_t>(b)] > 0) {
      ctx.out << fmt::format("  [{:.2f}, {:.2f})  {}\n", 0.5 + 0.05 * b, 0.55 + 0.05 * b, bins[static_cast<std::size_t>(b)]);
    }
  }
  return r.pass ? kExitPass : kExitFail;
}

int variance_table_cmd(Context& ctx) {
  const auto& e = ctx.config.experiment;
  const DiscreteHMM& hmm = require_discrete(e, "variance-table");
  require_oracle_policy(e, "variance-table");
  const double k2 = e.policy.trigger.effective_kappa2();
  std::vector<Integrand> fs;
  for (const auto& f : e.functions) {
    fs.push_back([f](PointView p) { return f(p[0]); });
  }
  const auto rows = variance_table(hmm, e.proposal, k2, hmm.horizon(), fs);

  std::string csv = "k,epsilon,normalizer,gamma_mass,ess_limit,near_boundary";
  for (std::size_t i = 0; i < e.functions.size(); ++i) {
    csv += ",sigma2_" + std::to_string(i);
  }
  csv += "\n";
  json arr = json::array();
  ctx.out << fmt::format("{:>2} {:>3} {:>12} {:>12} {:>12}", "k", "eps", "normalizer", "gamma(1)", "cv2 limit");
  for (const auto& f : e.functions) {
    ctx.out << fmt::format(" {:>16}", "sigma2 " + f.label());
  }
  ctx.out << "\n";
  bool any_near = false;
  for (const auto& r : rows) {
    csv += fmt::format("{},{},{},{},{},{}", r.k, r.epsilon, r.normalizer, r.gamma_mass, r.ess_limit, r.near_boundary ? 1 : 0);
    ctx.out << fmt::format("{:>2} {:>3} {:>12.6f} {:>12.6f} {:>12.6f}", r.k, r.epsilon < 0 ? std::string("-") : std::to_string(r.epsilon),
                           r.normalizer, r.gamma_mass, r.ess_limit);
    for (double s : r.sigma2) {
      csv += fmt::format(",{}", s);
      ctx.out << fmt::format(" {:>16.8f}", s);
    }
    csv += "\n";
    ctx.out << "\n";
    any_near = any_near || r.near_boundary;
    arr.push_back({{"k", r.k},
                   {"epsilon", r.epsilon < 0 ? json(nullptr) : json(r.epsilon)},
                   {"normalizer", r.normalizer},
                   {"gamma_mass", r.gamma_mass},
                   {"ess_limit", r.ess_limit},
                   {"near_boundary", r.near_boundary},
                   {"sigma2", r.sigma2}});
  }
  write_text(ctx.out_dir / "variance_table.csv", csv);
  json j = base_summary("variance-table", ctx.config);
  j["kappa2"] = kappa_json(k2);
  j["functions"] = function_labels(e);
  j["rows"] = arr;
  j["near_boundary"] = any_near;
  j["pass"] = true;
  write_json(ctx.out_dir / "variance_table.json", j);
  return kExitPass;
}

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kTruthUnavailable:
    case ErrorCode::kPathSpaceTooLarge:
    case ErrorCode::kInsufficientData:
      return true;
    default:
      return false;
  }
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"verify-resampling", "verify-lln", "verify-clt", "counterexample",
                                                 "variance-table"};
  return names;
}

int run_command(const std::string& name, const CommandOptions& options, std::ostream& out, std::ostream& err) {
  try {
    AppConfig config = options.config_path.empty() ? parse_config(default_config_json()) : load_config(options.config_path);
    if (options.seed) {
      override_seed(config, *options.seed);
    }
    config.experiment.workers = std::max<std::size_t>(1, options.workers);
    std::filesystem::create_directories(options.out_dir);
    Context ctx{std::move(config), options.out_dir, out};
    spdlog::info("{}: config hash {}", name, config_hash(ctx.config.experiment));
    if (name == "verify-resampling") {
      return verify_resampling(ctx);
    }
    if (name == "verify-lln") {
      return verify_lln(ctx);
    }
    if (name == "verify-clt") {
      return verify_clt(ctx);
    }
    if (name == "counterexample") {
      return counterexample(ctx, ctx.config.experiment.workers);
    }
    if (name == "variance-table") {
      return variance_table_cmd(ctx);
    }
    err << "unknown command '" << name << "'\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_config_error(e.code()) ? kExitConfig : kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

void configure_logging() {
  static bool configured = false;
  if (!configured) {
    auto logger = spdlog::stderr_color_mt("smc-limits");
    spdlog::set_default_logger(logger);
    configured = true;
  }
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("SMC_LIMITS_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

}  // namespace smclimits
