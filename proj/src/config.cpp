#include "smclimits/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

#include "smclimits/error.hpp"

namespace smclimits {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kConfig, where + ": " + what);
}

void check_object(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    fail(where, "expected an object");
  }
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (keys.count(key) == 0) {
      fail(where, "unknown key '" + key + "'");
    }
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) {
    fail(where, "expected a number");
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    fail(where, "expected a finite number");
  }
  return v;
}

std::uint64_t unsigned_integer(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) {
    fail(where, "expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

std::size_t positive_integer(const json& j, const std::string& where) {
  const auto v = unsigned_integer(j, where);
  if (v == 0) {
    fail(where, "must be positive");
  }
  return static_cast<std::size_t>(v);
}

std::string string(const json& j, const std::string& where) {
  if (!j.is_string()) {
    fail(where, "expected a string");
  }
  return j.get<std::string>();
}

std::vector<double> vector(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    fail(where, "expected a non-empty array of numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<std::vector<double>> matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    fail(where, "expected a non-empty array of rows");
  }
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(vector(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

const json& required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    fail(where, std::string("missing required key '") + key + "'");
  }
  return j.at(key);
}

template <class Build>
auto domain(const std::string& where, Build&& build) {
  try {
    return build();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) {
      throw;
    }
    fail(where, e.what());
  }
}

std::size_t exactly_one_source(const json& m, const std::string& where, std::initializer_list<const char*> keys) {
  std::size_t found = 0;
  for (const char* k : keys) {
    found += m.contains(k) ? 1 : 0;
  }
  if (found != 1) {
    std::string list;
    for (const char* k : keys) {
      list += (list.empty() ? "" : ", ") + std::string(k);
    }
    fail(where, "exactly one of {" + list + "} is required");
  }
  return found;
}

void parse_model(const json& m, AppConfig& out) {
  const std::string where = "model";
  if (!m.is_object()) {
    fail(where, "expected an object");
  }
  const std::string type = string(required(m, "type", where), where + ".type");
  if (type == "discrete_hmm") {
    check_object(m, where, {"type", "chi", "transition", "emission", "horizon", "obs_seed", "observations", "likelihood"});
    const auto chi = vector(required(m, "chi", where), where + ".chi");
    const auto q = matrix(required(m, "transition", where), where + ".transition");
    exactly_one_source(m, where, {"obs_seed", "observations", "likelihood"});
    if (m.contains("likelihood")) {
      if (m.contains("emission") || m.contains("horizon")) {
        fail(where, "'likelihood' excludes 'emission' and 'horizon'");
      }
      const auto g = matrix(m.at("likelihood"), where + ".likelihood");
      out.experiment.model = domain(where, [&] { return DiscreteHMM(chi, q, g); });
      out.observations = m.at("likelihood");
      return;
    }
    const auto b = matrix(required(m, "emission", where), where + ".emission");
    std::vector<std::size_t> ys;
    if (m.contains("obs_seed")) {
      const auto seed = unsigned_integer(m.at("obs_seed"), where + ".obs_seed");
      const auto h = positive_integer(required(m, "horizon", where), where + ".horizon");
      out.obs_seed = seed;
      ys = domain(where, [&] {
        // Validate shapes before simulating.
        DiscreteHMM::from_emissions(chi, q, b, {0});
        return DiscreteHMM::simulate_observations(chi, q, b, h, seed);
      });
    } else {
      const auto& obs = m.at("observations");
      if (!obs.is_array() || obs.empty()) {
        fail(where + ".observations", "expected a non-empty array of symbols");
      }
      for (std::size_t i = 0; i < obs.size(); ++i) {
        ys.push_back(static_cast<std::size_t>(unsigned_integer(obs[i], where + ".observations[" + std::to_string(i) + "]")));
      }
      if (m.contains("horizon") && unsigned_integer(m.at("horizon"), where + ".horizon") != ys.size()) {
        fail(where, "horizon does not match the observation count");
      }
    }
    out.experiment.model = domain(where, [&] { return DiscreteHMM::from_emissions(chi, q, b, ys); });
    out.observations = ys;
    return;
  }
  if (type == "linear_gaussian") {
    check_object(m, where, {"type", "phi", "sigma_x", "tau", "horizon", "obs_seed", "observations"});
    LinearGaussianSSM lg;
    if (m.contains("phi")) {
      lg.phi = number(m.at("phi"), where + ".phi");
    }
    if (m.contains("sigma_x")) {
      lg.sigma_x = number(m.at("sigma_x"), where + ".sigma_x");
    }
    if (m.contains("tau")) {
      lg.tau = number(m.at("tau"), where + ".tau");
    }
    exactly_one_source(m, where, {"obs_seed", "observations"});
    if (m.contains("obs_seed")) {
      const auto seed = unsigned_integer(m.at("obs_seed"), where + ".obs_seed");
      const auto h = positive_integer(required(m, "horizon", where), where + ".horizon");
      out.obs_seed = seed;
      lg.observations = domain(where, [&] { return LinearGaussianSSM::simulate_observations(lg.phi, lg.sigma_x, lg.tau, h, seed); });
    } else {
      lg.observations = vector(m.at("observations"), where + ".observations");
      if (m.contains("horizon") && unsigned_integer(m.at("horizon"), where + ".horizon") != lg.observations.size()) {
        fail(where, "horizon does not match the observation count");
      }
    }
    domain(where, [&] {
      lg.validate();
      return 0;
    });
    out.observations = lg.observations;
    out.experiment.model = lg;
    return;
  }
  fail(where + ".type", "expected 'discrete_hmm' or 'linear_gaussian'");
}

ProposalKind parse_proposal(const json& j) {
  const std::string name = string(j, "proposal");
  if (name == "prior") {
    return ProposalKind::kPrior;
  }
  if (name == "optimal") {
    return ProposalKind::kOptimal;
  }
  if (name == "resample_move") {
    return ProposalKind::kResampleMove;
  }
  fail("proposal", "expected 'prior', 'optimal' or 'resample_move'");
}

ResamplingPolicy parse_policy(const json& j) {
  const std::string where = "policy";
  check_object(j, where, {"scheme", "trigger", "kappa2", "ell"});
  ResamplingPolicy policy;
  if (j.contains("scheme")) {
    const auto s = string(j.at("scheme"), where + ".scheme");
    if (s == "multinomial") {
      policy.scheme = ResamplingScheme::kMultinomial;
    } else if (s == "residual") {
      policy.scheme = ResamplingScheme::kResidual;
    } else {
      fail(where + ".scheme", "expected 'multinomial' or 'residual'");
    }
  }
  std::string trigger = j.contains("kappa2") ? "cv_threshold" : "always";
  if (j.contains("trigger")) {
    trigger = string(j.at("trigger"), where + ".trigger");
  }
  if (trigger == "always") {
    policy.trigger = ResamplingTrigger::always();
  } else if (trigger == "never") {
    policy.trigger = ResamplingTrigger::never();
  } else if (trigger == "cv_threshold") {
    const double k2 = parse_kappa2(required(j, "kappa2", where));
    policy.trigger = ResamplingTrigger::cv_threshold(k2);
  } else {
    fail(where + ".trigger", "expected 'always', 'never' or 'cv_threshold'");
  }
  if (trigger != "cv_threshold" && j.contains("kappa2")) {
    fail(where, "'kappa2' is only allowed with trigger 'cv_threshold'");
  }
  if (j.contains("ell")) {
    const double ell = number(j.at("ell"), where + ".ell");
    if (!(ell > 0.0)) {
      fail(where + ".ell", "must be positive");
    }
    policy.size.ratio = ell;
  }
  return policy;
}

TestFunction parse_function(const json& j, const std::string& where) {
  if (!j.is_object()) {
    fail(where, "expected an object");
  }
  const auto type = string(required(j, "type", where), where + ".type");
  if (type == "indicator") {
    check_object(j, where, {"type", "state"});
    return TestFunction::indicator(static_cast<std::size_t>(unsigned_integer(required(j, "state", where), where + ".state")));
  }
  if (type == "affine") {
    check_object(j, where, {"type", "a", "b"});
    const double a = j.contains("a") ? number(j.at("a"), where + ".a") : 1.0;
    const double b = j.contains("b") ? number(j.at("b"), where + ".b") : 0.0;
    return TestFunction::affine(a, b);
  }
  fail(where + ".type", "expected 'indicator' or 'affine'");
}

void parse_experiment(const json& j, AppConfig& out) {
  const std::string where = "experiment";
  check_object(j, where, {"horizon", "functions", "M_list", "replicates", "seed"});
  auto& e = out.experiment;
  e.horizon = j.contains("horizon") ? positive_integer(j.at("horizon"), where + ".horizon") : horizon(e.model);
  if (j.contains("functions")) {
    const auto& fs = j.at("functions");
    if (!fs.is_array() || fs.empty()) {
      fail(where + ".functions", "expected a non-empty array");
    }
    for (std::size_t i = 0; i < fs.size(); ++i) {
      e.functions.push_back(parse_function(fs[i], where + ".functions[" + std::to_string(i) + "]"));
    }
  } else {
    e.functions = {TestFunction::indicator(0)};
  }
  const auto& ms = required(j, "M_list", where);
  if (!ms.is_array() || ms.empty()) {
    fail(where + ".M_list", "expected a non-empty array");
  }
  for (std::size_t i = 0; i < ms.size(); ++i) {
    e.m_list.push_back(positive_integer(ms[i], where + ".M_list[" + std::to_string(i) + "]"));
  }
  e.replicates = positive_integer(required(j, "replicates", where), where + ".replicates");
  e.seed = j.contains("seed") ? unsigned_integer(j.at("seed"), where + ".seed") : 1;
}

void parse_verification(const json& j, VerificationSettings& v) {
  const std::string where = "verification";
  check_object(j, where, {"tolerance", "ess_tolerance", "w_tolerance", "cases", "instances", "ess_vectors", "w_M", "seed"});
  auto tolerance = [&](const char* key, double& slot) {
    if (j.contains(key)) {
      slot = number(j.at(key), where + "." + key);
      if (slot < 0.0) {
        fail(where + "." + key, "must be nonnegative");
      }
    }
  };
  tolerance("tolerance", v.tolerance);
  tolerance("ess_tolerance", v.ess_tolerance);
  tolerance("w_tolerance", v.w_tolerance);
  if (j.contains("cases")) {
    v.cases = static_cast<std::size_t>(unsigned_integer(j.at("cases"), where + ".cases"));
  }
  if (j.contains("instances")) {
    v.instances = positive_integer(j.at("instances"), where + ".instances");
  }
  if (j.contains("ess_vectors")) {
    v.ess_vectors = positive_integer(j.at("ess_vectors"), where + ".ess_vectors");
  }
  if (j.contains("w_M")) {
    v.w_m = positive_integer(j.at("w_M"), where + ".w_M");
  }
  if (j.contains("seed")) {
    v.seed = unsigned_integer(j.at("seed"), where + ".seed");
  }
}

void parse_counterexample(const json& j, CounterexampleSettings& c) {
  const std::string where = "counterexample";
  check_object(j, where, {"M", "replicates", "seed"});
  if (j.contains("M")) {
    c.m = positive_integer(j.at("M"), where + ".M");
  }
  if (j.contains("replicates")) {
    c.replicates = positive_integer(j.at("replicates"), where + ".replicates");
  }
  if (j.contains("seed")) {
    c.seed = unsigned_integer(j.at("seed"), where + ".seed");
  }
}

}  // namespace

double parse_kappa2(const json& value) {
  if (value.is_string()) {
    if (value.get<std::string>() == "inf") {
      return std::numeric_limits<double>::infinity();
    }
    fail("policy.kappa2", "expected a nonnegative number or \"inf\"");
  }
  const double k2 = number(value, "policy.kappa2");
  if (k2 < 0.0) {
    fail("policy.kappa2", "must be nonnegative");
  }
  return k2;
}

AppConfig parse_config(const json& doc) {
  check_object(doc, "config", {"model", "proposal", "policy", "experiment", "verification", "counterexample", "clt"});
  AppConfig out;
  parse_model(required(doc, "model", "config"), out);
  if (doc.contains("proposal")) {
    out.experiment.proposal = parse_proposal(doc.at("proposal"));
  }
  if (doc.contains("policy")) {
    out.experiment.policy = parse_policy(doc.at("policy"));
  }
  parse_experiment(required(doc, "experiment", "config"), out);
  if (doc.contains("verification")) {
    parse_verification(doc.at("verification"), out.verification);
  }
  if (doc.contains("counterexample")) {
    parse_counterexample(doc.at("counterexample"), out.counterexample);
  }
  if (doc.contains("clt")) {
    const auto& c = doc.at("clt");
    check_object(c, "clt", {"M", "replicates"});
    CltSettings s;
    s.m = positive_integer(required(c, "M", "clt"), "clt.M");
    s.replicates = positive_integer(required(c, "replicates", "clt"), "clt.replicates");
    out.clt = s;
  }
  domain("experiment", [&] {
    out.experiment.validate();
    return 0;
  });
  return out;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kConfig, "cannot open config file '" + path + "'");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

void override_seed(AppConfig& config, std::uint64_t seed) {
  config.experiment.seed = seed;
  config.verification.seed = seed;
  config.counterexample.seed = seed;
}

json default_config_json() {
  return json::parse(R"({
    "model": {
      "type": "discrete_hmm",
      "chi": [0.5, 0.5],
      "transition": [[0.9, 0.1], [0.2, 0.8]],
      "emission": [[0.8, 0.2], [0.2, 0.8]],
      "horizon": 5,
      "obs_seed": 7
    },
    "proposal": "prior",
    "policy": {"scheme": "multinomial", "trigger": "cv_threshold", "kappa2": 1},
    "experiment": {
      "horizon": 4,
      "functions": [{"type": "indicator", "state": 0}],
      "M_list": [256, 1024, 4096, 16384],
      "replicates": 200,
      "seed": 1
    },
    "clt": {"M": 4096, "replicates": 500},
    "counterexample": {"M": 100000, "replicates": 400, "seed": 20240602},
    "verification": {"tolerance": 1e-12, "cases": 200, "seed": 20240601}
  })");
}

}  // namespace smclimits
