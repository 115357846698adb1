#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "smclimits/commands.hpp"
#include "smclimits/config.hpp"
#include "smclimits/error.hpp"
#include "smclimits/limit_harness.hpp"
#include "smclimits/resampling.hpp"
#include "smclimits/state_space.hpp"
#include "smclimits/variance_oracle.hpp"
#include "smclimits/weighted_sample.hpp"

namespace py = pybind11;
using namespace smclimits;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

/// Accepts shape (n,) or (n, d) points.
WeightedSample to_sample(const Array& points, const std::vector<double>& weights) {
  if (points.ndim() != 1 && points.ndim() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "points must be one- or two-dimensional");
  }
  const std::size_t dim = points.ndim() == 1 ? 1 : static_cast<std::size_t>(points.shape(1));
  std::vector<double> coords(points.data(), points.data() + points.size());
  return WeightedSample(dim, std::move(coords), weights);
}

WeightedSample unit_sample(const std::vector<double>& weights) {
  return WeightedSample::scalar(std::vector<double>(weights.size(), 0.0), weights);
}

py::array_t<double> points_of(const WeightedSample& s) {
  py::array_t<double> out({s.size(), s.dim()});
  std::copy(s.coords().begin(), s.coords().end(), out.mutable_data());
  return out;
}

ResamplingScheme scheme_of(const std::string& name) {
  if (name == "multinomial") {
    return ResamplingScheme::kMultinomial;
  }
  if (name == "residual") {
    return ResamplingScheme::kResidual;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown resampling scheme: " + name);
}

ProposalKind proposal_of(const std::string& name) {
  if (name == "prior") {
    return ProposalKind::kPrior;
  }
  if (name == "optimal") {
    return ProposalKind::kOptimal;
  }
  if (name == "resample_move") {
    return ProposalKind::kResampleMove;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown proposal: " + name);
}

Integrand coordinate(std::size_t j) {
  return [j](PointView p) { return p[j]; };
}

std::vector<Integrand> indicators(const std::vector<std::size_t>& states) {
  std::vector<Integrand> out;
  for (std::size_t s : states) {
    const double target = static_cast<double>(s);
    out.emplace_back([target](PointView p) { return p.back() == target ? 1.0 : 0.0; });
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_smclimits, m) {
  m.doc() = "Sequential Monte Carlo resampling, filters and exact asymptotic-variance oracles";
  m.attr("__version__") = kVersion;

  py::enum_<ErrorCode>(m, "ErrorCode")
      .value("DEGENERATE_WEIGHTS", ErrorCode::kDegenerateWeights)
      .value("NON_FINITE_INTEGRAND", ErrorCode::kNonFiniteIntegrand)
      .value("INVALID_WEIGHT", ErrorCode::kInvalidWeight)
      .value("INVALID_DENSITY", ErrorCode::kInvalidDensity)
      .value("INVALID_OFFSPRING_COUNT", ErrorCode::kInvalidOffspringCount)
      .value("INVALID_ARGUMENT", ErrorCode::kInvalidArgument)
      .value("PHI_NOT_POSITIVE", ErrorCode::kPhiNotPositive)
      .value("ATOMIC_INTEGER_MASS", ErrorCode::kAtomicIntegerMass)
      .value("OPTIMAL_KERNEL_UNDEFINED", ErrorCode::kOptimalKernelUndefined)
      .value("WEIGHT_COLLAPSE", ErrorCode::kWeightCollapse)
      .value("PATH_SPACE_TOO_LARGE", ErrorCode::kPathSpaceTooLarge)
      .value("TRUTH_UNAVAILABLE", ErrorCode::kTruthUnavailable)
      .value("INSUFFICIENT_DATA", ErrorCode::kInsufficientData)
      .value("CONFIG", ErrorCode::kConfig);

  // Deliberately leaked: the type lives as long as the interpreter.
  static PyObject* error_type = PyErr_NewException("smclimits._smclimits.SmcError", PyExc_ValueError, nullptr);
  m.attr("SmcError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) {
        std::rethrow_exception(p);
      }
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(py::str(e.what()));
      inst.attr("code") = py::cast(e.code());
      PyErr_SetObject(error_type, inst.ptr());
    }
  });

  // Weighted samples.
  m.def("estimate", [](const Array& points, const std::vector<double>& weights,
                       const std::function<double(py::array_t<double>)>& f) {
          const auto s = to_sample(points, weights);
          return estimate(s, [&f](PointView p) { return f(py::array_t<double>(p.size(), p.data())); });
        },
        py::arg("points"), py::arg("weights"), py::arg("f"), "Self-normalized estimate of f.");
  m.def("ess", [](const std::vector<double>& w) { return ess(unit_sample(w)); }, py::arg("weights"));
  m.def("cv2", [](const std::vector<double>& w) { return cv2(unit_sample(w)); }, py::arg("weights"));
  m.def("max_weight_fraction", [](const std::vector<double>& w) { return max_weight_fraction(unit_sample(w)); },
        py::arg("weights"));

  // Resampling.
  m.def("resample",
        [](const std::string& scheme, const Array& points, const std::vector<double>& weights, std::size_t m_out,
           std::uint64_t seed) {
          Rng rng = make_rng(seed);
          const auto out = resample(scheme_of(scheme), to_sample(points, weights), m_out, rng);
          return points_of(out);
        },
        py::arg("scheme"), py::arg("points"), py::arg("weights"), py::arg("m_out"), py::arg("seed"),
        "Equally weighted resample of size m_out, returned as an (m_out, d) array.");
  m.def("residual_counts",
        [](const std::vector<double>& weights, std::size_t m_out) {
          const auto c = residual_counts(unit_sample(weights), m_out);
          return py::make_tuple(c.floors, c.residual_probs, c.m_bar);
        },
        py::arg("weights"), py::arg("m_out"), "(floors, residual_probs, m_bar).");
  m.def("conditional_moments",
        [](const std::string& scheme, const Array& points, const std::vector<double>& weights, std::size_t m_out,
           std::size_t coord) {
          const auto s = to_sample(points, weights);
          const auto f = coordinate(coord);
          return py::make_tuple(conditional_mean_oracle(scheme_of(scheme), s, f, m_out),
                                conditional_var_oracle(scheme_of(scheme), s, f, m_out));
        },
        py::arg("scheme"), py::arg("points"), py::arg("weights"), py::arg("m_out"), py::arg("coord") = 0,
        "Closed-form conditional mean and variance of the resampled estimate of one coordinate.");
  m.def("w_ell_phi", &w_ell_phi, py::arg("x"));

  // Models.
  py::class_<DiscreteHMM>(m, "DiscreteHMM")
      .def(py::init<std::vector<double>, std::vector<std::vector<double>>, std::vector<std::vector<double>>>(),
           py::arg("chi"), py::arg("transition"), py::arg("likelihood"))
      .def_static("from_emissions", &DiscreteHMM::from_emissions, py::arg("chi"), py::arg("transition"),
                  py::arg("emission"), py::arg("observations"))
      .def_static("simulate_observations", &DiscreteHMM::simulate_observations, py::arg("chi"),
                  py::arg("transition"), py::arg("emission"), py::arg("horizon"), py::arg("seed"))
      .def_property_readonly("n_states", &DiscreteHMM::n_states)
      .def_property_readonly("horizon", &DiscreteHMM::horizon)
      .def_property_readonly("chi", &DiscreteHMM::chi)
      .def_property_readonly("transition", &DiscreteHMM::transition_matrix)
      .def_property_readonly("likelihood", &DiscreteHMM::likelihood_table)
      .def("truncated", &DiscreteHMM::truncated, py::arg("horizon"));

  py::class_<LinearGaussianSSM>(m, "LinearGaussianSSM")
      .def(py::init([](double phi, double sigma_x, double tau, std::vector<double> observations) {
             LinearGaussianSSM s{phi, sigma_x, tau, std::move(observations)};
             s.validate();
             return s;
           }),
           py::arg("phi"), py::arg("sigma_x"), py::arg("tau"), py::arg("observations"))
      .def_static("simulate_observations", &LinearGaussianSSM::simulate_observations, py::arg("phi"),
                  py::arg("sigma_x"), py::arg("tau"), py::arg("horizon"), py::arg("seed"))
      .def_readonly("phi", &LinearGaussianSSM::phi)
      .def_readonly("sigma_x", &LinearGaussianSSM::sigma_x)
      .def_readonly("tau", &LinearGaussianSSM::tau)
      .def_readonly("observations", &LinearGaussianSSM::observations);

  m.def("exact_joint_smoothing",
        [](const DiscreteHMM& model, std::size_t k) { return exact_joint_smoothing(model, k).probs; },
        py::arg("model"), py::arg("k"), "Smoothing law over X^k; index has x_1 as the most significant digit.");
  m.def("forward_backward_marginals", &forward_backward_marginals, py::arg("model"), py::arg("k"));
  m.def("kalman_filter",
        [](const LinearGaussianSSM& model) {
          std::vector<std::pair<double, double>> out;
          for (const auto& g : kalman_filter(model)) {
            out.emplace_back(g.mean, g.variance);
          }
          return out;
        },
        py::arg("model"), "Filtering (mean, variance) per step.");

  // Filter.
  auto run_filter = [](const StateSpaceModel& model, const std::string& proposal, const std::string& scheme,
                       double kappa2, std::size_t m_particles, std::uint64_t seed) {
    ResamplingPolicy policy;
    policy.scheme = scheme_of(scheme);
    policy.trigger = ResamplingTrigger::cv_threshold(kappa2);
    const auto trace = smc_run(model, proposal_of(proposal), policy, m_particles, seed);
    std::vector<double> step_cv2;
    std::vector<bool> resampled;
    std::vector<double> increments;
    for (const auto& s : trace.steps) {
      step_cv2.push_back(s.cv2);
      resampled.push_back(s.resampled);
      increments.push_back(s.increment);
    }
    const auto& last = trace.current();
    py::dict out;
    out["paths"] = points_of(last);
    out["weights"] = std::vector<double>(last.weights().begin(), last.weights().end());
    out["cv2"] = step_cv2;
    out["resampled"] = resampled;
    out["increments"] = increments;
    out["ess"] = trace.steps.back().ess;
    return out;
  };
  m.def("run_filter",
        [run_filter](const DiscreteHMM& model, const std::string& proposal, const std::string& scheme, double kappa2,
                     std::size_t m_particles, std::uint64_t seed) {
          return run_filter(model, proposal, scheme, kappa2, m_particles, seed);
        },
        py::arg("model"), py::arg("proposal") = "prior", py::arg("scheme") = "multinomial", py::arg("kappa2") = 1.0,
        py::arg("m"), py::arg("seed"));
  m.def("run_filter",
        [run_filter](const LinearGaussianSSM& model, const std::string& proposal, const std::string& scheme,
                     double kappa2, std::size_t m_particles, std::uint64_t seed) {
          return run_filter(model, proposal, scheme, kappa2, m_particles, seed);
        },
        py::arg("model"), py::arg("proposal") = "prior", py::arg("scheme") = "multinomial", py::arg("kappa2") = 1.0,
        py::arg("m"), py::arg("seed"));

  // Variance oracle.
  m.def("variance_table",
        [](const DiscreteHMM& model, const std::string& proposal, double kappa2, std::size_t horizon,
           const std::vector<std::size_t>& states) {
          py::list rows;
          for (const auto& r : variance_table(model, proposal_of(proposal), kappa2, horizon, indicators(states))) {
            py::dict d;
            d["k"] = r.k;
            d["epsilon"] = r.epsilon < 0 ? py::object(py::none()) : py::object(py::int_(r.epsilon));
            d["normalizer"] = r.normalizer;
            d["gamma_mass"] = r.gamma_mass;
            d["ess_limit"] = r.ess_limit;
            d["near_boundary"] = r.near_boundary;
            d["sigma2"] = r.sigma2;
            rows.append(d);
          }
          return rows;
        },
        py::arg("model"), py::arg("proposal") = "prior", py::arg("kappa2") = 1.0, py::arg("horizon"),
        py::arg("states") = std::vector<std::size_t>{0},
        "Per-step recursion quantities; sigma2 holds one entry per terminal-state indicator.");
  m.def("sigma2",
        [](const DiscreteHMM& model, const std::string& proposal, double kappa2, std::size_t k,
           const std::vector<double>& path_function) {
          return sigma2(run_recursion(model, proposal_of(proposal), kappa2, k), path_function);
        },
        py::arg("model"), py::arg("proposal"), py::arg("kappa2"), py::arg("k"), py::arg("path_function"),
        "Asymptotic variance at step k of a function tabulated over X^k.");

  // Statistics.
  m.def("ks_test",
        [](std::vector<double> values) {
          const auto r = ks_test(std::move(values));
          return py::make_tuple(r.statistic, r.p_value);
        },
        py::arg("values"), "(statistic, p_value) against N(0, 1).");
  m.def("normal_cdf", &normal_cdf, py::arg("x"));
  m.def("kolmogorov_survival", &kolmogorov_survival, py::arg("lam"));
  m.def("counterexample_run",
        [](std::size_t m_particles, std::size_t replicates, std::uint64_t seed, std::size_t workers) {
          CounterexampleResult r;
          {
            py::gil_scoped_release release;
            r = counterexample_run(m_particles, replicates, seed, workers);
          }
          py::dict out;
          out["values"] = r.values;
          out["mass_near_low"] = r.mass_near_low;
          out["mass_near_high"] = r.mass_near_high;
          out["max_window_mass"] = r.max_window_mass;
          out["pass"] = r.pass;
          return out;
        },
        py::arg("m"), py::arg("replicates"), py::arg("seed"), py::arg("workers") = 1);

  // Command layer.
  m.def("default_config", [] { return default_config_json().dump(2); }, "Built-in configuration as JSON text.");
  m.def("command_names", &command_names);
  m.def("run_command",
        [](const std::string& name, const std::string& config_path, const std::string& out_dir,
           std::optional<std::uint64_t> seed, std::size_t workers) {
          CommandOptions opts;
          opts.config_path = config_path;
          opts.out_dir = out_dir;
          opts.seed = seed;
          opts.workers = workers;
          std::ostringstream out;
          std::ostringstream err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = run_command(name, opts, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("name"), py::arg("config_path") = "", py::arg("out_dir") = ".", py::arg("seed") = py::none(),
        py::arg("workers") = 1, "Runs a CLI subcommand in-process; returns (exit_code, stdout, stderr).");
}
