#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bridgesampler/dynamics.hpp"
#include "bridgesampler/errors.hpp"
#include "bridgesampler/oracle_models.hpp"
#include "bridgesampler/samplers.hpp"
#include "bridgesampler/schedule.hpp"
#include "bridgesampler/validation.hpp"

namespace py = pybind11;
using namespace bridge;

namespace {

Eigen::MatrixXd stack_rows(const std::vector<SampleRun>& runs) {
  if (runs.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(runs.size()), runs.front().x0.size());
  for (std::size_t i = 0; i < runs.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = runs[i].x0.transpose();
  return out;
}

py::dict report_dict(const TheoremReport& r) {
  py::dict d;
  d["theorem"] = std::string(to_string(r.id));
  d["params"] = r.params;
  d["observed"] = r.observed;
  d["secondary"] = r.secondary;
  d["tolerance"] = r.tolerance;
  d["passed"] = r.pass;
  d["note"] = r.note;
  return d;
}

TimeGrid grid_for(const BridgeSchedule& s, std::size_t steps, const std::string& spacing, double t_min) {
  return make_time_grid(s, steps, parse_grid_spacing(spacing), t_min);
}

ConditionalModel to_model(const py::object& obj) {
  if (py::isinstance<GaussianConditionalModel>(obj)) return obj.cast<GaussianConditionalModel>();
  if (py::isinstance<GaussianMixtureConditionalModel>(obj)) return obj.cast<GaussianMixtureConditionalModel>();
  throw py::type_error("model must be a GaussianModel or GaussianMixtureModel");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Posterior-start ODE sampling for diffusion bridges";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  auto domain = py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SingularTimeError>(m, "SingularTimeError", domain.ptr());
  py::register_exception<NonFiniteStateError>(m, "NonFiniteStateError", PyExc_ArithmeticError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  py::class_<BridgeSchedule>(m, "BridgeSchedule")
      .def_static("brownian_bridge", &BridgeSchedule::brownian_bridge, py::arg("sigma"), py::arg("horizon") = 1.0)
      .def_static("variance_preserving", &BridgeSchedule::variance_preserving, py::arg("beta_min"),
                  py::arg("beta_max"), py::arg("horizon") = 1.0)
      .def_property_readonly("kind", [](const BridgeSchedule& s) { return std::string(to_string(s.kind())); })
      .def_property_readonly("horizon", &BridgeSchedule::horizon)
      .def("drift_coef", &BridgeSchedule::drift_coef)
      .def("diffusion_sq", &BridgeSchedule::diffusion_sq)
      .def("alpha", &BridgeSchedule::alpha)
      .def("rho2", &BridgeSchedule::rho2)
      .def("coeffs", [](const BridgeSchedule& s, double t) {
        const BridgeCoeffs k = coeffs(s, t);
        return py::make_tuple(k.a, k.b, k.c);
      });

  py::class_<TimeGrid>(m, "TimeGrid")
      .def(py::init<std::vector<double>>())
      .def_property_readonly("times", &TimeGrid::times)
      .def_property_readonly("steps", &TimeGrid::steps)
      .def_property_readonly("tau", &TimeGrid::tau);
  m.def("make_time_grid", &grid_for, py::arg("schedule"), py::arg("steps"), py::arg("spacing") = "uniform",
        py::arg("t_min") = 0.0);

  py::class_<GaussianConditionalModel>(m, "GaussianModel")
      .def(py::init<Eigen::MatrixXd, Vec, Vec>(), py::arg("mean_matrix"), py::arg("mean_offset"),
           py::arg("variance"))
      .def_static("fixed", &GaussianConditionalModel::fixed, py::arg("mean"), py::arg("variance"))
      .def_property_readonly("dim", &GaussianConditionalModel::dim)
      .def("prior_mean", &GaussianConditionalModel::prior_mean)
      .def("prior_variance", &GaussianConditionalModel::prior_variance)
      .def("posterior_mean", &GaussianConditionalModel::posterior_mean, py::arg("schedule"), py::arg("x"),
           py::arg("y"), py::arg("t"))
      .def("marginal_score", &GaussianConditionalModel::marginal_score, py::arg("schedule"), py::arg("x"),
           py::arg("y"), py::arg("t"));

  py::class_<GaussianMixtureConditionalModel>(m, "GaussianMixtureModel")
      .def_static("fixed", &GaussianMixtureConditionalModel::fixed, py::arg("weights"), py::arg("means"),
                  py::arg("variance"))
      .def_property_readonly("dim", &GaussianMixtureConditionalModel::dim)
      .def("prior_mean", &GaussianMixtureConditionalModel::prior_mean)
      .def("prior_variance", &GaussianMixtureConditionalModel::prior_variance)
      .def("responsibilities", &GaussianMixtureConditionalModel::responsibilities, py::arg("schedule"),
           py::arg("x"), py::arg("y"), py::arg("t"))
      .def("posterior_mean", &GaussianMixtureConditionalModel::posterior_mean, py::arg("schedule"), py::arg("x"),
           py::arg("y"), py::arg("t"))
      .def("marginal_score", &GaussianMixtureConditionalModel::marginal_score, py::arg("schedule"), py::arg("x"),
           py::arg("y"), py::arg("t"));

  m.def("h_drift", &h_drift, py::arg("schedule"), py::arg("x"), py::arg("y"), py::arg("t"));
  m.def("score_from_predictor", &score_from_predictor, py::arg("prediction"), py::arg("x"), py::arg("y"),
        py::arg("t"), py::arg("schedule"));
  m.def("sde_limit_drift", &sde_limit_drift, py::arg("schedule"), py::arg("y"), py::arg("x0_hat"));
  m.def(
      "pf_ode_drift",
      [](const BridgeSchedule& s, const Vec& x, const Vec& y, double t, const Vec& score) {
        return pf_ode_drift(s, x, y, t, score).value();
      },
      py::arg("schedule"), py::arg("x"), py::arg("y"), py::arg("t"), py::arg("score"));

  m.def("expected_nfe", [](const std::string& method, std::size_t steps) {
    return expected_nfe(parse_sampler_method(method), steps);
  });

  m.def(
      "sample",
      [](const py::object& model_obj, const BridgeSchedule& s, const Vec& y, const std::string& method,
         std::size_t steps, std::size_t runs, std::uint64_t seed, const std::string& spacing, double t_min,
         unsigned threads) {
        const ConditionalModel model = to_model(model_obj);
        SamplerConfig config{parse_sampler_method(method), grid_for(s, steps, spacing, t_min), false, seed};
        std::vector<SampleRun> out;
        {
          py::gil_scoped_release release;
          out = sample_batch(config, model, s, y, runs, threads);
        }
        std::vector<std::int64_t> nfe;
        for (const auto& r : out) nfe.push_back(r.nfe);
        return py::make_tuple(stack_rows(out), nfe);
      },
      py::arg("model"), py::arg("schedule"), py::arg("y"), py::arg("method") = "odes3", py::arg("steps") = 20,
      py::arg("runs") = 1, py::arg("seed") = 0, py::arg("spacing") = "uniform", py::arg("t_min") = 0.0,
      py::arg("threads") = 1, "Returns (samples[runs, dim], nfe per run).");

  m.def(
      "start_summary",
      [](const py::object& model_obj, const BridgeSchedule& s, const Vec& y, double tau, const std::string& kind) {
        const ConditionalModel model = to_model(model_obj);
        const GaussianSummary g = start_summary(model, s, y, tau, parse_start_kind(kind));
        return py::make_tuple(g.mean, g.variance);
      },
      py::arg("model"), py::arg("schedule"), py::arg("y"), py::arg("tau"), py::arg("kind") = "post");
  m.def(
      "expected_kl",
      [](const py::object& model_obj, const BridgeSchedule& s, const Vec& y, double tau, const std::string& kind) {
        const ConditionalModel model = to_model(model_obj);
        return expected_kl_start(model, s, y, tau, parse_start_kind(kind));
      },
      py::arg("model"), py::arg("schedule"), py::arg("y"), py::arg("tau"), py::arg("kind") = "post");
  m.def(
      "kl_gaussian",
      [](const Vec& mean_p, const Vec& var_p, const Vec& mean_q, const Vec& var_q) {
        return kl_gaussian({mean_p, var_p}, {mean_q, var_q});
      },
      py::arg("mean_p"), py::arg("var_p"), py::arg("mean_q"), py::arg("var_q"));
  m.def(
      "optimal_gaussian_projection",
      [](const py::object& model_obj, const BridgeSchedule& s, const Vec& y, double tau) {
        const ConditionalModel model = to_model(model_obj);
        const GaussianSummary g = optimal_gaussian_projection(model, s, y, tau);
        return py::make_tuple(g.mean, g.variance);
      },
      py::arg("model"), py::arg("schedule"), py::arg("y"), py::arg("tau"));
  m.def(
      "gaussian_flow_oracle",
      [](const GaussianConditionalModel& model, const BridgeSchedule& s, const Vec& y, const Vec& mean,
         const Vec& variance, double tau, std::size_t steps) {
        const GaussianSummary g = gaussian_flow_oracle(model, s, y, {mean, variance}, tau, steps);
        return py::make_tuple(g.mean, g.variance);
      },
      py::arg("model"), py::arg("schedule"), py::arg("y"), py::arg("mean"), py::arg("variance"), py::arg("tau"),
      py::arg("steps") = 20000);

  m.def(
      "check_theorem1",
      [](const py::object& model_obj, const BridgeSchedule& s, const Vec& y, const std::vector<double>& eps) {
        const ConditionalModel model = to_model(model_obj);
        return report_dict(check_theorem1(model, s, y, eps));
      },
      py::arg("model"), py::arg("schedule"), py::arg("y"), py::arg("epsilons"));
  m.def(
      "check_theorem2",
      [](const py::object& model_obj, const BridgeSchedule& s, const Vec& y, const std::vector<double>& eps,
         std::uint64_t seed) {
        const ConditionalModel model = to_model(model_obj);
        Rng rng(seed);
        return report_dict(check_theorem2(model, s, y, eps, rng));
      },
      py::arg("model"), py::arg("schedule"), py::arg("y"), py::arg("epsilons"), py::arg("seed") = 7);
  m.def(
      "check_theorem3",
      [](const py::object& model_obj, const BridgeSchedule& s, const std::vector<Vec>& ys,
         const std::vector<double>& taus, const std::string& comparator, std::size_t mc_draws, std::size_t mc_pairs,
         std::uint64_t seed) {
        const ConditionalModel model = to_model(model_obj);
        Theorem3Options options;
        options.comparator = parse_start_kind(comparator);
        options.mc_draws = mc_draws;
        options.mc_pairs = mc_pairs;
        Rng rng(seed);
        return report_dict(check_theorem3(model, s, ys, taus, options, rng));
      },
      py::arg("model"), py::arg("schedule"), py::arg("ys"), py::arg("taus"), py::arg("comparator") = "em",
      py::arg("mc_draws") = 100000, py::arg("mc_pairs") = 1, py::arg("seed") = 1);

  m.def(
      "convergence_order",
      [](const std::string& method, const GaussianConditionalModel& model, const BridgeSchedule& s, const Vec& y,
         const std::vector<std::size_t>& grid_sizes, double tau, std::size_t runs, std::size_t reference_steps,
         std::uint64_t seed) {
        Rng rng(seed);
        const ConvergenceResult r = convergence_order(parse_sampler_method(method), model, s, y, grid_sizes,
                                                      {tau, runs, reference_steps}, rng);
        py::dict d;
        d["grid_sizes"] = r.grid_sizes;
        d["step_sizes"] = r.step_sizes;
        d["errors"] = r.errors;
        d["order"] = r.order;
        return d;
      },
      py::arg("method"), py::arg("model"), py::arg("schedule"), py::arg("y"), py::arg("grid_sizes"),
      py::arg("tau") = 0.9, py::arg("runs") = 32, py::arg("reference_steps") = 20000, py::arg("seed") = 0);

  m.def("wasserstein1_1d", [](const std::vector<double>& a, const std::vector<double>& b) {
    return wasserstein1_1d(a, b);
  });
}
