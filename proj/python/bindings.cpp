#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "intercity/cli.hpp"
#include "intercity/corridor.hpp"
#include "intercity/data_io.hpp"
#include "intercity/errors.hpp"
#include "intercity/estimation.hpp"
#include "intercity/likelihood.hpp"
#include "intercity/scenario.hpp"
#include "intercity/trip_generation.hpp"

namespace py = pybind11;
using namespace intercity;

namespace {

std::map<std::string, double> params_dict(const ParameterVector& p) {
  std::map<std::string, double> out;
  for (const auto& e : p.entries()) out[e.name] = e.value;
  return out;
}

}  // namespace

PYBIND11_MODULE(_intercity, m) {
  m.doc() = "Nested logit destination/mode choice, Poisson trip generation and scenario simulation";
  m.attr("__version__") = kToolVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::enum_<Context>(m, "Context").value("RP", Context::RP).value("SP", Context::SP);
  py::enum_<Purpose>(m, "Purpose").value("Business", Purpose::Business).value("NonBusiness", Purpose::NonBusiness);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_readonly("name", &ModelSpec::name)
      .def_readonly("purpose", &ModelSpec::purpose)
      .def("coefficient_names", &ModelSpec::coefficient_names)
      .def("validate", py::overload_cast<const ParameterVector&>(&ModelSpec::validate, py::const_))
      .def("to_json", [](const ModelSpec& s) { return to_json(s).dump(); })
      .def("hash", [](const ModelSpec& s) { return spec_hash(s); })
      .def_static("from_json", [](const std::string& text) {
        ModelSpec s = model_spec_from_json(nlohmann::json::parse(text));
        s.validate();
        return s;
      });

  py::class_<ParameterVector>(m, "ParameterVector")
      .def(py::init<>())
      .def("add", &ParameterVector::add, py::arg("name"), py::arg("value"), py::arg("fixed") = false)
      .def("__len__", &ParameterVector::size)
      .def("__contains__", [](const ParameterVector& p, const std::string& n) { return p.contains(n); })
      .def("__getitem__", [](const ParameterVector& p, const std::string& n) { return p.value(n); })
      .def("__setitem__", [](ParameterVector& p, const std::string& n, double v) { p.set_value(n, v); })
      .def("set_fixed", &ParameterVector::set_fixed)
      .def("is_fixed", [](const ParameterVector& p, const std::string& n) { return p.at(n).fixed; })
      .def("names", [](const ParameterVector& p) {
        std::vector<std::string> out;
        for (const auto& e : p.entries()) out.push_back(e.name);
        return out;
      })
      .def("free_names", &ParameterVector::free_names)
      .def("to_dict", &params_dict)
      .def("to_json", [](const ParameterVector& p) { return to_json(p).dump(); })
      .def(py::self == py::self);

  py::class_<ChoiceDataset>(m, "ChoiceDataset")
      .def_property_readonly("n_observations", [](const ChoiceDataset& d) { return d.observations.size(); })
      .def_property_readonly("zones", [](const ChoiceDataset& d) { return d.schema.zones(); })
      .def_property_readonly("modes", [](const ChoiceDataset& d) { return d.schema.modes(); })
      .def_property_readonly("covariates", [](const ChoiceDataset& d) { return d.schema.covariates(); })
      .def("observation_ids", [](const ChoiceDataset& d) {
        std::vector<std::string> out;
        for (const auto& o : d.observations) out.push_back(o.id);
        return out;
      })
      .def("chosen", [](const ChoiceDataset& d) {
        std::vector<std::optional<std::pair<std::string, std::string>>> out;
        for (const auto& o : d.observations) {
          if (!o.chosen) {
            out.emplace_back();
            continue;
          }
          const auto& a = o.alternatives[*o.chosen];
          out.emplace_back(std::make_pair(d.schema.zones()[a.zone], d.schema.modes()[a.mode]));
        }
        return out;
      })
      .def("manifest", [](const ChoiceDataset& d) { return to_json(make_manifest(d, "", 0)).dump(); })
      .def("to_csv", [](const ChoiceDataset& d) {
        std::ostringstream os;
        write_choice_dataset(d, os);
        return os.str();
      })
      .def(py::self == py::self);

  py::class_<EstimationResult>(m, "EstimationResult")
      .def_readonly("params", &EstimationResult::params)
      .def_readonly("std_errors", &EstimationResult::std_errors)
      .def_property_readonly("covariance_source",
                             [](const EstimationResult& r) { return std::string(to_string(r.covariance_source)); })
      .def_readonly("ll0", &EstimationResult::ll0)
      .def_readonly("ll1", &EstimationResult::ll1)
      .def_readonly("rho", &EstimationResult::rho)
      .def_readonly("rho_adjusted", &EstimationResult::rho_adjusted)
      .def_readonly("n_free_params", &EstimationResult::n_free_params)
      .def_readonly("n_observations", &EstimationResult::n_observations)
      .def_readonly("converged", &EstimationResult::converged)
      .def_readonly("iterations", &EstimationResult::iterations)
      .def_readonly("gradient_norm", &EstimationResult::gradient_norm)
      .def_readonly("vot", &EstimationResult::vot);

  py::class_<PoissonModel>(m, "PoissonModel")
      .def_readonly("names", &PoissonModel::names)
      .def_readonly("coefficients", &PoissonModel::coefficients)
      .def_readonly("std_errors", &PoissonModel::std_errors)
      .def_readonly("ll0", &PoissonModel::ll0)
      .def_readonly("ll1", &PoissonModel::ll1)
      .def_readonly("pseudo_r2", &PoissonModel::pseudo_r2)
      .def_readonly("chi_square", &PoissonModel::chi_square)
      .def_readonly("converged", &PoissonModel::converged)
      .def("coefficient", &PoissonModel::coefficient)
      .def("table", [](const PoissonModel& p, const std::string& title) { return format_poisson_table(p, title); },
           py::arg("title") = "Trip generation");

  py::class_<ScenarioResult>(m, "ScenarioResult")
      .def_readonly("scenario_id", &ScenarioResult::scenario_id)
      .def_readonly("mode_shares", &ScenarioResult::mode_shares)
      .def_readonly("destination_shares", &ScenarioResult::destination_shares)
      .def_readonly("mean_accessibility", &ScenarioResult::mean_accessibility)
      .def_readonly("mean_trip_rate", &ScenarioResult::mean_trip_rate)
      .def_readonly("induced_index", &ScenarioResult::induced_index);

  m.def("load_model_spec", &load_model_spec, py::arg("path"));
  m.def("load_params", &load_params, py::arg("path"));
  m.def("save_params", &save_params, py::arg("params"), py::arg("path"));
  m.def("default_initial_parameters", &default_initial_parameters, py::arg("spec"));
  m.def(
      "load_choice_dataset",
      [](const std::filesystem::path& path, const ModelSpec* spec) { return load_choice_dataset(path, spec).data; },
      py::arg("path"), py::arg("spec") = nullptr);
  m.def("save_choice_dataset", &save_choice_dataset, py::arg("data"), py::arg("path"), py::arg("purpose") = "");
  m.def("load_poisson_model", &load_poisson_model, py::arg("path"));
  m.def("corridor_fixture", &make_corridor_fixture, py::arg("purpose"), py::arg("individuals"), py::arg("seed"));
  m.def(
      "synthetic_templates",
      [](const ModelSpec& spec, std::size_t n, std::uint64_t seed) { return make_synthetic_templates(spec, n, seed); },
      py::arg("spec"), py::arg("individuals"), py::arg("seed"));

  m.def(
      "log_likelihood",
      [](const ModelSpec& spec, const ParameterVector& params, const ChoiceDataset& data, unsigned threads) {
        auto v = log_likelihood(spec, params, data, {false, threads});
        return py::make_tuple(v.total, v.per_context.at(Context::RP), v.per_context.at(Context::SP));
      },
      py::arg("spec"), py::arg("params"), py::arg("data"), py::arg("threads") = 1,
      "Returns (total, RP part, SP part).");
  m.def(
      "gradient",
      [](const ModelSpec& spec, const ParameterVector& params, const ChoiceDataset& data, bool finite_difference) {
        auto g = gradient(spec, params, data,
                          finite_difference ? GradientMethod::FiniteDifference : GradientMethod::Analytic);
        std::map<std::string, double> out;
        for (std::size_t i = 0; i < g.names.size(); ++i) out[g.names[i]] = g.values[i];
        return out;
      },
      py::arg("spec"), py::arg("params"), py::arg("data"), py::arg("finite_difference") = false);
  m.def(
      "estimate",
      [](const ModelSpec& spec, const ChoiceDataset& data, const ParameterVector& init, const std::string& ll0,
         unsigned threads, int max_iterations) {
        EstimationOptions opt;
        opt.ll0_convention = parse_ll0_convention(ll0);
        opt.threads = threads;
        opt.max_iterations = max_iterations;
        py::gil_scoped_release release;
        return estimate(spec, data, init, opt);
      },
      py::arg("spec"), py::arg("data"), py::arg("init"), py::arg("ll0_convention") = "equal-shares",
      py::arg("threads") = 1, py::arg("max_iterations") = 500);
  m.def("format_report", &format_report, py::arg("spec"), py::arg("result"));
  m.def("simulate_choices", &simulate_choices, py::arg("spec"), py::arg("params"), py::arg("templates"),
        py::arg("seed"));
  m.def(
      "accessibility",
      [](const ModelSpec& spec, const ParameterVector& params, const ChoiceDataset& data) {
        std::vector<double> out;
        for (const auto& obs : data.observations) out.push_back(accessibility(spec, params, data.schema, obs));
        return out;
      },
      py::arg("spec"), py::arg("params"), py::arg("data"));

  m.def("rho_squared", &rho_squared, py::arg("ll0"), py::arg("ll1"));
  m.def("rho_squared_adjusted", &rho_squared_adjusted, py::arg("ll0"), py::arg("ll1"), py::arg("n_free_params"));
  m.def("value_of_time", py::overload_cast<double, double>(&value_of_time), py::arg("time_coefficient"),
        py::arg("cost_coefficient"));
  m.def(
      "induced_travel_table",
      [](const std::vector<std::pair<std::string, double>>& rates, const std::string& base) {
        std::vector<std::tuple<std::string, double, double>> out;
        for (const auto& r : induced_travel_table(rates, base)) out.emplace_back(r.scenario_id, r.mean_trip_rate, r.index);
        return out;
      },
      py::arg("mean_rates"), py::arg("base_id"));

  m.def(
      "fit_poisson",
      [](const std::vector<std::pair<long, std::map<std::string, double>>>& rows,
         const std::vector<std::string>& covariates, bool intercept) {
        std::vector<TripGenRecord> records;
        for (std::size_t i = 0; i < rows.size(); ++i)
          records.push_back({std::to_string(i + 1), rows[i].first, rows[i].second});
        PoissonOptions opt;
        opt.intercept = intercept;
        return fit_poisson(records, covariates, opt);
      },
      py::arg("records"), py::arg("covariates"), py::arg("intercept") = true,
      "records: list of (trip_count, {covariate: value}).");
  m.def("predict_rate", &predict_rate, py::arg("model"), py::arg("covariates"));

  m.def(
      "run_scenarios",
      [](const ModelSpec& spec, const ParameterVector& params, const ChoiceDataset& data,
         const std::filesystem::path& scenarios, const PoissonModel* trips, unsigned threads) {
        return run_scenarios(spec, params, data, load_scenarios(scenarios), trips, threads);
      },
      py::arg("spec"), py::arg("params"), py::arg("data"), py::arg("scenarios"), py::arg("trip_model") = nullptr,
      py::arg("threads") = 1);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line front end; returns (exit code, stdout, stderr).");
}
