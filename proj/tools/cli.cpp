#include "intercity/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "intercity/corridor.hpp"
#include "intercity/data_io.hpp"
#include "intercity/errors.hpp"
#include "intercity/estimation.hpp"
#include "intercity/scenario.hpp"
#include "intercity/trip_generation.hpp"

namespace intercity {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string spec, data, params, scenarios, out, tripgen;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool dry_run = false;
  std::string ll0 = "equal-shares";
  std::size_t individuals = 1000;
  int max_iterations = 500;
  std::vector<std::string> contexts{"RP", "SP"};
  std::vector<std::string> covariates;
  std::vector<std::string> categorical;
};

std::string num(double v, int precision = 10) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Provenance record written as <out>/manifest.json by every run with --out.
class RunManifest {
 public:
  explicit RunManifest(std::string command)
      : command_(std::move(command)), started_(utc_now()), t0_(std::chrono::steady_clock::now()) {}

  void input(const std::string& role, const std::string& path) {
    if (!path.empty()) inputs_[role] = {{"path", path}, {"hash", file_hash(path)}};
  }
  void seed(std::uint64_t s) { seed_ = s; }
  void output(const fs::path& p) { outputs_.push_back(p.string()); }

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command_;
    j["tool_version"] = kToolVersion;
    j["inputs"] = inputs_;
    j["seed"] = seed_ ? json(*seed_) : json(nullptr);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    j["timing"] = {{"started_utc", started_}, {"wall_seconds", secs}};
    j["outputs"] = outputs_;
    write_text(dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
  json inputs_ = json::object();
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> outputs_;
};

std::set<Context> parse_contexts(const std::vector<std::string>& names) {
  std::set<Context> out;
  for (const auto& n : names) out.insert(parse_context(n));
  return out;
}

ParameterVector load_and_check_params(const ModelSpec& spec, const std::string& path) {
  ParameterVector p = load_params(path);
  spec.validate(p);
  return p;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_text(path, text);
}

// -- estimate ---------------------------------------------------------------

int cmd_estimate(const Options& o, std::ostream& out) {
  ModelSpec spec = load_model_spec(o.spec);
  ParameterVector init = o.params.empty() ? default_initial_parameters(spec) : load_params(o.params);
  spec.validate(init);
  LoadedDataset loaded = load_choice_dataset(o.data, &spec);
  if (loaded.manifest.unchosen > 0)
    throw ValidationError({std::to_string(loaded.manifest.unchosen) +
                           " observation(s) have no chosen alternative; estimation needs observed choices"});
  if (o.dry_run) {
    out << to_json(loaded.manifest).dump(2) << "\n";
    return kExitOk;
  }

  EstimationOptions opt;
  opt.threads = o.threads;
  opt.max_iterations = o.max_iterations;
  opt.ll0_convention = parse_ll0_convention(o.ll0);
  EstimationResult r = estimate(spec, loaded.data, init, opt);
  const std::string report = format_report(spec, r);
  out << report;

  if (!o.out.empty()) {
    const fs::path dir(o.out);
    RunManifest m("estimate");
    m.input("spec", o.spec);
    m.input("data", o.data);
    m.input("params", o.params);
    save_results(r, spec, dir / "results.json");
    save_params(r.params, dir / "params.json");
    write_text(dir / "report.txt", report);
    for (const char* f : {"results.json", "params.json", "report.txt"}) m.output(dir / f);
    m.write(dir);
  }
  return r.converged ? kExitOk : kExitNonConvergence;
}

// -- simulate ---------------------------------------------------------------

int cmd_simulate(const Options& o, std::ostream& out) {
  ModelSpec spec = load_model_spec(o.spec);
  ParameterVector params = load_and_check_params(spec, o.params);
  ScenarioSet scenarios = load_scenarios(o.scenarios);
  ChoiceDataset data = o.data.empty() ? make_corridor_fixture(spec.purpose, o.individuals, o.seed)
                                      : load_choice_dataset(o.data, &spec).data;
  std::optional<PoissonModel> trips;
  if (!o.tripgen.empty()) trips = load_poisson_model(o.tripgen);
  if (o.dry_run) {
    out << to_json(make_manifest(data, std::string(to_string(spec.purpose)), 0)).dump(2) << "\n";
    return kExitOk;
  }

  auto results = run_scenarios(spec, params, data, scenarios, trips ? &*trips : nullptr, o.threads);

  const fs::path dir(o.out);
  RunManifest m("simulate");
  m.input("spec", o.spec);
  m.input("params", o.params);
  m.input("scenarios", o.scenarios);
  m.input("data", o.data);
  m.input("tripgen", o.tripgen);
  if (o.data.empty()) m.seed(o.seed);

  std::vector<std::string> mode_rows{"scenario,class,mode,share"};
  std::vector<std::string> dest_rows{"scenario,zone,share"};
  std::vector<std::string> summary{"scenario,mean_accessibility,mean_trip_rate,induced_index"};
  for (const auto& r : results) {
    for (const auto& [cls, shares] : r.mode_shares)
      for (const auto& [mode, s] : shares) mode_rows.push_back(r.scenario_id + "," + cls + "," + mode + "," + num(s));
    for (const auto& [zone, s] : r.destination_shares) dest_rows.push_back(r.scenario_id + "," + zone + "," + num(s));
    summary.push_back(r.scenario_id + "," + num(r.mean_accessibility) + "," +
                      (r.mean_trip_rate ? num(*r.mean_trip_rate) : "") + "," +
                      (r.induced_index ? num(*r.induced_index) : ""));
  }
  write_lines(dir / "mode_shares.csv", mode_rows);
  write_lines(dir / "destination_shares.csv", dest_rows);
  write_lines(dir / "summary.csv", summary);
  for (const char* f : {"mode_shares.csv", "destination_shares.csv", "summary.csv"}) m.output(dir / f);

  out << "scenario  mean_accessibility  mean_trip_rate  index\n";
  for (const auto& r : results) {
    out << std::left << std::setw(10) << r.scenario_id << std::setw(20) << num(r.mean_accessibility, 6)
        << std::setw(16) << (r.mean_trip_rate ? num(*r.mean_trip_rate, 6) : "-")
        << (r.induced_index ? num(*r.induced_index, 5) : "-") << "\n";
  }
  if (trips && std::any_of(results.begin(), results.end(), [](const auto& r) { return r.induced_index.has_value(); })) {
    std::vector<std::string> rows{"scenario,mean_trip_rate,index_vs_base"};
    for (const auto& row : induced_travel_table(results, scenarios.base_id))
      rows.push_back(row.scenario_id + "," + num(row.mean_trip_rate) + "," + num(row.index));
    write_lines(dir / "induced_travel.csv", rows);
    m.output(dir / "induced_travel.csv");
  }
  m.write(dir);
  return kExitOk;
}

// -- accessibility ----------------------------------------------------------

int cmd_accessibility(const Options& o, std::ostream& out) {
  ModelSpec spec = load_model_spec(o.spec);
  ParameterVector params = load_and_check_params(spec, o.params);
  ChoiceDataset data = load_choice_dataset(o.data, &spec).data;
  if (o.dry_run) {
    out << data.observations.size() << " observations validated\n";
    return kExitOk;
  }
  NestedLogit model(spec, data.schema, params);
  const auto values = params.values();

  // One row per individual: the first SP observation, else the first one seen.
  std::vector<std::string> order;
  std::map<std::string, const Observation*> pick;
  for (const auto& obs : data.observations) {
    auto [it, inserted] = pick.emplace(obs.individual_id, &obs);
    if (inserted) order.push_back(obs.individual_id);
    else if (it->second->context != Context::SP && obs.context == Context::SP) it->second = &obs;
  }
  std::string header = "individual_id,obs_id,accessibility";
  for (const auto& z : data.schema.zones()) header += ",V:" + z;
  std::vector<std::string> rows{header};
  for (const auto& id : order) {
    const Observation& obs = *pick[id];
    const ChoiceState st = model.evaluate(values, obs, Context::SP);
    std::vector<std::string> v(data.schema.zones().size());
    for (const auto& nest : st.nests) v[nest.zone] = num(nest.utility, 17);
    std::string row = id + "," + obs.id + "," + num(st.log_denominator, 17);
    for (const auto& cell : v) row += "," + cell;
    rows.push_back(row);
  }
  const fs::path dir(o.out);
  write_lines(dir / "accessibility.csv", rows);
  RunManifest m("accessibility");
  m.input("spec", o.spec);
  m.input("params", o.params);
  m.input("data", o.data);
  m.output(dir / "accessibility.csv");
  m.write(dir);
  out << "accessibility for " << order.size() << " individuals written to " << (dir / "accessibility.csv").string()
      << "\n";
  return kExitOk;
}

// -- synth ------------------------------------------------------------------

int cmd_synth(const Options& o, std::ostream& out) {
  ModelSpec spec = load_model_spec(o.spec);
  ParameterVector params = load_and_check_params(spec, o.params);
  ChoiceDataset templates = o.data.empty()
                                ? make_synthetic_templates(spec, o.individuals, o.seed, parse_contexts(o.contexts))
                                : load_choice_dataset(o.data, &spec).data;
  if (o.dry_run) {
    out << to_json(make_manifest(templates, std::string(to_string(spec.purpose)), 0)).dump(2) << "\n";
    return kExitOk;
  }
  ChoiceDataset simulated = simulate_choices(spec, params, templates, o.seed ^ 0x9e3779b97f4a7c15ULL);
  const fs::path dir(o.out);
  const fs::path csv = dir / "synthetic.csv";
  save_choice_dataset(simulated, csv, std::string(to_string(spec.purpose)));
  RunManifest m("synth");
  m.input("spec", o.spec);
  m.input("params", o.params);
  m.input("data", o.data);
  m.seed(o.seed);
  m.output(csv);
  m.output(csv.string() + ".manifest.json");
  m.write(dir);
  out << simulated.observations.size() << " observations written to " << csv.string() << "\n";
  return kExitOk;
}

// -- validate ---------------------------------------------------------------

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<std::string> problems;
  auto attempt = [&](const std::string& what, const std::function<void()>& fn) {
    try {
      fn();
      out << "ok: " << what << "\n";
    } catch (const ValidationError& e) {
      for (const auto& msg : e.messages()) problems.push_back(what + ": " + msg);
    } catch (const std::exception& e) {
      problems.push_back(what + ": " + e.what());
    }
  };
  std::optional<ModelSpec> spec;
  std::optional<ParameterVector> params;
  std::optional<ChoiceDataset> data;
  if (!o.spec.empty()) attempt(o.spec, [&] { spec = load_model_spec(o.spec); });
  if (!o.params.empty())
    attempt(o.params, [&] {
      params = load_params(o.params);
      if (spec) spec->validate(*params);
    });
  if (!o.data.empty()) attempt(o.data, [&] { data = load_choice_dataset(o.data, spec ? &*spec : nullptr).data; });
  if (!o.scenarios.empty())
    attempt(o.scenarios, [&] {
      ScenarioSet set = load_scenarios(o.scenarios);
      if (data && spec)
        for (const auto& s : set.scenarios)
          if (s.applies_to(spec->purpose)) apply_scenario(*data, spec->zones, s);
    });
  if (!o.tripgen.empty()) attempt(o.tripgen, [&] { load_poisson_model(o.tripgen); });
  if (o.spec.empty() && o.params.empty() && o.data.empty() && o.scenarios.empty() && o.tripgen.empty())
    problems.push_back("nothing to validate; pass --spec, --params, --data, --scenarios or --tripgen");
  for (const auto& p : problems) err << "error: " << p << "\n";
  return problems.empty() ? kExitOk : kExitInputError;
}

// -- tripgen ----------------------------------------------------------------

int cmd_tripgen(const Options& o, std::ostream& out) {
  std::vector<CategoricalEncoding> encodings;
  std::vector<std::string> covariates = o.covariates;
  for (const auto& c : o.categorical) {
    const auto eq = c.find('=');
    if (eq == std::string::npos) throw ConfigError("--categorical expects column=base, got '" + c + "'");
    CategoricalEncoding e{c.substr(0, eq), c.substr(eq + 1), {}};
    for (const auto& level : csv_column_levels(o.data, e.column))
      if (level != e.base) e.levels.push_back(level);
    std::sort(e.levels.begin(), e.levels.end());
    for (const auto& d : e.dummy_names()) covariates.push_back(d);
    encodings.push_back(std::move(e));
  }
  auto records = load_trip_records(o.data, encodings);
  if (o.dry_run) {
    out << records.size() << " trip generation records validated\n";
    return kExitOk;
  }
  PoissonModel model = fit_poisson(records, covariates);
  const std::string table = format_poisson_table(model, "Trip generation (Poisson)");
  out << table;
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    save_poisson_model(model, dir / "poisson.json");
    write_text(dir / "poisson.txt", table);
    RunManifest m("tripgen");
    m.input("data", o.data);
    m.output(dir / "poisson.json");
    m.output(dir / "poisson.txt");
    m.write(dir);
  }
  return model.converged ? kExitOk : kExitNonConvergence;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Intercity destination/mode choice, trip generation and scenario simulation"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Options o;

  auto threads = [&](CLI::App* c) { c->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber); };
  auto dry = [&](CLI::App* c) { c->add_flag("--dry-run", o.dry_run, "validate inputs and print the manifest only"); };

  auto* est = app.add_subcommand("estimate", "estimate the nested logit model");
  est->add_option("--spec", o.spec, "model spec (JSON)")->required()->check(CLI::ExistingFile);
  est->add_option("--data", o.data, "choice data (CSV)")->required()->check(CLI::ExistingFile);
  est->add_option("--params", o.params, "starting values and fixed flags (JSON)")->check(CLI::ExistingFile);
  est->add_option("--out", o.out, "output directory");
  est->add_option("--ll0-convention", o.ll0, "null log-likelihood convention")
      ->check(CLI::IsMember({"equal-shares", "constants-only"}));
  est->add_option("--max-iterations", o.max_iterations)->check(CLI::PositiveNumber);
  est->add_option("--seed", o.seed, "recorded for provenance");
  threads(est);
  dry(est);

  auto* sim = app.add_subcommand("simulate", "run scenarios and write share and induced travel tables");
  sim->add_option("--spec", o.spec)->required()->check(CLI::ExistingFile);
  sim->add_option("--params", o.params)->required()->check(CLI::ExistingFile);
  sim->add_option("--scenarios", o.scenarios)->required()->check(CLI::ExistingFile);
  sim->add_option("--data", o.data, "baseline templates (CSV); default: corridor fixture")->check(CLI::ExistingFile);
  sim->add_option("--tripgen", o.tripgen, "Poisson trip generation model (JSON)")->check(CLI::ExistingFile);
  sim->add_option("--individuals,-n", o.individuals, "corridor fixture size when --data is absent");
  sim->add_option("--seed", o.seed, "corridor fixture seed");
  sim->add_option("--out", o.out)->required();
  threads(sim);
  dry(sim);

  auto* acc = app.add_subcommand("accessibility", "per-individual logsum accessibility");
  acc->add_option("--spec", o.spec)->required()->check(CLI::ExistingFile);
  acc->add_option("--params", o.params)->required()->check(CLI::ExistingFile);
  acc->add_option("--data", o.data)->required()->check(CLI::ExistingFile);
  acc->add_option("--out", o.out)->required();
  dry(acc);

  auto* syn = app.add_subcommand("synth", "simulate choices from known parameters");
  syn->add_option("--spec", o.spec)->required()->check(CLI::ExistingFile);
  syn->add_option("--params", o.params)->required()->check(CLI::ExistingFile);
  syn->add_option("--data", o.data, "templates (CSV); default: generated from the spec")->check(CLI::ExistingFile);
  syn->add_option("--individuals,-n", o.individuals)->check(CLI::PositiveNumber);
  syn->add_option("--contexts", o.contexts, "contexts to generate")->delimiter(',');
  syn->add_option("--seed", o.seed);
  syn->add_option("--out", o.out)->required();
  dry(syn);

  auto* val = app.add_subcommand("validate", "check inputs and report every problem");
  val->add_option("--spec", o.spec, "model spec (JSON)");
  val->add_option("--params", o.params, "parameter file (JSON)");
  val->add_option("--data", o.data, "choice data (CSV), needs --spec");
  val->add_option("--scenarios", o.scenarios, "scenario definitions (JSON)");
  val->add_option("--tripgen", o.tripgen, "Poisson trip generation model (JSON)");

  auto* trip = app.add_subcommand("tripgen", "fit a Poisson trip generation model");
  trip->add_option("--data", o.data, "records (CSV with individual_id, trips, covariates)")
      ->required()
      ->check(CLI::ExistingFile);
  trip->add_option("--covariates", o.covariates)->delimiter(',');
  trip->add_option("--categorical", o.categorical, "column=base level")->delimiter(',');
  trip->add_option("--out", o.out);
  dry(trip);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (est->parsed()) return cmd_estimate(o, out);
    if (sim->parsed()) return cmd_simulate(o, out);
    if (acc->parsed()) return cmd_accessibility(o, out);
    if (syn->parsed()) return cmd_synth(o, out);
    if (val->parsed()) return cmd_validate(o, out, err);
    if (trip->parsed()) return cmd_tripgen(o, out);
  } catch (const ValidationError& e) {
    for (const auto& msg : e.messages()) err << "error: " << msg << "\n";
    return kExitInputError;
  } catch (const NumericError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace intercity
