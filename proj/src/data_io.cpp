#include "intercity/data_io.hpp"

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "intercity/errors.hpp"

namespace intercity {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) { return fnv1a_hex(read_text(path)); }

std::string spec_hash(const ModelSpec& spec) { return fnv1a_hex(to_json(spec).dump()); }

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool is_time_or_cost_unit(const std::string& unit) { return unit == "Mil VND" || unit == "min"; }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!key.empty() && key[0] == '_') continue;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

std::set<Context> contexts_from_json(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() == "all") return {Context::RP, Context::SP};
    return {parse_context(j.get<std::string>())};
  }
  if (!j.is_array()) throw ConfigError(where + ": contexts must be a list or \"all\"");
  std::set<Context> out;
  for (const auto& c : j) out.insert(parse_context(c.get<std::string>()));
  return out;
}

json contexts_to_json(const std::set<Context>& cs) {
  json out = json::array();
  for (Context c : cs) out.push_back(std::string(to_string(c)));
  return out;
}

std::vector<Factor> factors_from_json(const json& j) {
  std::vector<Factor> out;
  for (const auto& f : j) out.push_back(Factor::parse(f.get<std::string>()));
  return out;
}

json factors_to_json(const std::vector<Factor>& fs) {
  json out = json::array();
  for (const auto& f : fs) out.push_back(f.to_string());
  return out;
}

UtilityTerm term_from_json(const json& j, bool mode_level, const std::string& where) {
  check_keys(j, {"coefficient", "factors", "modes", "zones", "contexts", "scaled_by_mu"}, where);
  UtilityTerm t;
  t.coefficient = j.at("coefficient").get<std::string>();
  if (j.contains("factors")) t.factors = factors_from_json(j.at("factors"));
  if (j.contains("modes")) t.modes = j.at("modes").get<std::set<std::string>>();
  if (j.contains("zones")) t.zones = j.at("zones").get<std::set<std::string>>();
  if (j.contains("contexts")) t.contexts = contexts_from_json(j.at("contexts"), where);
  t.scaled_by_mu = get_or<bool>(j, "scaled_by_mu", mode_level);
  return t;
}

json term_to_json(const UtilityTerm& t) {
  json j{{"coefficient", t.coefficient},
         {"factors", factors_to_json(t.factors)},
         {"contexts", contexts_to_json(t.contexts)},
         {"scaled_by_mu", t.scaled_by_mu}};
  if (!t.modes.empty()) j["modes"] = t.modes;
  if (!t.zones.empty()) j["zones"] = t.zones;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Choice data

DatasetManifest make_manifest(const ChoiceDataset& data, const std::string& purpose, std::size_t rows) {
  DatasetManifest m;
  m.purpose = purpose;
  m.rows = rows;
  m.observations = data.observations.size();
  m.zones = data.schema.zones();
  m.modes = data.schema.modes();
  m.covariates = data.schema.covariates();
  for (std::size_t i = 0; i < data.schema.los().size(); ++i)
    m.attribute_units[data.schema.los()[i]] = data.schema.los_units()[i];
  std::set<std::string> individuals;
  std::map<Context, std::set<std::string>> per_context;
  m.observations_per_context = {{Context::RP, 0}, {Context::SP, 0}};
  for (const auto& obs : data.observations) {
    individuals.insert(obs.individual_id);
    per_context[obs.context].insert(obs.individual_id);
    ++m.observations_per_context[obs.context];
    if (!obs.chosen) ++m.unchosen;
    for (const auto& a : obs.alternatives)
      ++m.availability[data.schema.zones()[a.zone] + "/" + data.schema.modes()[a.mode]];
  }
  m.individuals = individuals.size();
  m.individuals_per_context = {{Context::RP, per_context[Context::RP].size()},
                               {Context::SP, per_context[Context::SP].size()}};
  return m;
}

json to_json(const DatasetManifest& m) {
  json j;
  j["schema_version"] = m.schema_version;
  j["purpose"] = m.purpose;
  j["rows"] = m.rows;
  j["observations"] = m.observations;
  j["individuals"] = m.individuals;
  j["unchosen"] = m.unchosen;
  j["observations_per_context"] = {{"RP", m.observations_per_context.count(Context::RP) ? m.observations_per_context.at(Context::RP) : 0},
                                   {"SP", m.observations_per_context.count(Context::SP) ? m.observations_per_context.at(Context::SP) : 0}};
  j["individuals_per_context"] = {{"RP", m.individuals_per_context.count(Context::RP) ? m.individuals_per_context.at(Context::RP) : 0},
                                  {"SP", m.individuals_per_context.count(Context::SP) ? m.individuals_per_context.at(Context::SP) : 0}};
  j["attribute_units"] = m.attribute_units;
  j["covariates"] = m.covariates;
  j["zones"] = m.zones;
  j["modes"] = m.modes;
  j["availability"] = m.availability;
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != kDatasetSchemaVersion)
    throw ConfigError("unsupported dataset schema version " + std::to_string(m.schema_version));
  m.purpose = get_or<std::string>(j, "purpose", "");
  m.rows = j.at("rows").get<std::size_t>();
  m.observations = j.at("observations").get<std::size_t>();
  m.individuals = j.at("individuals").get<std::size_t>();
  m.unchosen = get_or<std::size_t>(j, "unchosen", 0);
  if (j.contains("observations_per_context"))
    for (const auto& [k, v] : j.at("observations_per_context").items())
      m.observations_per_context[parse_context(k)] = v.get<std::size_t>();
  if (j.contains("individuals_per_context"))
    for (const auto& [k, v] : j.at("individuals_per_context").items())
      m.individuals_per_context[parse_context(k)] = v.get<std::size_t>();
  m.attribute_units = get_or<std::map<std::string, std::string>>(j, "attribute_units", {});
  m.covariates = get_or<std::vector<std::string>>(j, "covariates", {});
  m.zones = get_or<std::vector<std::string>>(j, "zones", {});
  m.modes = get_or<std::vector<std::string>>(j, "modes", {});
  m.availability = get_or<std::map<std::string, std::size_t>>(j, "availability", {});
  return m;
}

LoadedDataset parse_choice_dataset(std::istream& in, const ModelSpec* spec, const DatasetManifest* sidecar) {
  std::vector<std::string> errors;
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw ValidationError({"no observations"});

  const auto header = split_csv_line(line);
  enum Fixed { kObs, kIndividual, kContext, kZone, kMode, kChosen, kWeight, kAvailable, kFixedCount };
  const char* fixed_names[] = {"obs_id", "individual_id", "context", "zone", "mode", "chosen", "weight", "available"};
  std::array<int, kFixedCount> fixed;
  fixed.fill(-1);
  std::vector<std::string> los_names, los_units, cov_names;
  std::vector<std::size_t> los_cols, cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    bool matched = false;
    for (int f = 0; f < kFixedCount; ++f) {
      if (h == fixed_names[f]) {
        fixed[f] = static_cast<int>(c);
        matched = true;
      }
    }
    if (matched) continue;
    if (h.rfind("los:", 0) == 0) {
      std::string name = h.substr(4), unit;
      auto lb = name.find('[');
      if (lb != std::string::npos && name.back() == ']') {
        unit = name.substr(lb + 1, name.size() - lb - 2);
        name = name.substr(0, lb);
      }
      los_names.push_back(name);
      los_units.push_back(unit);
      los_cols.push_back(c);
    } else if (h.rfind("cov:", 0) == 0) {
      cov_names.push_back(h.substr(4));
      cov_cols.push_back(c);
    } else {
      errors.push_back("header: unknown column '" + h + "'");
    }
  }
  for (int f = 0; f < kWeight; ++f)
    if (fixed[f] < 0) errors.push_back(std::string("header: missing required column '") + fixed_names[f] + "'");
  if (!errors.empty()) throw ValidationError(std::move(errors));

  std::vector<std::string> init_zones, init_modes;
  if (sidecar) {
    init_zones = sidecar->zones;
    init_modes = sidecar->modes;
  } else if (spec) {
    for (const auto& z : spec->zones) init_zones.push_back(z.id);
    for (const auto& m : spec->modes) init_modes.push_back(m.id);
  }

  ChoiceDataset data;
  try {
    data.schema = DatasetSchema(init_zones, init_modes, cov_names, los_names, los_units);
  } catch (const ConfigError& e) {
    throw ValidationError({std::string("header: ") + e.what()});
  }

  if (spec) {
    for (std::size_t i = 0; i < los_names.size(); ++i) {
      auto it = spec->attribute_units.find(los_names[i]);
      if (it != spec->attribute_units.end() && it->second != los_units[i])
        errors.push_back("header: LOS attribute '" + los_names[i] + "' is in '" + los_units[i] +
                         "' but the model expects '" + it->second + "'");
    }
    auto require = [&](const std::vector<Factor>& factors, const std::string& coef) {
      for (const auto& f : factors) {
        if (f.kind == FactorKind::Covariate && !data.schema.covariate_index(f.name))
          errors.push_back("header: missing covariate '" + f.name + "' used by '" + coef + "'");
        if (f.kind == FactorKind::Los && !data.schema.los_index(f.name))
          errors.push_back("header: missing LOS attribute '" + f.name + "' used by '" + coef + "'");
      }
    };
    for (const auto& t : spec->destination_terms) require(t.factors, t.coefficient);
    for (const auto& t : spec->mode_terms) require(t.factors, t.coefficient);
    for (const auto& t : spec->theta.terms) require(t.factors, t.coefficient);
  }

  struct ObsInfo {
    std::size_t first_row;
    std::vector<std::string> raw_covariates;
    std::string context;
    std::string weight;
    std::size_t chosen_row = 0;
  };
  std::unordered_map<std::string, std::size_t> obs_index;
  std::vector<ObsInfo> info;
  std::unordered_map<std::string, std::size_t> seen_keys;
  std::size_t rows = 0;

  while (next_line()) {
    ++rows;
    const std::string row = "row " + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      errors.push_back(row + ": expected " + std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
      continue;
    }
    const std::string& obs_id = fields[fixed[kObs]];
    const std::string& indiv = fields[fixed[kIndividual]];
    const std::string& zone = fields[fixed[kZone]];
    const std::string& mode = fields[fixed[kMode]];
    const std::string key = indiv + '\x1f' + obs_id;

    const std::string full_key = key + '\x1f' + zone + '\x1f' + mode;
    if (auto [it, inserted] = seen_keys.emplace(full_key, line_no); !inserted) {
      errors.push_back(row + ": duplicate (individual, trip, zone, mode) key (" + indiv + ", " + obs_id +
                       ", " + zone + ", " + mode + "), first seen at row " + std::to_string(it->second));
      continue;
    }

    Context ctx = Context::RP;
    try {
      ctx = parse_context(fields[fixed[kContext]]);
    } catch (const ConfigError&) {
      errors.push_back(row + ": unknown context '" + fields[fixed[kContext]] + "'");
      continue;
    }

    auto flag = [&](int col, bool fallback, const char* what) -> std::optional<bool> {
      if (col < 0) return fallback;
      const std::string& v = fields[col];
      if (v == "1" || v == "true") return true;
      if (v == "0" || v == "false" || v.empty()) return false;
      errors.push_back(row + ": " + what + " must be 0 or 1, found '" + v + "'");
      return std::nullopt;
    };
    auto chosen = flag(fixed[kChosen], false, "chosen");
    auto available = flag(fixed[kAvailable], true, "available");
    if (!chosen || !available) continue;
    if (*chosen && !*available) {
      errors.push_back(row + ": chosen alternative (" + zone + ", " + mode + ") is marked unavailable");
      continue;
    }

    if (spec) {
      bool bad = false;
      if (!spec->find_zone(zone)) {
        errors.push_back(row + ": zone '" + zone + "' is not in the model destination set");
        bad = true;
      }
      const Mode* m = spec->find_mode(mode);
      if (!m) {
        errors.push_back(row + ": mode '" + mode + "' is not in the model mode universe");
        bad = true;
      } else if (*available && !m->available(ctx, zone)) {
        errors.push_back(row + ": mode '" + mode + "' is not offered at (" + std::string(to_string(ctx)) +
                         ", " + zone + ") by the model");
        bad = true;
      }
      if (bad) continue;
    }

    std::vector<double> cov(cov_cols.size());
    std::vector<std::string> raw_cov(cov_cols.size());
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      raw_cov[k] = fields[cov_cols[k]];
      auto v = parse_double(raw_cov[k]);
      if (!v || !std::isfinite(*v)) {
        errors.push_back(row + ": missing or invalid covariate '" + cov_names[k] + "'");
        v = 0.0;
      }
      cov[k] = *v;
    }

    double weight = 1.0;
    std::string raw_weight = fixed[kWeight] >= 0 ? fields[fixed[kWeight]] : "";
    if (!raw_weight.empty()) {
      auto w = parse_double(raw_weight);
      if (!w || !(*w > 0.0) || !std::isfinite(*w)) {
        errors.push_back(row + ": weight must be a positive number");
      } else {
        weight = *w;
      }
    }

    auto [it, inserted] = obs_index.emplace(key, data.observations.size());
    if (inserted) {
      Observation obs;
      obs.id = obs_id;
      obs.individual_id = indiv;
      obs.context = ctx;
      obs.covariates = cov;
      obs.weight = weight;
      data.observations.push_back(std::move(obs));
      info.push_back({line_no, raw_cov, fields[fixed[kContext]], raw_weight, 0});
    } else {
      const ObsInfo& oi = info[it->second];
      const Observation& obs = data.observations[it->second];
      if (obs.context != ctx)
        errors.push_back(row + ": context differs from row " + std::to_string(oi.first_row) + " of the same trip");
      if (oi.raw_covariates != raw_cov)
        errors.push_back(row + ": covariates differ from row " + std::to_string(oi.first_row) +
                         " of the same trip");
      if (oi.weight != raw_weight)
        errors.push_back(row + ": weight differs from row " + std::to_string(oi.first_row) + " of the same trip");
    }
    const std::size_t oi = it->second;
    if (!*available) continue;

    Alternative alt;
    alt.zone = data.schema.add_zone(zone);
    alt.mode = data.schema.add_mode(mode);
    alt.los.resize(los_cols.size());
    for (std::size_t k = 0; k < los_cols.size(); ++k) {
      auto v = parse_double(fields[los_cols[k]]);
      if (!v || !std::isfinite(*v)) {
        errors.push_back(row + ": missing or non-finite LOS attribute '" + los_names[k] + "'");
        v = 0.0;
      } else if (*v < 0.0 && is_time_or_cost_unit(los_units[k])) {
        errors.push_back(row + ": negative " + los_names[k] + " (" + fields[los_cols[k]] + ")");
      }
      alt.los[k] = *v;
    }
    Observation& obs = data.observations[oi];
    if (*chosen) {
      if (obs.chosen) {
        errors.push_back(row + ": second chosen alternative for trip '" + obs_id + "' (first at row " +
                         std::to_string(info[oi].chosen_row) + ")");
      } else {
        obs.chosen = obs.alternatives.size();
        info[oi].chosen_row = line_no;
      }
    }
    obs.alternatives.push_back(std::move(alt));
  }

  for (std::size_t i = 0; i < data.observations.size(); ++i)
    if (data.observations[i].alternatives.empty())
      errors.push_back("row " + std::to_string(info[i].first_row) + ": trip '" + data.observations[i].id +
                       "' has no available alternative");
  if (data.observations.empty() && errors.empty()) errors.push_back("no observations");

  LoadedDataset out;
  out.manifest = make_manifest(data, spec ? std::string(to_string(spec->purpose)) : std::string(), rows);
  if (sidecar) {
    out.manifest.purpose = sidecar->purpose.empty() ? out.manifest.purpose : sidecar->purpose;
    auto check = [&](const char* what, std::size_t declared, std::size_t parsed) {
      if (declared != parsed)
        errors.push_back(std::string("manifest: ") + what + " declared " + std::to_string(declared) +
                         " but the file has " + std::to_string(parsed));
    };
    check("rows", sidecar->rows, out.manifest.rows);
    check("observations", sidecar->observations, out.manifest.observations);
    check("individuals", sidecar->individuals, out.manifest.individuals);
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  out.data = std::move(data);
  return out;
}

LoadedDataset load_choice_dataset(const std::filesystem::path& path, const ModelSpec* spec) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::filesystem::path side = path;
  side += ".manifest.json";
  if (std::filesystem::exists(side)) {
    DatasetManifest m = manifest_from_json(read_json(side));
    return parse_choice_dataset(in, spec, &m);
  }
  return parse_choice_dataset(in, spec, nullptr);
}

void write_choice_dataset(const ChoiceDataset& data, std::ostream& out) {
  const auto& s = data.schema;
  out << "obs_id,individual_id,context,zone,mode,chosen,weight";
  for (std::size_t k = 0; k < s.los().size(); ++k) {
    out << ",los:" << s.los()[k];
    if (!s.los_units()[k].empty()) out << "[" << s.los_units()[k] << "]";
  }
  for (const auto& c : s.covariates()) out << ",cov:" << c;
  out << "\n";
  for (const auto& obs : data.observations) {
    std::string covs;
    for (double v : obs.covariates) covs += "," + format_double(v);
    for (std::size_t a = 0; a < obs.alternatives.size(); ++a) {
      const auto& alt = obs.alternatives[a];
      out << csv_field(obs.id) << "," << csv_field(obs.individual_id) << "," << to_string(obs.context) << ","
          << csv_field(s.zones()[alt.zone]) << "," << csv_field(s.modes()[alt.mode]) << ","
          << (obs.chosen && *obs.chosen == a ? 1 : 0) << "," << format_double(obs.weight);
      for (double v : alt.los) out << "," << format_double(v);
      out << covs << "\n";
    }
  }
}

void save_choice_dataset(const ChoiceDataset& data, const std::filesystem::path& path,
                         const std::string& purpose) {
  std::ostringstream os;
  write_choice_dataset(data, os);
  write_text(path, os.str());
  std::size_t rows = 0;
  for (const auto& obs : data.observations) rows += obs.alternatives.size();
  std::filesystem::path side = path;
  side += ".manifest.json";
  write_text(side, to_json(make_manifest(data, purpose, rows)).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Model spec

json to_json(const ModelSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["purpose"] = std::string(to_string(spec.purpose));
  json zones = json::array();
  for (const auto& z : spec.zones) zones.push_back({{"id", z.id}, {"attributes", z.attributes}});
  j["zones"] = zones;
  json modes = json::array();
  for (const auto& m : spec.modes) {
    json mj{{"id", m.id}};
    if (!m.availability.empty()) {
      json av = json::object();
      for (const auto& [ctx, zone] : m.availability) av[std::string(to_string(ctx))].push_back(zone);
      mj["availability"] = av;
    }
    modes.push_back(mj);
  }
  j["modes"] = modes;
  j["destination_terms"] = json::array();
  for (const auto& t : spec.destination_terms) j["destination_terms"].push_back(term_to_json(t));
  j["mode_terms"] = json::array();
  for (const auto& t : spec.mode_terms) j["mode_terms"].push_back(term_to_json(t));
  json theta{{"terms", json::array()}};
  for (const auto& t : spec.theta.terms)
    theta["terms"].push_back(
        {{"coefficient", t.coefficient}, {"factors", factors_to_json(t.factors)}, {"contexts", contexts_to_json(t.contexts)}});
  if (spec.theta.fixed_value) theta["fixed"] = *spec.theta.fixed_value;
  j["theta"] = theta;
  j["scale"] = {{"coefficient", spec.scale.coefficient}, {"context", std::string(to_string(spec.scale.context))}};
  j["attribute_units"] = spec.attribute_units;
  j["vot"] = json::array();
  for (const auto& v : spec.vot)
    j["vot"].push_back({{"label", v.label}, {"time", v.time_coefficient}, {"cost", v.cost_coefficient}});
  return j;
}

ModelSpec model_spec_from_json(const json& j) {
  try {
    check_keys(j, {"name", "purpose", "zones", "modes", "destination_terms", "mode_terms", "theta", "scale",
                   "attribute_units", "vot"},
               "model spec");
    ModelSpec s;
    s.name = get_or<std::string>(j, "name", "");
    s.purpose = parse_purpose(j.at("purpose").get<std::string>());
    for (const auto& z : j.at("zones")) {
      check_keys(z, {"id", "attributes"}, "zone");
      s.zones.push_back({z.at("id").get<std::string>(), get_or<std::map<std::string, double>>(z, "attributes", {})});
    }
    for (const auto& m : j.at("modes")) {
      check_keys(m, {"id", "availability"}, "mode");
      Mode mode{m.at("id").get<std::string>(), {}};
      if (m.contains("availability"))
        for (const auto& [ctx, zones] : m.at("availability").items())
          for (const auto& z : zones) mode.availability.insert({parse_context(ctx), z.get<std::string>()});
      s.modes.push_back(std::move(mode));
    }
    if (j.contains("destination_terms")) {
      std::size_t i = 0;
      for (const auto& t : j.at("destination_terms"))
        s.destination_terms.push_back(term_from_json(t, false, "destination term " + std::to_string(i++)));
    }
    if (j.contains("mode_terms")) {
      std::size_t i = 0;
      for (const auto& t : j.at("mode_terms"))
        s.mode_terms.push_back(term_from_json(t, true, "mode term " + std::to_string(i++)));
    }
    if (j.contains("theta")) {
      const auto& th = j.at("theta");
      check_keys(th, {"terms", "fixed"}, "theta");
      if (th.contains("terms")) {
        std::size_t i = 0;
        for (const auto& t : th.at("terms")) {
          std::string where = "theta term " + std::to_string(i++);
          check_keys(t, {"coefficient", "factors", "contexts"}, where);
          ThetaTerm tt;
          tt.coefficient = t.at("coefficient").get<std::string>();
          if (t.contains("factors")) tt.factors = factors_from_json(t.at("factors"));
          if (t.contains("contexts")) tt.contexts = contexts_from_json(t.at("contexts"), where);
          s.theta.terms.push_back(std::move(tt));
        }
      }
      if (th.contains("fixed") && !th.at("fixed").is_null()) s.theta.fixed_value = th.at("fixed").get<double>();
    }
    if (j.contains("scale")) {
      const auto& sc = j.at("scale");
      check_keys(sc, {"coefficient", "context"}, "scale");
      s.scale.coefficient = get_or<std::string>(sc, "coefficient", "mu");
      s.scale.context = parse_context(get_or<std::string>(sc, "context", "SP"));
    }
    s.attribute_units = get_or<std::map<std::string, std::string>>(j, "attribute_units", {});
    if (j.contains("vot"))
      for (const auto& v : j.at("vot")) {
        check_keys(v, {"label", "time", "cost"}, "vot");
        s.vot.push_back({v.at("label").get<std::string>(), v.at("time").get<std::string>(), v.at("cost").get<std::string>()});
      }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model spec: ") + e.what());
  }
}

ModelSpec load_model_spec(const std::filesystem::path& path) {
  ModelSpec s = model_spec_from_json(read_json(path));
  s.validate();
  return s;
}

void save_model_spec(const ModelSpec& spec, const std::filesystem::path& path) {
  write_text(path, to_json(spec).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Parameters

json to_json(const ParameterVector& params) {
  json arr = json::array();
  for (const auto& p : params.entries()) arr.push_back({{"name", p.name}, {"value", p.value}, {"fixed", p.fixed}});
  return {{"parameters", arr}};
}

ParameterVector params_from_json(const json& j) {
  try {
    check_keys(j, {"parameters"}, "parameter file");
    ParameterVector out;
    for (const auto& p : j.at("parameters")) {
      check_keys(p, {"name", "value", "fixed"}, "parameter");
      const std::string name = p.at("name").get<std::string>();
      if (!p.at("value").is_number()) throw ConfigError("parameter '" + name + "' has a non-numeric value");
      const double v = p.at("value").get<double>();
      if (!std::isfinite(v)) throw ConfigError("parameter '" + name + "' is not finite");
      out.add(name, v, get_or<bool>(p, "fixed", false));
    }
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("parameter file: ") + e.what());
  }
}

ParameterVector load_params(const std::filesystem::path& path) { return params_from_json(read_json(path)); }

void save_params(const ParameterVector& params, const std::filesystem::path& path) {
  write_text(path, to_json(params).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Estimation results

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

json to_json(const EstimationResult& r, const std::string& hash) {
  json j;
  j["spec_hash"] = hash;
  json params = json::array();
  for (const auto& p : r.params.entries()) {
    json e{{"name", p.name}, {"value", p.value}, {"fixed", p.fixed}};
    auto it = r.std_errors.find(p.name);
    if (it != r.std_errors.end()) e["std_error"] = finite_or_null(it->second);
    params.push_back(e);
  }
  j["parameters"] = params;
  j["covariance_source"] = std::string(to_string(r.covariance_source));
  j["free_names"] = r.free_names;
  json cov = json::array();
  for (double v : r.covariance) cov.push_back(finite_or_null(v));
  j["covariance"] = cov;
  j["ll0"] = r.ll0;
  j["ll0_convention"] = std::string(to_string(r.ll0_convention));
  j["ll1"] = r.ll1;
  j["rho"] = r.rho;
  j["rho_adjusted"] = r.rho_adjusted;
  j["n_free_params"] = r.n_free_params;
  j["n_observations"] = r.n_observations;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["gradient_norm"] = r.gradient_norm;
  j["termination"] = r.termination;
  json vot = json::object();
  for (const auto& [k, v] : r.vot) vot[k] = finite_or_null(v);
  j["vot"] = vot;
  return j;
}

EstimationResult estimation_result_from_json(const json& j) {
  try {
    EstimationResult r;
    for (const auto& p : j.at("parameters")) {
      const std::string name = p.at("name").get<std::string>();
      r.params.add(name, p.at("value").get<double>(), get_or<bool>(p, "fixed", false));
      if (p.contains("std_error")) r.std_errors[name] = number_or_nan(p.at("std_error"));
    }
    const std::string src = j.at("covariance_source").get<std::string>();
    r.covariance_source = src == "hessian" ? CovarianceSource::Hessian
                          : src == "bhhh"  ? CovarianceSource::Bhhh
                                           : CovarianceSource::Unavailable;
    r.free_names = j.at("free_names").get<std::vector<std::string>>();
    for (const auto& v : j.at("covariance")) r.covariance.push_back(number_or_nan(v));
    r.ll0 = j.at("ll0").get<double>();
    r.ll0_convention = parse_ll0_convention(j.at("ll0_convention").get<std::string>());
    r.ll1 = j.at("ll1").get<double>();
    r.rho = j.at("rho").get<double>();
    r.rho_adjusted = j.at("rho_adjusted").get<double>();
    r.n_free_params = j.at("n_free_params").get<std::size_t>();
    r.n_observations = j.at("n_observations").get<std::size_t>();
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.gradient_norm = j.at("gradient_norm").get<double>();
    r.termination = j.at("termination").get<std::string>();
    for (const auto& [k, v] : j.at("vot").items()) r.vot[k] = number_or_nan(v);
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("estimation result: ") + e.what());
  }
}

void save_results(const EstimationResult& r, const ModelSpec& spec, const std::filesystem::path& path) {
  write_text(path, to_json(r, spec_hash(spec)).dump(2) + "\n");
}

EstimationResult load_results(const std::filesystem::path& path, std::string* hash) {
  json j = read_json(path);
  if (hash) *hash = get_or<std::string>(j, "spec_hash", "");
  return estimation_result_from_json(j);
}

// ---------------------------------------------------------------------------
// Scenarios

namespace {

json target_to_json(const TargetRef& t) {
  json j = json::object();
  if (t.mode) j["mode"] = *t.mode;
  if (t.zone) j["zone"] = *t.zone;
  return j;
}

TargetRef target_from_json(const json& j, const std::string& where) {
  check_keys(j, {"mode", "zone"}, where);
  TargetRef t;
  if (j.contains("mode")) t.mode = j.at("mode").get<std::string>();
  if (j.contains("zone")) t.zone = j.at("zone").get<std::string>();
  return t;
}

}  // namespace

json to_json(const ScenarioSet& s) {
  json j;
  j["base"] = s.base_id;
  j["distance_classes"] = s.distance_classes;
  j["scenarios"] = json::array();
  for (const auto& sc : s.scenarios) {
    json sj{{"id", sc.id}, {"description", sc.description}};
    json purposes = json::array();
    for (Purpose p : sc.purposes) purposes.push_back(std::string(to_string(p)));
    sj["purposes"] = purposes;
    if (!sc.note.empty()) sj["note"] = sc.note;
    sj["transformations"] = json::array();
    for (const auto& t : sc.transformations) {
      json tj{{"action", std::string(to_string(t.action))}, {"target", target_to_json(t.target)}};
      if (!t.attribute.empty()) tj["attribute"] = t.attribute;
      if (t.action == TransformAction::Scale || t.action == TransformAction::Copy) tj["factor"] = t.factor;
      if (t.action == TransformAction::Set) tj["value"] = t.value;
      if (t.source.mode || t.source.zone) tj["source"] = target_to_json(t.source);
      if (!t.source_attribute.empty()) tj["source_attribute"] = t.source_attribute;
      sj["transformations"].push_back(tj);
    }
    j["scenarios"].push_back(sj);
  }
  return j;
}

ScenarioSet scenario_set_from_json(const json& j) {
  try {
    check_keys(j, {"base", "distance_classes", "scenarios"}, "scenario config");
    ScenarioSet s;
    s.base_id = j.at("base").get<std::string>();
    s.distance_classes = get_or<std::map<std::string, std::string>>(j, "distance_classes", {});
    std::set<std::string> ids;
    for (const auto& sj : j.at("scenarios")) {
      Scenario sc;
      sc.id = sj.at("id").get<std::string>();
      const std::string where = "scenario " + sc.id;
      check_keys(sj, {"id", "description", "purposes", "note", "transformations"}, where);
      if (!ids.insert(sc.id).second) throw ConfigError("scenario '" + sc.id + "' declared twice");
      sc.description = get_or<std::string>(sj, "description", "");
      sc.note = get_or<std::string>(sj, "note", "");
      if (sj.contains("purposes")) {
        sc.purposes.clear();
        for (const auto& p : sj.at("purposes")) sc.purposes.insert(parse_purpose(p.get<std::string>()));
      }
      std::size_t k = 0;
      for (const auto& tj : get_or<json>(sj, "transformations", json::array())) {
        const std::string tw = where + ", transformation " + std::to_string(k++);
        check_keys(tj, {"action", "target", "attribute", "factor", "value", "source", "source_attribute"}, tw);
        Transformation t;
        t.action = parse_transform_action(tj.at("action").get<std::string>());
        t.target = target_from_json(tj.at("target"), tw);
        t.attribute = get_or<std::string>(tj, "attribute", "");
        t.factor = get_or<double>(tj, "factor", 1.0);
        t.value = get_or<double>(tj, "value", 0.0);
        if (tj.contains("source")) t.source = target_from_json(tj.at("source"), tw);
        t.source_attribute = get_or<std::string>(tj, "source_attribute", "");
        sc.transformations.push_back(std::move(t));
      }
      s.scenarios.push_back(std::move(sc));
    }
    if (!s.find(s.base_id)) throw ConfigError("base scenario '" + s.base_id + "' is not defined");
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }
}

ScenarioSet load_scenarios(const std::filesystem::path& path) { return scenario_set_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Trip generation

json to_json(const PoissonModel& m) {
  json coefs = json::array();
  for (std::size_t i = 0; i < m.names.size(); ++i)
    coefs.push_back({{"name", m.names[i]},
                     {"value", m.coefficients[i]},
                     {"std_error", i < m.std_errors.size() ? finite_or_null(m.std_errors[i]) : json(nullptr)}});
  return {{"accessibility_covariate", m.accessibility_covariate},
          {"coefficients", coefs},
          {"ll0", m.ll0},
          {"ll1", m.ll1},
          {"pseudo_r2", m.pseudo_r2},
          {"chi_square", m.chi_square},
          {"n_records", m.n_records},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"gradient_norm", m.gradient_norm}};
}

PoissonModel poisson_model_from_json(const json& j) {
  try {
    check_keys(j, {"accessibility_covariate", "coefficients", "ll0", "ll1", "pseudo_r2", "chi_square",
                   "n_records", "converged", "iterations", "gradient_norm"},
               "Poisson model");
    PoissonModel m;
    m.accessibility_covariate = get_or<std::string>(j, "accessibility_covariate", "accessibility");
    for (const auto& c : j.at("coefficients")) {
      check_keys(c, {"name", "value", "std_error"}, "Poisson coefficient");
      m.names.push_back(c.at("name").get<std::string>());
      m.coefficients.push_back(c.at("value").get<double>());
      m.std_errors.push_back(c.contains("std_error") ? number_or_nan(c.at("std_error"))
                                                     : std::numeric_limits<double>::quiet_NaN());
    }
    m.ll0 = get_or<double>(j, "ll0", 0.0);
    m.ll1 = get_or<double>(j, "ll1", 0.0);
    m.pseudo_r2 = get_or<double>(j, "pseudo_r2", 0.0);
    m.chi_square = get_or<double>(j, "chi_square", 0.0);
    m.n_records = get_or<std::size_t>(j, "n_records", 0);
    m.converged = get_or<bool>(j, "converged", true);
    m.iterations = get_or<int>(j, "iterations", 0);
    m.gradient_norm = get_or<double>(j, "gradient_norm", 0.0);
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("Poisson model: ") + e.what());
  }
}

PoissonModel load_poisson_model(const std::filesystem::path& path) {
  return poisson_model_from_json(read_json(path));
}

void save_poisson_model(const PoissonModel& m, const std::filesystem::path& path) {
  write_text(path, to_json(m).dump(2) + "\n");
}

std::vector<TripGenRecord> load_trip_records(const std::filesystem::path& path,
                                             const std::vector<CategoricalEncoding>& categorical) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> errors;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw ValidationError({"no trip generation records"});
  const auto header = split_csv_line(line);
  int id_col = -1, trips_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "individual_id") id_col = static_cast<int>(c);
    if (header[c] == "trips") trips_col = static_cast<int>(c);
  }
  if (id_col < 0 || trips_col < 0) throw ValidationError({"header: need 'individual_id' and 'trips' columns"});

  std::vector<TripGenRecord> out;
  while (next_line()) {
    const std::string row = "row " + std::to_string(line_no);
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      errors.push_back(row + ": wrong number of fields");
      continue;
    }
    TripGenRecord r;
    r.individual_id = f[id_col];
    auto trips = parse_double(f[trips_col]);
    if (!trips || *trips < 0 || std::floor(*trips) != *trips) {
      errors.push_back(row + ": trips must be a nonnegative integer");
      continue;
    }
    r.trip_count = static_cast<long>(*trips);
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (static_cast<int>(c) == id_col || static_cast<int>(c) == trips_col) continue;
      auto enc = std::find_if(categorical.begin(), categorical.end(),
                              [&](const CategoricalEncoding& e) { return e.column == header[c]; });
      if (enc != categorical.end()) {
        try {
          for (const auto& [k, v] : enc->encode(f[c])) r.covariates[k] = v;
        } catch (const ConfigError& e) {
          errors.push_back(row + ": " + e.what());
        }
        continue;
      }
      auto v = parse_double(f[c]);
      if (!v || !std::isfinite(*v)) {
        errors.push_back(row + ": invalid value for '" + header[c] + "'");
        continue;
      }
      r.covariates[header[c]] = *v;
    }
    out.push_back(std::move(r));
  }
  if (out.empty() && errors.empty()) errors.push_back("no trip generation records");
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return out;
}

std::vector<std::string> csv_column_levels(const std::filesystem::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  const auto col = std::find(header.begin(), header.end(), column);
  if (col == header.end()) throw ConfigError("'" + path.string() + "' has no column '" + column + "'");
  const auto c = static_cast<std::size_t>(col - header.begin());
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (c < f.size() && std::find(out.begin(), out.end(), f[c]) == out.end()) out.push_back(f[c]);
  }
  return out;
}

}  // namespace intercity
