#include "intercity/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "intercity/errors.hpp"
#include "parallel.hpp"

namespace intercity {

std::string_view to_string(TransformAction a) {
  switch (a) {
    case TransformAction::Scale:
      return "scale";
    case TransformAction::Set:
      return "set";
    case TransformAction::Copy:
      return "copy";
    case TransformAction::AddMode:
      return "add-mode";
    case TransformAction::RemoveMode:
      break;
  }
  return "remove-mode";
}

TransformAction parse_transform_action(std::string_view s) {
  if (s == "scale") return TransformAction::Scale;
  if (s == "set") return TransformAction::Set;
  if (s == "copy") return TransformAction::Copy;
  if (s == "add-mode") return TransformAction::AddMode;
  if (s == "remove-mode") return TransformAction::RemoveMode;
  throw ConfigError("unknown transformation action '" + std::string(s) + "'");
}

std::string Transformation::describe() const {
  std::ostringstream os;
  os << to_string(action) << " ";
  if (target.mode) os << *target.mode;
  if (target.mode && target.zone) os << "@";
  if (target.zone) os << *target.zone;
  if (!attribute.empty()) os << "." << attribute;
  if (action == TransformAction::Scale) os << " x" << factor;
  if (action == TransformAction::Set) os << " = " << value;
  if (action == TransformAction::Copy || action == TransformAction::AddMode) {
    os << " from ";
    if (source.mode) os << *source.mode;
    if (source.mode && source.zone) os << "@";
    if (source.zone) os << *source.zone;
    if (action == TransformAction::Copy) {
      os << "." << (source_attribute.empty() ? attribute : source_attribute) << " x" << factor;
    }
  }
  return os.str();
}

const Scenario* ScenarioSet::find(const std::string& id) const {
  for (const auto& s : scenarios)
    if (s.id == id) return &s;
  return nullptr;
}

namespace {

std::string where(const Scenario& s, std::size_t k) {
  return "scenario " + s.id + ", transformation " + std::to_string(k);
}

const Alternative* find_alt(const Observation& obs, std::size_t zone, std::size_t mode) {
  for (const auto& a : obs.alternatives)
    if (a.zone == zone && a.mode == mode) return &a;
  return nullptr;
}

void apply_zone_transform(const Transformation& t, const std::vector<Zone>& base_zones,
                          std::vector<Zone>& zones, const std::string& loc) {
  auto find = [&](std::vector<Zone>& zs, const std::string& id) -> Zone* {
    for (auto& z : zs)
      if (z.id == id) return &z;
    return nullptr;
  };
  auto find_base = [&](const std::string& id) -> const Zone* {
    for (const auto& z : base_zones)
      if (z.id == id) return &z;
    return nullptr;
  };
  Zone* zone = find(zones, *t.target.zone);
  if (!zone) throw ConfigError(loc + ": unknown zone '" + *t.target.zone + "'");
  auto attr = zone->attributes.find(t.attribute);
  if (attr == zone->attributes.end() && t.action != TransformAction::Set)
    throw ConfigError(loc + ": zone '" + zone->id + "' has no attribute '" + t.attribute + "'");
  switch (t.action) {
    case TransformAction::Scale:
      attr->second *= t.factor;
      break;
    case TransformAction::Set:
      zone->attributes[t.attribute] = t.value;
      break;
    case TransformAction::Copy: {
      if (!t.source.zone) throw ConfigError(loc + ": zone copy needs a source zone");
      const Zone* src = find_base(*t.source.zone);
      if (!src) throw ConfigError(loc + ": unknown source zone '" + *t.source.zone + "'");
      const std::string& sa = t.source_attribute.empty() ? t.attribute : t.source_attribute;
      auto it = src->attributes.find(sa);
      if (it == src->attributes.end())
        throw ConfigError(loc + ": source zone '" + src->id + "' has no attribute '" + sa + "'");
      attr->second = t.factor * it->second;
      break;
    }
    default:
      throw ConfigError(loc + ": action '" + std::string(to_string(t.action)) +
                        "' does not apply to zone attributes");
  }
}

void apply_mode_transform(const Transformation& t, const ChoiceDataset& base, ChoiceDataset& out,
                          const std::string& loc) {
  const auto& schema = out.schema;
  std::optional<std::size_t> zone;
  if (t.target.zone) {
    zone = schema.zone_index(*t.target.zone);
    if (!zone) throw ConfigError(loc + ": unknown zone '" + *t.target.zone + "'");
  }

  if (t.action == TransformAction::AddMode) {
    if (!t.source.mode) throw ConfigError(loc + ": add-mode needs a source mode to clone");
    auto src = base.schema.mode_index(*t.source.mode);
    if (!src) throw ConfigError(loc + ": unknown source mode '" + *t.source.mode + "'");
    const std::size_t mode = out.schema.add_mode(*t.target.mode);
    std::size_t added = 0;
    for (auto& obs : out.observations) {
      std::vector<Alternative> extra;
      for (const auto& a : obs.alternatives) {
        if (a.mode != *src || (zone && a.zone != *zone)) continue;
        if (find_alt(obs, a.zone, mode)) continue;
        Alternative clone = a;
        clone.mode = mode;
        extra.push_back(std::move(clone));
      }
      added += extra.size();
      for (auto& e : extra) obs.alternatives.push_back(std::move(e));
    }
    if (added == 0) throw ConfigError(loc + ": add-mode matched no alternatives");
    return;
  }

  auto mode = schema.mode_index(*t.target.mode);
  if (!mode) throw ConfigError(loc + ": unknown mode '" + *t.target.mode + "'");

  if (t.action == TransformAction::RemoveMode) {
    for (auto& obs : out.observations) {
      std::optional<Alternative> chosen;
      if (obs.chosen) chosen = obs.alternatives[*obs.chosen];
      std::erase_if(obs.alternatives, [&](const Alternative& a) {
        return a.mode == *mode && (!zone || a.zone == *zone);
      });
      if (obs.alternatives.empty())
        throw ConfigError(loc + ": removing mode '" + *t.target.mode + "' empties observation '" +
                          obs.id + "'");
      obs.chosen.reset();
      if (chosen) {
        for (std::size_t i = 0; i < obs.alternatives.size(); ++i)
          if (obs.alternatives[i] == *chosen) obs.chosen = i;
      }
    }
    return;
  }

  auto attr = schema.los_index(t.attribute);
  if (!attr) throw ConfigError(loc + ": unknown LOS attribute '" + t.attribute + "'");
  std::optional<std::size_t> src_mode, src_zone, src_attr;
  if (t.action == TransformAction::Copy) {
    if (!t.source.mode) throw ConfigError(loc + ": copy needs a source mode");
    src_mode = base.schema.mode_index(*t.source.mode);
    if (!src_mode) throw ConfigError(loc + ": unknown source mode '" + *t.source.mode + "'");
    if (t.source.zone) {
      src_zone = base.schema.zone_index(*t.source.zone);
      if (!src_zone) throw ConfigError(loc + ": unknown source zone '" + *t.source.zone + "'");
    }
    src_attr = base.schema.los_index(t.source_attribute.empty() ? t.attribute : t.source_attribute);
    if (!src_attr) throw ConfigError(loc + ": unknown source LOS attribute");
  }

  std::size_t touched = 0;
  for (std::size_t i = 0; i < out.observations.size(); ++i) {
    auto& obs = out.observations[i];
    const auto& base_obs = base.observations[i];
    for (auto& a : obs.alternatives) {
      if (a.mode != *mode || (zone && a.zone != *zone)) continue;
      switch (t.action) {
        case TransformAction::Scale:
          a.los[*attr] *= t.factor;
          break;
        case TransformAction::Set:
          a.los[*attr] = t.value;
          break;
        case TransformAction::Copy: {
          // Cells whose source alternative is not offered keep their value.
          const Alternative* src = find_alt(base_obs, src_zone ? *src_zone : a.zone, *src_mode);
          if (!src) continue;
          a.los[*attr] = t.factor * src->los[*src_attr];
          break;
        }
        default:
          break;
      }
      ++touched;
    }
  }
  if (touched == 0) throw ConfigError(loc + ": matched no alternatives");
}

}  // namespace

ScenarioInput apply_scenario(const ChoiceDataset& base, const std::vector<Zone>& zones,
                             const Scenario& scenario) {
  ScenarioInput out{base, zones};
  for (std::size_t k = 0; k < scenario.transformations.size(); ++k) {
    const auto& t = scenario.transformations[k];
    const std::string loc = where(scenario, k);
    if (t.action == TransformAction::Scale && !(t.factor > 0.0))
      throw ConfigError(loc + ": scale factor must be positive");
    if (t.action == TransformAction::Copy && !(t.factor > 0.0))
      throw ConfigError(loc + ": copy factor must be positive");
    if (!t.target.mode && !t.target.zone) throw ConfigError(loc + ": transformation has no target");
    if (t.target.mode) {
      if (t.action != TransformAction::AddMode && t.action != TransformAction::RemoveMode &&
          t.attribute.empty())
        throw ConfigError(loc + ": missing attribute");
      apply_mode_transform(t, base, out.data, loc);
    } else {
      apply_zone_transform(t, zones, out.zones, loc);
    }
  }
  return out;
}

ScenarioResult simulate_shares(const ModelSpec& spec, const ParameterVector& params,
                               const ChoiceDataset& data,
                               const std::map<std::string, std::string>& distance_classes,
                               const PoissonModel* trip_model) {
  for (const auto& z : data.schema.zones())
    if (!distance_classes.count(z))
      throw ConfigError("zone '" + z + "' is missing from the distance-class map");
  NestedLogit model(spec, data.schema, params);
  const auto values = params.values();

  ScenarioResult r;
  std::map<std::string, double> class_mass;
  double total_weight = 0.0, acc_sum = 0.0, rate_sum = 0.0;
  for (const auto& obs : data.observations) {
    const ChoiceState st = model.evaluate(values, obs);
    const double w = obs.weight;
    total_weight += w;
    for (const auto& nest : st.nests) {
      const std::string& zone = data.schema.zones()[nest.zone];
      const std::string& cls = distance_classes.at(zone);
      r.destination_shares[zone] += w * nest.probability;
      class_mass[cls] += w * nest.probability;
      auto& shares = r.mode_shares[cls];
      for (auto a : nest.members)
        shares[data.schema.modes()[obs.alternatives[a].mode]] += w * nest.probability * st.conditional[a];
    }
    const double acc = model.accessibility(values, obs);
    acc_sum += w * acc;
    if (trip_model) {
      std::map<std::string, double> cov;
      for (std::size_t c = 0; c < data.schema.covariates().size(); ++c)
        cov[data.schema.covariates()[c]] = obs.covariates[c];
      cov[trip_model->accessibility_covariate] = acc;
      rate_sum += w * predict_rate(*trip_model, cov);
    }
  }
  if (!(total_weight > 0.0)) throw DomainError("scenario dataset has no observations");
  for (auto& [zone, s] : r.destination_shares) s /= total_weight;
  for (auto& [cls, shares] : r.mode_shares)
    for (auto& [mode, s] : shares) s = class_mass[cls] > 0.0 ? s / class_mass[cls] : 0.0;
  r.mean_accessibility = acc_sum / total_weight;
  if (trip_model) r.mean_trip_rate = rate_sum / total_weight;
  return r;
}

std::vector<InducedTravelRow> induced_travel_table(
    const std::vector<std::pair<std::string, double>>& mean_rates, const std::string& base_id) {
  auto base = std::find_if(mean_rates.begin(), mean_rates.end(),
                           [&](const auto& r) { return r.first == base_id; });
  if (base == mean_rates.end()) throw DomainError("base scenario '" + base_id + "' is not in the results");
  if (base->second == 0.0) throw DomainError("base scenario '" + base_id + "' has a zero trip rate");
  std::vector<InducedTravelRow> out;
  for (const auto& [id, rate] : mean_rates) out.push_back({id, rate, 100.0 * (rate / base->second)});
  return out;
}

std::vector<InducedTravelRow> induced_travel_table(const std::vector<ScenarioResult>& results,
                                                   const std::string& base_id) {
  std::vector<std::pair<std::string, double>> rates;
  for (const auto& r : results) {
    if (!r.mean_trip_rate) throw DomainError("scenario '" + r.scenario_id + "' has no trip rate");
    rates.emplace_back(r.scenario_id, *r.mean_trip_rate);
  }
  return induced_travel_table(rates, base_id);
}

std::vector<ScenarioResult> run_scenarios(const ModelSpec& spec, const ParameterVector& params,
                                          const ChoiceDataset& base, const ScenarioSet& scenarios,
                                          const PoissonModel* trip_model, unsigned threads) {
  std::vector<const Scenario*> selected;
  for (const auto& s : scenarios.scenarios)
    if (s.applies_to(spec.purpose)) selected.push_back(&s);
  std::vector<ScenarioResult> results(selected.size());
  detail::for_each_chunk(selected.size(), threads, [&](std::size_t i) {
    ScenarioInput in = apply_scenario(base, spec.zones, *selected[i]);
    ModelSpec scenario_spec = spec;
    scenario_spec.zones = std::move(in.zones);
    results[i] = simulate_shares(scenario_spec, params, in.data, scenarios.distance_classes, trip_model);
    results[i].scenario_id = selected[i]->id;
  });
  if (trip_model && scenarios.find(scenarios.base_id) && scenarios.find(scenarios.base_id)->applies_to(spec.purpose)) {
    auto table = induced_travel_table(results, scenarios.base_id);
    for (std::size_t i = 0; i < results.size(); ++i) results[i].induced_index = table[i].index;
  }
  return results;
}

}  // namespace intercity
