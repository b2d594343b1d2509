#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "intercity/nested_logit.hpp"
#include "intercity/trip_generation.hpp"

namespace intercity {

enum class TransformAction { Scale, Set, Copy, AddMode, RemoveMode };

std::string_view to_string(TransformAction a);
TransformAction parse_transform_action(std::string_view s);

/// Mode only: that mode at every zone. Zone only: a zone attribute. Both: one
/// (zone, mode) cell.
struct TargetRef {
  std::optional<std::string> mode;
  std::optional<std::string> zone;

  bool operator==(const TargetRef&) const = default;
};

/// One edit of a scenario. Copy reads `factor` x the baseline value of
/// `source` (same zone unless `source.zone` is given), never a value produced
/// by an earlier transformation. Scale multiplies the current value.
struct Transformation {
  TargetRef target;
  std::string attribute;
  TransformAction action = TransformAction::Scale;
  double factor = 1.0;
  double value = 0.0;
  TargetRef source;
  std::string source_attribute;  ///< defaults to `attribute`

  std::string describe() const;
  bool operator==(const Transformation&) const = default;
};

struct Scenario {
  std::string id;
  std::string description;
  std::set<Purpose> purposes{Purpose::Business, Purpose::NonBusiness};
  std::vector<Transformation> transformations;
  std::string note;

  bool applies_to(Purpose p) const { return purposes.count(p) > 0; }
  bool operator==(const Scenario&) const = default;
};

/// Scenario config file contents.
struct ScenarioSet {
  std::string base_id;
  std::map<std::string, std::string> distance_classes;  ///< zone -> class label (MD, LD, ...)
  std::vector<Scenario> scenarios;

  const Scenario* find(const std::string& id) const;
  bool operator==(const ScenarioSet&) const = default;
};

struct ScenarioInput {
  ChoiceDataset data;
  std::vector<Zone> zones;
};

/// Applies the transformations in order to copies of `base` and `zones`.
ScenarioInput apply_scenario(const ChoiceDataset& base, const std::vector<Zone>& zones,
                             const Scenario& scenario);

struct ScenarioResult {
  std::string scenario_id;
  /// class -> mode -> share of the class's probability mass
  std::map<std::string, std::map<std::string, double>> mode_shares;
  std::map<std::string, double> destination_shares;
  double mean_accessibility = 0.0;
  std::optional<double> mean_trip_rate;
  std::optional<double> induced_index;
};

/// Sample enumeration: probability-weighted aggregates over observations.
/// With `trip_model`, each observation's rate uses its covariates plus its SP
/// accessibility under the model's accessibility covariate.
ScenarioResult simulate_shares(const ModelSpec& spec, const ParameterVector& params,
                               const ChoiceDataset& data,
                               const std::map<std::string, std::string>& distance_classes,
                               const PoissonModel* trip_model = nullptr);

struct InducedTravelRow {
  std::string scenario_id;
  double mean_trip_rate = 0.0;
  double index = 0.0;  ///< 100 x rate / base rate
};

std::vector<InducedTravelRow> induced_travel_table(
    const std::vector<std::pair<std::string, double>>& mean_rates, const std::string& base_id);
std::vector<InducedTravelRow> induced_travel_table(const std::vector<ScenarioResult>& results,
                                                   const std::string& base_id);

/// Runs every scenario applicable to spec.purpose, concurrently when
/// threads > 1, and fills induced indices against the set's base scenario
/// when a trip model is supplied.
std::vector<ScenarioResult> run_scenarios(const ModelSpec& spec, const ParameterVector& params,
                                          const ChoiceDataset& base, const ScenarioSet& scenarios,
                                          const PoissonModel* trip_model = nullptr,
                                          unsigned threads = 1);

}  // namespace intercity
