#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace intercity {

/// Revealed or stated preference data context.
enum class Context { RP, SP };

inline constexpr Context kContexts[] = {Context::RP, Context::SP};

std::string_view to_string(Context c);
Context parse_context(std::string_view s);

enum class Purpose { Business, NonBusiness };

std::string_view to_string(Purpose p);
Purpose parse_purpose(std::string_view s);

/// Destination zone with named real-valued attributes (GRP, tourist arrivals, ...).
struct Zone {
  std::string id;
  std::map<std::string, double> attributes;

  bool operator==(const Zone&) const = default;
};

/// Column layout shared by all observations of one dataset. Observations store
/// dense vectors aligned with these name tables.
class DatasetSchema {
 public:
  DatasetSchema() = default;
  DatasetSchema(std::vector<std::string> zones, std::vector<std::string> modes,
                std::vector<std::string> covariates, std::vector<std::string> los,
                std::vector<std::string> los_units = {});

  const std::vector<std::string>& zones() const { return zones_; }
  const std::vector<std::string>& modes() const { return modes_; }
  const std::vector<std::string>& covariates() const { return covariates_; }
  const std::vector<std::string>& los() const { return los_; }
  /// Unit label per LOS column ("" when undeclared).
  const std::vector<std::string>& los_units() const { return los_units_; }

  std::optional<std::size_t> zone_index(std::string_view id) const;
  std::optional<std::size_t> mode_index(std::string_view id) const;
  std::optional<std::size_t> covariate_index(std::string_view name) const;
  std::optional<std::size_t> los_index(std::string_view name) const;

  std::size_t add_zone(const std::string& id);
  std::size_t add_mode(const std::string& id);

  bool operator==(const DatasetSchema& o) const {
    return zones_ == o.zones_ && modes_ == o.modes_ && covariates_ == o.covariates_ &&
           los_ == o.los_ && los_units_ == o.los_units_;
  }

 private:
  void reindex();

  std::vector<std::string> zones_, modes_, covariates_, los_, los_units_;
  std::unordered_map<std::string, std::size_t> zone_ix_, mode_ix_, cov_ix_, los_ix_;
};

/// One available (zone, mode) pair of an observation with its level-of-service
/// values aligned with DatasetSchema::los().
struct Alternative {
  std::size_t zone = 0;
  std::size_t mode = 0;
  std::vector<double> los;

  bool operator==(const Alternative&) const = default;
};

/// One choice situation. `alternatives` is the availability set; `chosen`
/// indexes into it and is empty for templates used only for prediction.
struct Observation {
  std::string id;
  std::string individual_id;
  Context context = Context::RP;
  std::vector<double> covariates;
  std::vector<Alternative> alternatives;
  std::optional<std::size_t> chosen;
  double weight = 1.0;

  bool operator==(const Observation&) const = default;
};

struct ChoiceDataset {
  DatasetSchema schema;
  std::vector<Observation> observations;

  bool operator==(const ChoiceDataset&) const = default;

  double covariate(const Observation& obs, std::string_view name) const;
  double los(const Alternative& alt, std::string_view name) const;
  /// Index into obs.alternatives of (zone, mode), if available.
  std::optional<std::size_t> find_alternative(const Observation& obs, std::string_view zone,
                                              std::string_view mode) const;
};

struct Parameter {
  std::string name;
  double value = 0.0;
  bool fixed = false;

  bool operator==(const Parameter&) const = default;
};

/// Named coefficients in declaration order with fixed/free flags.
class ParameterVector {
 public:
  ParameterVector() = default;
  ParameterVector(std::initializer_list<Parameter> init);

  void add(std::string name, double value, bool fixed = false);
  bool contains(std::string_view name) const;
  const Parameter& at(std::string_view name) const;
  double value(std::string_view name) const { return at(name).value; }
  void set_value(std::string_view name, double value);
  void set_fixed(std::string_view name, bool fixed);
  std::optional<std::size_t> index(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  const std::vector<Parameter>& entries() const { return entries_; }
  std::vector<double> values() const;
  std::vector<std::size_t> free_indices() const;
  std::vector<std::string> free_names() const;
  std::size_t free_count() const;

  bool operator==(const ParameterVector& o) const { return entries_ == o.entries_; }

 private:
  std::vector<Parameter> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace intercity
