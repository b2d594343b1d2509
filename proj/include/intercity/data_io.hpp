#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "intercity/estimation.hpp"
#include "intercity/model_spec.hpp"
#include "intercity/scenario.hpp"
#include "intercity/trip_generation.hpp"
#include "intercity/types.hpp"

namespace intercity {

inline constexpr int kDatasetSchemaVersion = 1;

/// Summary of a parsed choice dataset. Saved next to the CSV as
/// "<file>.manifest.json"; a sidecar present at load time must agree with
/// the parsed data.
struct DatasetManifest {
  int schema_version = kDatasetSchemaVersion;
  std::string purpose;
  std::size_t rows = 0;
  std::size_t observations = 0;
  std::size_t individuals = 0;
  std::size_t unchosen = 0;  ///< template observations without a chosen pair
  std::map<Context, std::size_t> observations_per_context;
  std::map<Context, std::size_t> individuals_per_context;
  std::map<std::string, std::string> attribute_units;  ///< LOS attribute -> unit
  std::vector<std::string> covariates;
  std::vector<std::string> zones;
  std::vector<std::string> modes;
  std::map<std::string, std::size_t> availability;  ///< "zone/mode" -> observations offering it

  bool operator==(const DatasetManifest&) const = default;
};

struct LoadedDataset {
  ChoiceDataset data;
  DatasetManifest manifest;
};

/// Long CSV, one row per observation x zone x mode. Required columns:
/// obs_id, individual_id, context, zone, mode, chosen. Optional: weight,
/// available. LOS columns are "los:<name>[<unit>]", covariates "cov:<name>".
/// All problems are collected and thrown together as a ValidationError with
/// row numbers. `spec` (optional) adds checks against the model.
LoadedDataset load_choice_dataset(const std::filesystem::path& path, const ModelSpec* spec = nullptr);
LoadedDataset parse_choice_dataset(std::istream& in, const ModelSpec* spec = nullptr,
                                   const DatasetManifest* sidecar = nullptr);
/// Writes the CSV and its manifest sidecar. Values use 17 significant digits.
void save_choice_dataset(const ChoiceDataset& data, const std::filesystem::path& path,
                         const std::string& purpose = {});
void write_choice_dataset(const ChoiceDataset& data, std::ostream& out);
DatasetManifest make_manifest(const ChoiceDataset& data, const std::string& purpose, std::size_t rows);

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
/// Parses and validates (structure only; parameter coverage is checked when
/// parameters are bound).
ModelSpec load_model_spec(const std::filesystem::path& path);
void save_model_spec(const ModelSpec& spec, const std::filesystem::path& path);

nlohmann::json to_json(const ParameterVector& params);
ParameterVector params_from_json(const nlohmann::json& j);
ParameterVector load_params(const std::filesystem::path& path);
void save_params(const ParameterVector& params, const std::filesystem::path& path);

nlohmann::json to_json(const EstimationResult& r, const std::string& spec_hash);
EstimationResult estimation_result_from_json(const nlohmann::json& j);
/// Result file with the spec hash embedded for provenance.
void save_results(const EstimationResult& r, const ModelSpec& spec, const std::filesystem::path& path);
EstimationResult load_results(const std::filesystem::path& path, std::string* spec_hash = nullptr);

nlohmann::json to_json(const ScenarioSet& s);
ScenarioSet scenario_set_from_json(const nlohmann::json& j);
ScenarioSet load_scenarios(const std::filesystem::path& path);

nlohmann::json to_json(const PoissonModel& m);
PoissonModel poisson_model_from_json(const nlohmann::json& j);
PoissonModel load_poisson_model(const std::filesystem::path& path);
void save_poisson_model(const PoissonModel& m, const std::filesystem::path& path);

/// CSV with individual_id, trips and covariate columns. Columns named in
/// `categorical` hold level labels and are expanded to dummies.
std::vector<TripGenRecord> load_trip_records(const std::filesystem::path& path,
                                             const std::vector<CategoricalEncoding>& categorical = {});

/// Distinct values of one CSV column in first-seen order.
std::vector<std::string> csv_column_levels(const std::filesystem::path& path, const std::string& column);

/// FNV-1a 64-bit digest, hex encoded.
std::string fnv1a_hex(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);
std::string spec_hash(const ModelSpec& spec);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace intercity
