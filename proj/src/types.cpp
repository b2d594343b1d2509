#include "intercity/types.hpp"

#include "intercity/errors.hpp"

namespace intercity {

std::string_view to_string(Context c) { return c == Context::RP ? "RP" : "SP"; }

Context parse_context(std::string_view s) {
  if (s == "RP" || s == "rp") return Context::RP;
  if (s == "SP" || s == "sp") return Context::SP;
  throw ConfigError("unknown data context '" + std::string(s) + "' (expected RP or SP)");
}

std::string_view to_string(Purpose p) {
  return p == Purpose::Business ? "business" : "non-business";
}

Purpose parse_purpose(std::string_view s) {
  if (s == "business") return Purpose::Business;
  if (s == "non-business" || s == "nonbusiness") return Purpose::NonBusiness;
  throw ConfigError("unknown trip purpose '" + std::string(s) + "'");
}

namespace {

std::optional<std::size_t> lookup(const std::unordered_map<std::string, std::size_t>& m,
                                  std::string_view key) {
  auto it = m.find(std::string(key));
  if (it == m.end()) return std::nullopt;
  return it->second;
}

void build_index(const std::vector<std::string>& names, const char* what,
                 std::unordered_map<std::string, std::size_t>& out) {
  out.clear();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!out.emplace(names[i], i).second)
      throw ConfigError(std::string("duplicate ") + what + " '" + names[i] + "' in dataset schema");
  }
}

}  // namespace

DatasetSchema::DatasetSchema(std::vector<std::string> zones, std::vector<std::string> modes,
                             std::vector<std::string> covariates, std::vector<std::string> los,
                             std::vector<std::string> los_units)
    : zones_(std::move(zones)),
      modes_(std::move(modes)),
      covariates_(std::move(covariates)),
      los_(std::move(los)),
      los_units_(std::move(los_units)) {
  if (los_units_.empty()) los_units_.assign(los_.size(), "");
  if (los_units_.size() != los_.size())
    throw ConfigError("LOS unit table does not match LOS attribute table");
  reindex();
}

void DatasetSchema::reindex() {
  build_index(zones_, "zone", zone_ix_);
  build_index(modes_, "mode", mode_ix_);
  build_index(covariates_, "covariate", cov_ix_);
  build_index(los_, "LOS attribute", los_ix_);
}

std::optional<std::size_t> DatasetSchema::zone_index(std::string_view id) const {
  return lookup(zone_ix_, id);
}
std::optional<std::size_t> DatasetSchema::mode_index(std::string_view id) const {
  return lookup(mode_ix_, id);
}
std::optional<std::size_t> DatasetSchema::covariate_index(std::string_view name) const {
  return lookup(cov_ix_, name);
}
std::optional<std::size_t> DatasetSchema::los_index(std::string_view name) const {
  return lookup(los_ix_, name);
}

std::size_t DatasetSchema::add_zone(const std::string& id) {
  if (auto ix = zone_index(id)) return *ix;
  zones_.push_back(id);
  zone_ix_.emplace(id, zones_.size() - 1);
  return zones_.size() - 1;
}

std::size_t DatasetSchema::add_mode(const std::string& id) {
  if (auto ix = mode_index(id)) return *ix;
  modes_.push_back(id);
  mode_ix_.emplace(id, modes_.size() - 1);
  return modes_.size() - 1;
}

double ChoiceDataset::covariate(const Observation& obs, std::string_view name) const {
  auto ix = schema.covariate_index(name);
  if (!ix) throw ConfigError("unknown covariate '" + std::string(name) + "'");
  return obs.covariates.at(*ix);
}

double ChoiceDataset::los(const Alternative& alt, std::string_view name) const {
  auto ix = schema.los_index(name);
  if (!ix) throw ConfigError("unknown LOS attribute '" + std::string(name) + "'");
  return alt.los.at(*ix);
}

std::optional<std::size_t> ChoiceDataset::find_alternative(const Observation& obs,
                                                           std::string_view zone,
                                                           std::string_view mode) const {
  auto z = schema.zone_index(zone);
  auto m = schema.mode_index(mode);
  if (!z || !m) return std::nullopt;
  for (std::size_t i = 0; i < obs.alternatives.size(); ++i) {
    if (obs.alternatives[i].zone == *z && obs.alternatives[i].mode == *m) return i;
  }
  return std::nullopt;
}

ParameterVector::ParameterVector(std::initializer_list<Parameter> init) {
  for (const auto& p : init) add(p.name, p.value, p.fixed);
}

void ParameterVector::add(std::string name, double value, bool fixed) {
  if (index_.count(name)) throw ConfigError("parameter '" + name + "' declared twice");
  index_.emplace(name, entries_.size());
  entries_.push_back(Parameter{std::move(name), value, fixed});
}

bool ParameterVector::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

std::optional<std::size_t> ParameterVector::index(std::string_view name) const {
  return lookup(index_, name);
}

const Parameter& ParameterVector::at(std::string_view name) const {
  auto ix = index(name);
  if (!ix) throw ConfigError("coefficient '" + std::string(name) + "' is not declared");
  return entries_[*ix];
}

void ParameterVector::set_value(std::string_view name, double value) {
  auto ix = index(name);
  if (!ix) throw ConfigError("coefficient '" + std::string(name) + "' is not declared");
  entries_[*ix].value = value;
}

void ParameterVector::set_fixed(std::string_view name, bool fixed) {
  auto ix = index(name);
  if (!ix) throw ConfigError("coefficient '" + std::string(name) + "' is not declared");
  entries_[*ix].fixed = fixed;
}

std::vector<double> ParameterVector::values() const {
  std::vector<double> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.value);
  return out;
}

std::vector<std::size_t> ParameterVector::free_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (!entries_[i].fixed) out.push_back(i);
  return out;
}

std::vector<std::string> ParameterVector::free_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (!e.fixed) out.push_back(e.name);
  return out;
}

std::size_t ParameterVector::free_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.fixed ? 0 : 1;
  return n;
}

}  // namespace intercity
