#include "intercity/nested_logit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "intercity/errors.hpp"

namespace intercity {

namespace {

constexpr double kProbabilityFloor = 1e-300;
const double kLogProbabilityFloor = std::log(kProbabilityFloor);

int context_slot(Context c) { return c == Context::RP ? 0 : 1; }

}  // namespace

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

NestedLogit::NestedLogit(ModelSpec spec, DatasetSchema schema, const ParameterVector& params)
    : spec_(std::move(spec)), schema_(std::move(schema)) {
  spec_.validate(params);
  for (const auto& p : params.entries()) names_.push_back(p.name);
  scale_index_ = *params.index(spec_.scale.coefficient);

  for (const auto& z : schema_.zones())
    if (!spec_.find_zone(z)) throw ConfigError("dataset zone '" + z + "' is not in the model destination set");
  for (const auto& m : schema_.modes())
    if (!spec_.find_mode(m)) throw ConfigError("dataset mode '" + m + "' is not in the model mode universe");

  auto collect_zone_columns = [&](const std::vector<Factor>& factors) {
    for (const auto& f : factors)
      if (f.kind == FactorKind::Zone && !zone_attribute_columns_.count(f.name))
        zone_attribute_columns_.emplace(f.name, zone_attribute_columns_.size());
  };
  for (const auto& t : spec_.destination_terms) collect_zone_columns(t.factors);
  for (const auto& t : spec_.mode_terms) collect_zone_columns(t.factors);
  for (const auto& t : spec_.theta.terms) collect_zone_columns(t.factors);

  zone_attributes_.assign(schema_.zones().size(),
                          std::vector<double>(zone_attribute_columns_.size(),
                                              std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t z = 0; z < schema_.zones().size(); ++z) {
    const Zone* zone = spec_.find_zone(schema_.zones()[z]);
    for (const auto& [name, col] : zone_attribute_columns_) {
      auto it = zone->attributes.find(name);
      if (it != zone->attributes.end()) zone_attributes_[z][col] = it->second;
    }
  }

  for (std::size_t i = 0; i < spec_.destination_terms.size(); ++i) {
    const auto& t = spec_.destination_terms[i];
    destination_terms_.push_back(compile(t.coefficient, t.factors, t.zones, {}, t.contexts,
                                         t.scaled_by_mu,
                                         "destination term " + std::to_string(i) + " (" + t.coefficient + ")"));
  }
  for (std::size_t i = 0; i < spec_.mode_terms.size(); ++i) {
    const auto& t = spec_.mode_terms[i];
    mode_terms_.push_back(compile(t.coefficient, t.factors, t.zones, t.modes, t.contexts,
                                  t.scaled_by_mu,
                                  "mode term " + std::to_string(i) + " (" + t.coefficient + ")"));
  }
  for (std::size_t i = 0; i < spec_.theta.terms.size(); ++i) {
    const auto& t = spec_.theta.terms[i];
    theta_terms_.push_back(compile(t.coefficient, t.factors, {}, {}, t.contexts, false,
                                   "theta term " + std::to_string(i) + " (" + t.coefficient + ")"));
  }
}

NestedLogit::CompiledTerm NestedLogit::compile(const std::string& coefficient,
                                               const std::vector<Factor>& factors,
                                               const std::set<std::string>& zones,
                                               const std::set<std::string>& modes,
                                               const std::set<Context>& contexts, bool scaled,
                                               const std::string& label) {
  CompiledTerm t;
  auto coef = std::find(names_.begin(), names_.end(), coefficient);
  t.coefficient = static_cast<std::size_t>(coef - names_.begin());
  for (const auto& f : factors) {
    std::optional<std::size_t> ix;
    switch (f.kind) {
      case FactorKind::Los:
        ix = schema_.los_index(f.name);
        if (!ix) throw ConfigError(label + ": LOS attribute '" + f.name + "' is missing from the dataset");
        break;
      case FactorKind::Covariate:
        ix = schema_.covariate_index(f.name);
        if (!ix) throw ConfigError(label + ": covariate '" + f.name + "' is missing from the dataset");
        break;
      case FactorKind::Zone:
        ix = zone_attribute_columns_.at(f.name);
        break;
    }
    t.factors.push_back({f.kind, *ix});
  }
  t.zone_mask.resize(schema_.zones().size());
  for (std::size_t z = 0; z < schema_.zones().size(); ++z)
    t.zone_mask[z] = zones.empty() || zones.count(schema_.zones()[z]);
  t.mode_mask.resize(schema_.modes().size());
  for (std::size_t m = 0; m < schema_.modes().size(); ++m)
    t.mode_mask[m] = modes.empty() || modes.count(schema_.modes()[m]);
  t.in_context[0] = contexts.count(Context::RP) > 0;
  t.in_context[1] = contexts.count(Context::SP) > 0;
  t.scaled = scaled;
  t.label = label;
  return t;
}

double NestedLogit::term_value(const CompiledTerm& t, const Observation& obs, const Alternative* alt,
                               std::size_t zone) const {
  double x = 1.0;
  for (const auto& f : t.factors) {
    switch (f.kind) {
      case FactorKind::Los:
        x *= alt->los[f.index];
        break;
      case FactorKind::Covariate:
        x *= obs.covariates[f.index];
        break;
      case FactorKind::Zone:
        x *= zone_attributes_[zone][f.index];
        break;
    }
  }
  if (!std::isfinite(x))
    throw ConfigError(t.label + ": missing or non-finite attribute value in observation '" + obs.id +
                      "' at zone '" + schema_.zones()[zone] + "'");
  return x;
}

double NestedLogit::theta_index(std::span<const double> values, const Observation& obs, Context ctx,
                                std::size_t zone) const {
  double eta = 0.0;
  for (const auto& t : theta_terms_) {
    if (!t.in_context[context_slot(ctx)]) continue;
    eta += values[t.coefficient] * term_value(t, obs, nullptr, zone);
  }
  return eta;
}

ChoiceState NestedLogit::evaluate(std::span<const double> values, const Observation& obs) const {
  return evaluate(values, obs, obs.context);
}

ChoiceState NestedLogit::evaluate(std::span<const double> values, const Observation& obs,
                                  Context ctx) const {
  const std::size_t n_alt = obs.alternatives.size();
  if (n_alt == 0) throw DomainError("observation '" + obs.id + "' has no available alternatives");
  const int slot = context_slot(ctx);

  ChoiceState st;
  st.context = ctx;
  st.scale = ctx == spec_.scale.context ? values[scale_index_] : 1.0;
  st.mode_utility.resize(n_alt);
  st.mode_scaled.resize(n_alt);
  st.conditional.resize(n_alt);
  st.nest_of.resize(n_alt);

  for (std::size_t a = 0; a < n_alt; ++a) {
    const auto& alt = obs.alternatives[a];
    if (alt.zone >= schema_.zones().size() || alt.mode >= schema_.modes().size())
      throw DomainError("observation '" + obs.id + "' has an alternative outside the dataset schema");
    double scaled = 0.0, unscaled = 0.0;
    for (const auto& t : mode_terms_) {
      if (!t.in_context[slot] || !t.zone_mask[alt.zone] || !t.mode_mask[alt.mode]) continue;
      double c = values[t.coefficient] * term_value(t, obs, &alt, alt.zone);
      (t.scaled ? scaled : unscaled) += c;
    }
    double v = st.scale * scaled + unscaled;
    if (!std::isfinite(v))
      throw NumericError("non-finite utility for mode '" + schema_.modes()[alt.mode] + "' at zone '" +
                         schema_.zones()[alt.zone] + "' in observation '" + obs.id + "'");
    st.mode_utility[a] = v;
    st.mode_scaled[a] = scaled;

    auto nest = std::find_if(st.nests.begin(), st.nests.end(),
                             [&](const NestState& n) { return n.zone == alt.zone; });
    if (nest == st.nests.end()) {
      st.nests.push_back(NestState{});
      st.nests.back().zone = alt.zone;
      nest = st.nests.end() - 1;
    }
    nest->members.push_back(a);
    st.nest_of[a] = static_cast<std::size_t>(nest - st.nests.begin());
  }

  double max_u = -std::numeric_limits<double>::infinity();
  for (auto& nest : st.nests) {
    const std::string& zone_id = schema_.zones()[nest.zone];
    if (spec_.theta.fixed_value) {
      nest.theta = *spec_.theta.fixed_value;
    } else {
      nest.theta = logistic(theta_index(values, obs, ctx, nest.zone));
    }
    if (!(nest.theta > 0.0) || !std::isfinite(nest.theta))
      throw NumericError("logsum parameter underflowed at zone '" + zone_id + "' in observation '" +
                         obs.id + "'");

    double m = -std::numeric_limits<double>::infinity();
    for (auto a : nest.members) m = std::max(m, st.mode_utility[a] / nest.theta);
    double sum = 0.0;
    for (auto a : nest.members) sum += std::exp(st.mode_utility[a] / nest.theta - m);
    nest.inclusive_value = m + std::log(sum);
    for (auto a : nest.members) {
      double p = std::exp(st.mode_utility[a] / nest.theta - nest.inclusive_value);
      st.conditional[a] = p < kProbabilityFloor ? 0.0 : p;
    }

    double scaled = 0.0, unscaled = 0.0;
    for (const auto& t : destination_terms_) {
      if (!t.in_context[slot] || !t.zone_mask[nest.zone]) continue;
      double c = values[t.coefficient] * term_value(t, obs, nullptr, nest.zone);
      (t.scaled ? scaled : unscaled) += c;
    }
    nest.destination_scaled = scaled;
    nest.utility = st.scale * scaled + unscaled + nest.theta * nest.inclusive_value;
    if (!std::isfinite(nest.utility))
      throw NumericError("non-finite destination utility at zone '" + zone_id + "' in observation '" +
                         obs.id + "'");
    max_u = std::max(max_u, nest.utility);
  }

  double sum = 0.0;
  for (const auto& nest : st.nests) sum += std::exp(nest.utility - max_u);
  st.log_denominator = max_u + std::log(sum);
  for (auto& nest : st.nests) {
    double p = std::exp(nest.utility - st.log_denominator);
    nest.probability = p < kProbabilityFloor ? 0.0 : p;
  }
  return st;
}

double NestedLogit::mode_utility(std::span<const double> values, const Observation& obs,
                                 std::size_t alternative) const {
  const auto& alt = obs.alternatives.at(alternative);
  const int slot = context_slot(obs.context);
  const double s = obs.context == spec_.scale.context ? values[scale_index_] : 1.0;
  double scaled = 0.0, unscaled = 0.0;
  for (const auto& t : mode_terms_) {
    if (!t.in_context[slot] || !t.zone_mask[alt.zone] || !t.mode_mask[alt.mode]) continue;
    double c = values[t.coefficient] * term_value(t, obs, &alt, alt.zone);
    (t.scaled ? scaled : unscaled) += c;
  }
  return s * scaled + unscaled;
}

double NestedLogit::theta(std::span<const double> values, const Observation& obs,
                          std::size_t zone) const {
  if (spec_.theta.fixed_value) return *spec_.theta.fixed_value;
  return logistic(theta_index(values, obs, obs.context, zone));
}

double NestedLogit::accessibility(std::span<const double> values, const Observation& obs) const {
  return evaluate(values, obs, Context::SP).log_denominator;
}

double NestedLogit::log_likelihood(std::span<const double> values, const Observation& obs,
                                   std::span<double> gradient) const {
  if (!obs.chosen || *obs.chosen >= obs.alternatives.size())
    throw DomainError("observation '" + obs.id + "' has no valid chosen alternative");
  const ChoiceState st = evaluate(values, obs);
  const std::size_t chosen = *obs.chosen;
  const std::size_t chosen_nest = st.nest_of[chosen];
  const NestState& cn = st.nests[chosen_nest];

  const double ll = (cn.utility - st.log_denominator) +
                    (st.mode_utility[chosen] / cn.theta - cn.inclusive_value);
  if (!std::isfinite(ll) || ll < kLogProbabilityFloor)
    throw DomainError("chosen alternative of observation '" + obs.id + "' has probability 0");
  if (gradient.empty()) return obs.weight * ll;

  // Adjoints of the contribution with respect to mode utilities, destination
  // terms and nest thetas; the chain rule to parameters follows below.
  const std::size_t n_alt = obs.alternatives.size();
  const std::size_t n_nest = st.nests.size();
  std::vector<double> g_v(n_alt), g_c(n_nest), g_theta(n_nest);
  for (std::size_t d = 0; d < n_nest; ++d) {
    const NestState& nest = st.nests[d];
    const double is_chosen = d == chosen_nest ? 1.0 : 0.0;
    const double r = is_chosen - nest.probability;
    double mean_v = 0.0;
    for (auto a : nest.members) mean_v += st.conditional[a] * st.mode_utility[a];
    for (auto a : nest.members) {
      double g = r * st.conditional[a];
      if (d == chosen_nest) g += ((a == chosen ? 1.0 : 0.0) - st.conditional[a]) / nest.theta;
      g_v[a] = g;
    }
    g_c[d] = r;
    g_theta[d] = r * (nest.inclusive_value - mean_v / nest.theta);
    if (d == chosen_nest)
      g_theta[d] -= (st.mode_utility[chosen] - mean_v) / (nest.theta * nest.theta);
  }

  const double w = obs.weight;
  const int slot = context_slot(st.context);
  const bool scaled_context = st.context == spec_.scale.context;
  double g_scale = 0.0;

  for (std::size_t a = 0; a < n_alt; ++a) {
    const auto& alt = obs.alternatives[a];
    for (const auto& t : mode_terms_) {
      if (!t.in_context[slot] || !t.zone_mask[alt.zone] || !t.mode_mask[alt.mode]) continue;
      double x = term_value(t, obs, &alt, alt.zone);
      gradient[t.coefficient] += w * g_v[a] * x * (t.scaled ? st.scale : 1.0);
    }
    if (scaled_context) g_scale += g_v[a] * st.mode_scaled[a];
  }
  for (std::size_t d = 0; d < n_nest; ++d) {
    const NestState& nest = st.nests[d];
    for (const auto& t : destination_terms_) {
      if (!t.in_context[slot] || !t.zone_mask[nest.zone]) continue;
      double x = term_value(t, obs, nullptr, nest.zone);
      gradient[t.coefficient] += w * g_c[d] * x * (t.scaled ? st.scale : 1.0);
    }
    if (scaled_context) g_scale += g_c[d] * nest.destination_scaled;
    if (!spec_.theta.fixed_value) {
      const double dtheta = nest.theta * (1.0 - nest.theta);
      for (const auto& t : theta_terms_) {
        if (!t.in_context[slot]) continue;
        gradient[t.coefficient] += w * g_theta[d] * dtheta * term_value(t, obs, nullptr, nest.zone);
      }
    }
  }
  if (scaled_context) gradient[scale_index_] += w * g_scale;
  return w * ll;
}

namespace {

std::size_t require_zone(const DatasetSchema& schema, std::string_view zone) {
  auto z = schema.zone_index(zone);
  if (!z) throw DomainError("zone '" + std::string(zone) + "' is not in the dataset");
  return *z;
}

}  // namespace

double eval_mode_utility(const ModelSpec& spec, const ParameterVector& params,
                         const DatasetSchema& schema, const Observation& obs, std::string_view zone,
                         std::string_view mode) {
  NestedLogit model(spec, schema, params);
  auto z = schema.zone_index(zone);
  auto m = schema.mode_index(mode);
  if (z && m) {
    for (std::size_t a = 0; a < obs.alternatives.size(); ++a)
      if (obs.alternatives[a].zone == *z && obs.alternatives[a].mode == *m)
        return model.mode_utility(params.values(), obs, a);
  }
  throw DomainError("mode '" + std::string(mode) + "' at zone '" + std::string(zone) +
                    "' is not available in observation '" + obs.id + "'");
}

double eval_theta(const ModelSpec& spec, const ParameterVector& params, const DatasetSchema& schema,
                  const Observation& obs, std::string_view zone) {
  NestedLogit model(spec, schema, params);
  std::size_t z = 0;
  if (!zone.empty()) {
    z = require_zone(schema, zone);
  } else {
    for (const auto& t : spec.theta.terms)
      for (const auto& f : t.factors)
        if (f.kind == FactorKind::Zone)
          throw ConfigError("theta term '" + t.coefficient + "' reads zone attribute '" + f.name +
                            "'; a zone is required");
    if (schema.zones().empty()) throw DomainError("dataset has no zones");
  }
  return model.theta(params.values(), obs, z);
}

double inclusive_value(const ModelSpec& spec, const ParameterVector& params,
                       const DatasetSchema& schema, const Observation& obs, std::string_view zone) {
  NestedLogit model(spec, schema, params);
  std::size_t z = require_zone(schema, zone);
  auto st = model.evaluate(params.values(), obs);
  for (const auto& n : st.nests)
    if (n.zone == z) return n.inclusive_value;
  throw DomainError("no mode is available at zone '" + std::string(zone) + "' in observation '" +
                    obs.id + "'");
}

std::map<std::string, double> destination_probabilities(const ModelSpec& spec,
                                                        const ParameterVector& params,
                                                        const DatasetSchema& schema,
                                                        const Observation& obs) {
  NestedLogit model(spec, schema, params);
  auto st = model.evaluate(params.values(), obs);
  std::map<std::string, double> out;
  for (const auto& n : st.nests) out[schema.zones()[n.zone]] = n.probability;
  return out;
}

std::map<std::string, double> mode_probabilities_given_destination(const ModelSpec& spec,
                                                                   const ParameterVector& params,
                                                                   const DatasetSchema& schema,
                                                                   const Observation& obs,
                                                                   std::string_view zone) {
  NestedLogit model(spec, schema, params);
  std::size_t z = require_zone(schema, zone);
  auto st = model.evaluate(params.values(), obs);
  std::map<std::string, double> out;
  for (const auto& n : st.nests) {
    if (n.zone != z) continue;
    for (auto a : n.members) out[schema.modes()[obs.alternatives[a].mode]] = st.conditional[a];
    return out;
  }
  throw DomainError("no mode is available at zone '" + std::string(zone) + "' in observation '" +
                    obs.id + "'");
}

double accessibility(const ModelSpec& spec, const ParameterVector& params,
                     const DatasetSchema& schema, const Observation& obs) {
  NestedLogit model(spec, schema, params);
  return model.accessibility(params.values(), obs);
}

ChoiceDataset simulate_choices(const ModelSpec& spec, const ParameterVector& params,
                               const ChoiceDataset& templates, std::uint64_t seed) {
  NestedLogit model(spec, templates.schema, params);
  const auto values = params.values();
  std::mt19937_64 rng(seed);
  ChoiceDataset out = templates;
  for (auto& obs : out.observations) {
    auto st = model.evaluate(values, obs);
    // 53-bit uniform in [0, 1), independent of the standard library's
    // distribution implementations.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double cumulative = 0.0;
    std::optional<std::size_t> pick;
    std::optional<std::size_t> last_positive;
    for (const auto& nest : st.nests) {
      for (auto a : nest.members) {
        double p = nest.probability * st.conditional[a];
        if (p <= 0.0) continue;
        last_positive = a;
        cumulative += p;
        if (!pick && u < cumulative) pick = a;
      }
    }
    obs.chosen = pick ? pick : last_positive;
  }
  return out;
}

}  // namespace intercity
