#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intercity/model_spec.hpp"
#include "intercity/types.hpp"

namespace intercity {

/// Destination nest of one observation after evaluation.
struct NestState {
  std::size_t zone = 0;            ///< dataset schema zone index
  double theta = 1.0;              ///< logsum parameter
  double inclusive_value = 0.0;    ///< ln sum exp(V_m / theta)
  double utility = 0.0;            ///< destination terms + theta * inclusive value
  double probability = 0.0;
  double destination_scaled = 0.0; ///< scale-multiplied part of the destination terms, before scaling
  std::vector<std::size_t> members;  ///< indices into Observation::alternatives
};

/// Full evaluation of one observation. Per-alternative vectors are aligned
/// with Observation::alternatives.
struct ChoiceState {
  Context context = Context::RP;
  double scale = 1.0;  ///< multiplier applied to scaled terms in this context
  std::vector<NestState> nests;
  std::vector<double> mode_utility;
  std::vector<double> mode_scaled;  ///< scaled part of V before the scale multiplier
  std::vector<double> conditional;  ///< P(mode | zone)
  std::vector<std::size_t> nest_of;
  double log_denominator = 0.0;     ///< ln sum_d exp(U_d), the accessibility

  double joint_probability(std::size_t alternative) const {
    return nests[nest_of[alternative]].probability * conditional[alternative];
  }
};

/// Nested destination/mode logit bound to a dataset layout and a parameter
/// ordering. Names are resolved once here so evaluation runs on dense
/// vectors. Evaluation methods are const and thread-safe.
class NestedLogit {
 public:
  /// Validates `spec` against `params` and compiles term lookups for `schema`.
  /// Parameter values are taken per call; `params` only fixes the ordering.
  NestedLogit(ModelSpec spec, DatasetSchema schema, const ParameterVector& params);

  const ModelSpec& spec() const { return spec_; }
  const DatasetSchema& schema() const { return schema_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  std::size_t parameter_count() const { return names_.size(); }

  ChoiceState evaluate(std::span<const double> values, const Observation& obs) const;
  ChoiceState evaluate(std::span<const double> values, const Observation& obs, Context context) const;

  double mode_utility(std::span<const double> values, const Observation& obs,
                      std::size_t alternative) const;
  /// Theta of the nest for `zone` (schema index).
  double theta(std::span<const double> values, const Observation& obs, std::size_t zone) const;
  /// ln sum_j exp(V_j^SP) over the observation's destinations, SP utilities.
  double accessibility(std::span<const double> values, const Observation& obs) const;

  /// Weighted log-probability of the chosen pair. When `gradient` is non-empty
  /// the weighted score is added into it (one slot per parameter).
  double log_likelihood(std::span<const double> values, const Observation& obs,
                        std::span<double> gradient = {}) const;

 private:
  struct CompiledFactor {
    FactorKind kind;
    std::size_t index;
  };
  struct CompiledTerm {
    std::size_t coefficient;
    std::vector<CompiledFactor> factors;
    std::vector<char> zone_mask;  // by schema zone
    std::vector<char> mode_mask;  // by schema mode
    bool in_context[2];
    bool scaled;
    std::string label;
  };

  CompiledTerm compile(const std::string& coefficient, const std::vector<Factor>& factors,
                       const std::set<std::string>& zones, const std::set<std::string>& modes,
                       const std::set<Context>& contexts, bool scaled, const std::string& label);
  double term_value(const CompiledTerm& t, const Observation& obs, const Alternative* alt,
                    std::size_t zone) const;
  double theta_index(std::span<const double> values, const Observation& obs, Context ctx,
                     std::size_t zone) const;

  ModelSpec spec_;
  DatasetSchema schema_;
  std::vector<std::string> names_;
  std::size_t scale_index_ = 0;
  std::vector<CompiledTerm> destination_terms_, mode_terms_, theta_terms_;
  std::vector<std::vector<double>> zone_attributes_;  // [schema zone][attribute column]
  std::map<std::string, std::size_t> zone_attribute_columns_;
};

double logistic(double x);

/// Linear index of one available (zone, mode) pair, scale applied in the
/// scaled context.
double eval_mode_utility(const ModelSpec& spec, const ParameterVector& params,
                         const DatasetSchema& schema, const Observation& obs,
                         std::string_view zone, std::string_view mode);

/// Logistic logsum parameter. `zone` is only needed when theta terms read
/// zone attributes.
double eval_theta(const ModelSpec& spec, const ParameterVector& params, const DatasetSchema& schema,
                  const Observation& obs, std::string_view zone = {});

double inclusive_value(const ModelSpec& spec, const ParameterVector& params,
                       const DatasetSchema& schema, const Observation& obs, std::string_view zone);

std::map<std::string, double> destination_probabilities(const ModelSpec& spec,
                                                        const ParameterVector& params,
                                                        const DatasetSchema& schema,
                                                        const Observation& obs);

std::map<std::string, double> mode_probabilities_given_destination(const ModelSpec& spec,
                                                                   const ParameterVector& params,
                                                                   const DatasetSchema& schema,
                                                                   const Observation& obs,
                                                                   std::string_view zone);

double accessibility(const ModelSpec& spec, const ParameterVector& params,
                     const DatasetSchema& schema, const Observation& obs);

/// Draws one (zone, mode) per template from the model probabilities. Output is
/// a copy of `templates` with `chosen` filled; identical for identical seeds.
ChoiceDataset simulate_choices(const ModelSpec& spec, const ParameterVector& params,
                               const ChoiceDataset& templates, std::uint64_t seed);

}  // namespace intercity
