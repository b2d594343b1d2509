#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "intercity/nested_logit.hpp"

namespace intercity {

/// Joint RP+SP log-likelihood. `total` is the sum of the two context parts.
struct LikelihoodValue {
  double total = 0.0;
  std::map<Context, double> per_context{{Context::RP, 0.0}, {Context::SP, 0.0}};
  std::vector<double> per_observation;  ///< filled on request, weighted
};

struct LikelihoodOptions {
  bool per_observation = false;
  unsigned threads = 1;
};

enum class GradientMethod { Analytic, FiniteDifference };

/// Gradient over the free parameters only, in ParameterVector order.
struct Gradient {
  std::vector<std::string> names;
  std::vector<double> values;

  double norm() const;
  double at(const std::string& name) const;
};

/// Likelihood bound to one dataset and parameter layout, evaluated on the
/// vector of free parameter values. Observations are reduced in fixed-size
/// chunks summed in order, so results do not depend on the thread count.
class JointLikelihood {
 public:
  JointLikelihood(const ModelSpec& spec, const ChoiceDataset& data, ParameterVector params,
                  unsigned threads = 1);

  const NestedLogit& model() const { return model_; }
  const ParameterVector& parameters() const { return params_; }
  const ChoiceDataset& data() const { return *data_; }
  std::size_t free_count() const { return free_.size(); }
  std::vector<std::string> free_names() const { return params_.free_names(); }
  std::vector<double> free_values() const;

  /// Full parameter vector with `free_values` substituted.
  std::vector<double> expand(std::span<const double> free_values) const;
  ParameterVector with_free(std::span<const double> free_values) const;

  double value(std::span<const double> free_values) const;
  /// Returns lnL and writes d lnL / d free into `gradient`.
  double value_and_gradient(std::span<const double> free_values, std::span<double> gradient) const;
  /// Central differences of value(), step 1e-6 * max(1, |p|).
  std::vector<double> finite_difference_gradient(std::span<const double> free_values) const;
  /// Per-observation weighted scores, row-major (observations x free).
  std::vector<double> scores(std::span<const double> free_values) const;

  LikelihoodValue evaluate(std::span<const double> free_values, bool per_observation) const;

 private:
  NestedLogit model_;
  const ChoiceDataset* data_;
  ParameterVector params_;
  std::vector<std::size_t> free_;
  unsigned threads_;
};

LikelihoodValue log_likelihood(const ModelSpec& spec, const ParameterVector& params,
                               const ChoiceDataset& data, LikelihoodOptions options = {});

Gradient gradient(const ModelSpec& spec, const ParameterVector& params, const ChoiceDataset& data,
                  GradientMethod method = GradientMethod::Analytic, unsigned threads = 1);

/// Null log-likelihood with equal shares over the available destinations and,
/// within the chosen destination, over its available modes.
double equal_shares_log_likelihood(const ChoiceDataset& data);

}  // namespace intercity
