#pragma once

#include <map>
#include <string>
#include <vector>

#include "intercity/likelihood.hpp"

namespace intercity {

enum class Ll0Convention { EqualShares, ConstantsOnly };

std::string_view to_string(Ll0Convention c);
Ll0Convention parse_ll0_convention(std::string_view s);

enum class CovarianceSource { Hessian, Bhhh, Unavailable };

std::string_view to_string(CovarianceSource s);

struct EstimationOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;
  double relative_ll_tolerance = 1e-10;
  Ll0Convention ll0_convention = Ll0Convention::EqualShares;
  unsigned threads = 1;
};

struct EstimationResult {
  ParameterVector params;
  /// Asymptotic standard errors of free parameters; NaN when unavailable.
  std::map<std::string, double> std_errors;
  CovarianceSource covariance_source = CovarianceSource::Unavailable;
  std::vector<std::string> free_names;
  std::vector<double> covariance;  ///< row-major, free x free
  double ll0 = 0.0;
  double ll1 = 0.0;
  double rho = 0.0;
  double rho_adjusted = 0.0;
  std::size_t n_free_params = 0;
  std::size_t n_observations = 0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::string termination;
  std::map<std::string, double> vot;  ///< VND per hour, keyed by VOT label
  Ll0Convention ll0_convention = Ll0Convention::EqualShares;

  bool std_errors_available() const { return covariance_source != CovarianceSource::Unavailable; }
  double t_ratio(const std::string& name) const;
};

/// 1 - ll1 / ll0
double rho_squared(double ll0, double ll1);
/// 1 - (ll1 - k) / ll0 with k free parameters
double rho_squared_adjusted(double ll0, double ll1, std::size_t n_free_params);

/// (time coefficient / cost coefficient) * 60 * 1e6: VND per hour for times in
/// minutes and costs in million VND.
double value_of_time(const ParameterVector& params, const std::string& time_coefficient,
                     const std::string& cost_coefficient);
double value_of_time(double time_coefficient, double cost_coefficient);

/// "**" for |t| >= 1.96, "*" for |t| >= 1.645, "" otherwise.
std::string significance_stars(double t_ratio);

/// Maximises the joint likelihood with BFGS from `init` (fixed entries stay
/// put). Standard errors come from the inverse negative numerical Hessian,
/// with the BHHH outer product as fallback.
EstimationResult estimate(const ModelSpec& spec, const ChoiceDataset& data, const ParameterVector& init,
                          const EstimationOptions& options = {});

/// Log-likelihood at the optimum of the constants-only model: theta pinned to
/// 1, scale 1, every non-constant term fixed at 0.
double constants_only_log_likelihood(const ModelSpec& spec, const ChoiceDataset& data,
                                     const EstimationOptions& options = {});

/// Human-readable report in the coefficient / fit statistics / VOT layout.
std::string format_report(const ModelSpec& spec, const EstimationResult& result);

}  // namespace intercity
