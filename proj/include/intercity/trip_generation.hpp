#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace intercity {

inline constexpr std::string_view kIntercept = "(Intercept)";

/// Annual trip count of one individual with named covariates.
struct TripGenRecord {
  std::string individual_id;
  long trip_count = 0;
  std::map<std::string, double> covariates;
};

/// Poisson trip-frequency model, log link.
struct PoissonModel {
  std::vector<std::string> names;  ///< "(Intercept)" first when present
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  double ll0 = 0.0;  ///< intercept-only null
  double ll1 = 0.0;
  double pseudo_r2 = 0.0;   ///< 1 - ll1 / ll0
  double chi_square = 0.0;  ///< 2 (ll1 - ll0)
  std::size_t n_records = 0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  /// Covariate that carries the logsum accessibility in scenario runs.
  std::string accessibility_covariate = "accessibility";

  double coefficient(std::string_view name) const;
  bool has(std::string_view name) const;
};

struct PoissonOptions {
  bool intercept = true;
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
};

/// Newton-Raphson maximum likelihood. Throws ConfigError naming the collinear
/// columns when the design is rank deficient.
PoissonModel fit_poisson(const std::vector<TripGenRecord>& records,
                         const std::vector<std::string>& covariates, const PoissonOptions& options = {});

/// exp(linear index). The intercept needs no covariate entry.
double predict_rate(const PoissonModel& model, const std::map<std::string, double>& covariates);

double poisson_pmf(long count, double rate);

/// Dummy coding of one categorical column against an explicit base level.
struct CategoricalEncoding {
  std::string column;
  std::string base;
  std::vector<std::string> levels;  ///< non-base levels, one dummy each

  /// Dummy names "<column>=<level>".
  std::vector<std::string> dummy_names() const;
  /// Dummies for `value`; all zero for the base level.
  std::map<std::string, double> encode(const std::string& value) const;
};

/// Coefficient table: estimate, std. error, z value, two-sided p, stars, plus
/// pseudo R-square, chi-square and sample size.
std::string format_poisson_table(const PoissonModel& model, const std::string& title);

}  // namespace intercity
