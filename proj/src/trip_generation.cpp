#include "intercity/trip_generation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "intercity/errors.hpp"

namespace intercity {

double PoissonModel::coefficient(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return coefficients[i];
  throw ConfigError("Poisson model has no coefficient '" + std::string(name) + "'");
}

bool PoissonModel::has(std::string_view name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

double poisson_ll(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    ll += y[i] * eta[i] - std::exp(eta[i]) - std::lgamma(y[i] + 1.0);
  return ll;
}

}  // namespace

PoissonModel fit_poisson(const std::vector<TripGenRecord>& records,
                         const std::vector<std::string>& covariates, const PoissonOptions& options) {
  if (records.empty()) throw DomainError("no trip generation records");
  PoissonModel model;
  if (options.intercept) model.names.emplace_back(kIntercept);
  for (const auto& c : covariates) model.names.push_back(c);
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto p = static_cast<Eigen::Index>(model.names.size());
  if (n < p) throw DomainError("fewer records than coefficients");

  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  std::vector<std::string> errors;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.trip_count < 0)
      errors.push_back("record '" + r.individual_id + "' has a negative trip count");
    y[i] = static_cast<double>(r.trip_count);
    Eigen::Index col = 0;
    if (options.intercept) x(i, col++) = 1.0;
    for (const auto& c : covariates) {
      auto it = r.covariates.find(c);
      if (it == r.covariates.end()) {
        errors.push_back("record '" + r.individual_id + "' lacks covariate '" + c + "'");
        x(i, col++) = 0.0;
      } else {
        if (!std::isfinite(it->second))
          errors.push_back("record '" + r.individual_id + "' has non-finite covariate '" + c + "'");
        x(i, col++) = it->second;
      }
    }
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < p) {
    std::string cols;
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      if (!cols.empty()) cols += ", ";
      cols += model.names[static_cast<std::size_t>(qr.colsPermutation().indices()[k])];
    }
    throw ConfigError("rank-deficient trip generation design; collinear column(s): " + cols);
  }

  const double mean = y.mean();
  if (!(mean > 0.0)) throw DomainError("all trip counts are zero; the Poisson MLE does not exist");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (options.intercept) beta[0] = std::log(mean);
  Eigen::VectorXd eta = x * beta;
  double ll = poisson_ll(y, eta);
  Eigen::VectorXd grad = x.transpose() * (y - eta.array().exp().matrix());

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (grad.norm() < 1e-2 * options.gradient_tolerance) break;
    Eigen::VectorXd lambda = eta.array().exp();
    Eigen::MatrixXd info = x.transpose() * lambda.asDiagonal() * x;
    Eigen::VectorXd step = info.ldlt().solve(grad);
    double alpha = 1.0;
    bool improved = false;
    for (int k = 0; k < 50; ++k, alpha *= 0.5) {
      Eigen::VectorXd cand = beta + alpha * step;
      Eigen::VectorXd cand_eta = x * cand;
      double cand_ll = poisson_ll(y, cand_eta);
      if (std::isfinite(cand_ll) && cand_ll >= ll) {
        beta = cand;
        eta = cand_eta;
        ll = cand_ll;
        improved = true;
        break;
      }
    }
    grad = x.transpose() * (y - eta.array().exp().matrix());
    if (!improved || step.norm() < 1e-15 * std::max(1.0, beta.norm())) break;
  }

  model.iterations = it;
  model.gradient_norm = grad.norm();
  model.converged = model.gradient_norm < options.gradient_tolerance;
  model.coefficients.assign(beta.data(), beta.data() + p);
  Eigen::VectorXd lambda = eta.array().exp();
  Eigen::MatrixXd cov = (x.transpose() * lambda.asDiagonal() * x).inverse();
  for (Eigen::Index k = 0; k < p; ++k) model.std_errors.push_back(std::sqrt(cov(k, k)));

  model.ll1 = ll;
  Eigen::VectorXd null_eta = Eigen::VectorXd::Constant(n, std::log(mean));
  model.ll0 = poisson_ll(y, null_eta);
  model.pseudo_r2 = model.ll0 == 0.0 ? 0.0 : 1.0 - model.ll1 / model.ll0;
  model.chi_square = 2.0 * (model.ll1 - model.ll0);
  model.n_records = records.size();
  return model;
}

double predict_rate(const PoissonModel& model, const std::map<std::string, double>& covariates) {
  double eta = 0.0;
  for (std::size_t i = 0; i < model.names.size(); ++i) {
    if (model.names[i] == kIntercept) {
      eta += model.coefficients[i];
      continue;
    }
    auto it = covariates.find(model.names[i]);
    if (it == covariates.end())
      throw ConfigError("missing covariate '" + model.names[i] + "' for trip rate prediction");
    eta += model.coefficients[i] * it->second;
  }
  const double rate = std::exp(eta);
  if (!std::isfinite(rate)) throw NumericError("trip rate overflows (linear predictor " + std::to_string(eta) + ")");
  return rate;
}

double poisson_pmf(long count, double rate) {
  if (count < 0) return 0.0;
  if (!(rate > 0.0)) throw DomainError("Poisson rate must be positive");
  return std::exp(static_cast<double>(count) * std::log(rate) - rate -
                  std::lgamma(static_cast<double>(count) + 1.0));
}

std::vector<std::string> CategoricalEncoding::dummy_names() const {
  std::vector<std::string> out;
  for (const auto& l : levels) out.push_back(column + "=" + l);
  return out;
}

std::map<std::string, double> CategoricalEncoding::encode(const std::string& value) const {
  std::map<std::string, double> out;
  bool known = value == base;
  for (const auto& l : levels) {
    out[column + "=" + l] = l == value ? 1.0 : 0.0;
    known = known || l == value;
  }
  if (!known) throw ConfigError("unknown level '" + value + "' for categorical column '" + column + "'");
  return out;
}

std::string format_poisson_table(const PoissonModel& model, const std::string& title) {
  std::ostringstream os;
  os << title << "\n";
  os << std::left << std::setw(34) << "Explanatory variable" << std::right << std::setw(11) << "Parameter"
     << std::setw(11) << "Std.Error" << std::setw(10) << "z value" << std::setw(12) << "Pr(>|z|)" << "\n";
  os << std::string(80, '-') << "\n";
  for (std::size_t i = 0; i < model.names.size(); ++i) {
    const double se = model.std_errors[i];
    const double z = model.coefficients[i] / se;
    const double pval = std::erfc(std::abs(z) / std::sqrt(2.0));
    std::string stars = pval < 0.05 ? " (**)" : (pval < 0.10 ? " (*)" : "");
    os << std::left << std::setw(34) << model.names[i] << std::right << std::fixed << std::setprecision(3)
       << std::setw(11) << model.coefficients[i] << std::setw(11) << se << std::setw(10) << z
       << std::setw(12) << std::setprecision(3) << std::scientific << pval << std::defaultfloat << stars
       << "\n";
  }
  os << std::string(80, '-') << "\n" << std::fixed;
  os << std::left << std::setw(34) << "Pseudo-R square" << std::right << std::setw(11) << std::setprecision(3)
     << model.pseudo_r2 << "\n";
  os << std::left << std::setw(34) << "Chi-square" << std::right << std::setw(11) << std::setprecision(2)
     << model.chi_square << "\n";
  os << std::left << std::setw(34) << "Number of sample" << std::right << std::setw(11) << model.n_records
     << "\n";
  os << "(*) significant at 90% level, (**) significant at 95% level\n";
  return os.str();
}

}  // namespace intercity
