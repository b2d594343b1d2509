#include "intercity/estimation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "intercity/errors.hpp"

namespace intercity {

std::string_view to_string(Ll0Convention c) {
  return c == Ll0Convention::EqualShares ? "equal-shares" : "constants-only";
}

Ll0Convention parse_ll0_convention(std::string_view s) {
  if (s == "equal-shares") return Ll0Convention::EqualShares;
  if (s == "constants-only") return Ll0Convention::ConstantsOnly;
  throw ConfigError("unknown LL0 convention '" + std::string(s) + "'");
}

std::string_view to_string(CovarianceSource s) {
  switch (s) {
    case CovarianceSource::Hessian:
      return "hessian";
    case CovarianceSource::Bhhh:
      return "bhhh";
    case CovarianceSource::Unavailable:
      break;
  }
  return "unavailable";
}

double EstimationResult::t_ratio(const std::string& name) const {
  auto it = std_errors.find(name);
  if (it == std_errors.end() || !std::isfinite(it->second) || it->second <= 0.0)
    return std::numeric_limits<double>::quiet_NaN();
  return params.value(name) / it->second;
}

double rho_squared(double ll0, double ll1) {
  if (ll0 == 0.0) throw DomainError("rho undefined for ll0 = 0");
  return 1.0 - ll1 / ll0;
}

double rho_squared_adjusted(double ll0, double ll1, std::size_t n_free_params) {
  if (ll0 == 0.0) throw DomainError("adjusted rho undefined for ll0 = 0");
  return 1.0 - (ll1 - static_cast<double>(n_free_params)) / ll0;
}

double value_of_time(double time_coefficient, double cost_coefficient) {
  if (cost_coefficient == 0.0) throw DomainError("value of time undefined for a zero cost coefficient");
  return time_coefficient / cost_coefficient * 60.0 * 1e6;
}

double value_of_time(const ParameterVector& params, const std::string& time_coefficient,
                     const std::string& cost_coefficient) {
  return value_of_time(params.value(time_coefficient), params.value(cost_coefficient));
}

std::string significance_stars(double t) {
  if (!std::isfinite(t)) return "";
  if (std::abs(t) >= 1.96) return "**";
  if (std::abs(t) >= 1.645) return "*";
  return "";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Optimum {
  VectorXd x;
  double ll = 0.0;
  VectorXd grad;
  bool converged = false;
  int iterations = 0;
  std::string termination;
};

// Inverse of the BHHH outer product of scores at x, or a scaled identity
// when it is singular.
MatrixXd bhhh_inverse(const JointLikelihood& lik, const VectorXd& x, const VectorXd& g) {
  const auto n = x.size();
  MatrixXd h_inv = MatrixXd::Identity(n, n);
  if (n == 0) return h_inv;
  auto s = lik.scores(std::span<const double>(x.data(), n));
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> scores(
      s.data(), static_cast<Eigen::Index>(s.size() / n), n);
  MatrixXd bhhh = scores.transpose() * scores;
  Eigen::LLT<MatrixXd> llt(bhhh);
  if (llt.info() == Eigen::Success && bhhh.diagonal().minCoeff() > 0.0) return llt.solve(MatrixXd::Identity(n, n));
  if (g.norm() > 0.0) h_inv /= g.norm();
  return h_inv;
}

// Ascent on lnL; the inverse Hessian approximation is for -lnL.
Optimum bfgs(const JointLikelihood& lik, VectorXd x, const EstimationOptions& opt) {
  const auto n = x.size();
  Optimum out;
  VectorXd g(n);
  double f = 0.0;
  try {
    f = lik.value_and_gradient(std::span<const double>(x.data(), n), std::span<double>(g.data(), n));
  } catch (const std::exception& e) {
    throw NumericError(std::string("log-likelihood is not finite at the initial parameters: ") + e.what());
  }
  if (!std::isfinite(f)) throw NumericError("log-likelihood is not finite at the initial parameters");

  MatrixXd h_inv = bhhh_inverse(lik, x, g);

  for (out.iterations = 0; out.iterations < opt.max_iterations; ++out.iterations) {
    if (g.norm() < opt.gradient_tolerance) {
      out.converged = true;
      out.termination = "gradient norm below tolerance";
      break;
    }
    VectorXd d = h_inv * g;
    if (g.dot(d) <= 0.0) {
      h_inv = MatrixXd::Identity(n, n) / std::max(1.0, g.norm());
      d = h_inv * g;
    }

    double alpha = 1.0;
    VectorXd x_new, g_new(n);
    double f_new = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    const double slope = g.dot(d);
    for (int k = 0; k < 60; ++k, alpha *= 0.5) {
      x_new = x + alpha * d;
      try {
        f_new = lik.value_and_gradient(std::span<const double>(x_new.data(), n),
                                       std::span<double>(g_new.data(), n));
      } catch (const NumericError&) {
        continue;
      } catch (const DomainError&) {
        continue;
      }
      if (std::isfinite(f_new) && f_new >= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.termination = "line search failed";
      break;
    }

    VectorXd s = x_new - x;
    VectorXd y = g - g_new;  // gradient change of -lnL
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      MatrixXd left = MatrixXd::Identity(n, n) - rho * s * y.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }

    const double rel = std::abs(f_new - f) / std::max(1.0, std::abs(f));
    x = x_new;
    f = f_new;
    g = g_new;
    if (rel < opt.relative_ll_tolerance) {
      out.converged = true;
      out.termination = "relative log-likelihood change below tolerance";
      ++out.iterations;
      break;
    }
  }
  if (out.termination.empty()) out.termination = "maximum iterations reached";
  out.x = x;
  out.ll = f;
  out.grad = g;
  return out;
}

// Central differences of the analytic gradient, symmetrised.
MatrixXd numerical_hessian(const JointLikelihood& lik, const VectorXd& x) {
  const auto n = x.size();
  MatrixXd h(n, n);
  VectorXd up(n), down(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double step = 1e-5 * std::max(1.0, std::abs(x[j]));
    VectorXd xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    lik.value_and_gradient(std::span<const double>(xp.data(), n), std::span<double>(up.data(), n));
    lik.value_and_gradient(std::span<const double>(xm.data(), n), std::span<double>(down.data(), n));
    h.col(j) = (up - down) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

// Inverse of a symmetric positive definite matrix, or nothing when it is
// numerically singular or indefinite.
std::optional<MatrixXd> spd_inverse(const MatrixXd& m) {
  if (m.rows() == 0) return MatrixXd(0, 0);
  if (!m.allFinite()) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) return std::nullopt;
  const double max_ev = eig.eigenvalues().maxCoeff();
  const double min_ev = eig.eigenvalues().minCoeff();
  if (!(max_ev > 0.0) || min_ev <= 1e-12 * max_ev) return std::nullopt;
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

EstimationResult estimate(const ModelSpec& spec, const ChoiceDataset& data, const ParameterVector& init,
                          const EstimationOptions& options) {
  if (data.observations.empty()) throw DomainError("no observations");
  JointLikelihood lik(spec, data, init, options.threads);
  const auto x0v = lik.free_values();
  VectorXd x0 = Eigen::Map<const VectorXd>(x0v.data(), static_cast<Eigen::Index>(x0v.size()));

  Optimum opt = bfgs(lik, x0, options);
  const auto n = opt.x.size();

  EstimationResult r;
  r.params = lik.with_free(std::span<const double>(opt.x.data(), n));
  r.free_names = lik.free_names();
  r.ll1 = opt.ll;
  r.converged = opt.converged;
  r.iterations = opt.iterations;
  r.gradient_norm = opt.grad.norm();
  r.termination = opt.termination;
  r.n_free_params = static_cast<std::size_t>(n);
  r.n_observations = data.observations.size();
  r.ll0_convention = options.ll0_convention;

  std::optional<MatrixXd> cov;
  try {
    cov = spd_inverse(-numerical_hessian(lik, opt.x));
  } catch (const DomainError&) {
    // a difference step left the support; fall back to BHHH
  } catch (const NumericError&) {
  }
  r.covariance_source = CovarianceSource::Hessian;
  if (!cov) {
    auto s = lik.scores(std::span<const double>(opt.x.data(), n));
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> scores(
        s.data(), static_cast<Eigen::Index>(data.observations.size()), n);
    cov = spd_inverse(scores.transpose() * scores);
    r.covariance_source = CovarianceSource::Bhhh;
  }
  if (!cov) r.covariance_source = CovarianceSource::Unavailable;
  for (Eigen::Index i = 0; i < n; ++i)
    r.std_errors[r.free_names[i]] =
        cov ? std::sqrt((*cov)(i, i)) : std::numeric_limits<double>::quiet_NaN();
  if (cov) {
    r.covariance.resize(static_cast<std::size_t>(n * n));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) r.covariance[i * n + j] = (*cov)(i, j);
  }

  r.ll0 = options.ll0_convention == Ll0Convention::EqualShares
              ? equal_shares_log_likelihood(data)
              : constants_only_log_likelihood(spec, data, options);
  r.rho = rho_squared(r.ll0, r.ll1);
  r.rho_adjusted = rho_squared_adjusted(r.ll0, r.ll1, r.n_free_params);
  for (const auto& v : spec.vot) {
    const double cost = r.params.value(v.cost_coefficient);
    r.vot[v.label] = cost == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                 : value_of_time(r.params, v.time_coefficient, v.cost_coefficient);
  }
  return r;
}

double constants_only_log_likelihood(const ModelSpec& spec, const ChoiceDataset& data,
                                     const EstimationOptions& options) {
  ModelSpec restricted = spec;
  restricted.theta.fixed_value = 1.0;
  std::set<std::string> constants;
  for (const auto* terms : {&spec.mode_terms, &spec.destination_terms})
    for (const auto& t : *terms)
      if (t.is_constant()) constants.insert(t.coefficient);
  ParameterVector params;
  for (const auto& name : restricted.coefficient_names()) {
    if (name == spec.scale.coefficient) {
      params.add(name, 1.0, true);
    } else {
      params.add(name, 0.0, !constants.count(name));
    }
  }
  JointLikelihood lik(restricted, data, params, options.threads);
  if (lik.free_count() == 0) return lik.value({});
  const auto x0v = lik.free_values();
  VectorXd x0 = Eigen::Map<const VectorXd>(x0v.data(), static_cast<Eigen::Index>(x0v.size()));
  return bfgs(lik, x0, options).ll;
}

std::string format_report(const ModelSpec& spec, const EstimationResult& r) {
  std::ostringstream os;
  os << "Estimation results (" << to_string(spec.purpose);
  if (!spec.name.empty()) os << ", " << spec.name;
  os << ")\n";
  os << std::left << std::setw(28) << "Parameter" << std::right << std::setw(14) << "Estimate"
     << std::setw(12) << "Std.Err" << std::setw(10) << "t" << "  Sig\n";
  os << std::string(70, '-') << "\n";

  auto row = [&](const std::string& name) {
    const auto& p = r.params.at(name);
    os << std::left << std::setw(28) << name << std::right << std::setw(14) << std::setprecision(6)
       << std::defaultfloat << p.value;
    if (p.fixed) {
      os << std::setw(12) << "-" << std::setw(10) << "-" << "  (fixed)\n";
      return;
    }
    const double se = r.std_errors.at(name);
    const double t = r.t_ratio(name);
    os << std::setw(12) << std::setprecision(4) << se << std::setw(10) << std::fixed
       << std::setprecision(3) << t << std::defaultfloat << "  " << significance_stars(t) << "\n";
  };

  auto section = [&](const char* title, auto&& names) {
    if (names.empty()) return;
    os << title << "\n";
    for (const auto& n : names) row(n);
  };
  std::vector<std::string> dest, theta, mode;
  auto push_unique = [](std::vector<std::string>& v, const std::string& n) {
    if (std::find(v.begin(), v.end(), n) == v.end()) v.push_back(n);
  };
  for (const auto& t : spec.destination_terms) push_unique(dest, t.coefficient);
  for (const auto& t : spec.theta.terms) push_unique(theta, t.coefficient);
  for (const auto& t : spec.mode_terms) push_unique(mode, t.coefficient);
  section("Destination choice", dest);
  section("Theta explanatory variables", theta);
  section("Mode choice", mode);
  section("Scale parameter", std::vector<std::string>{spec.scale.coefficient});

  os << std::string(70, '-') << "\n" << std::fixed;
  os << std::left << std::setw(28) << "LL0 (" + std::string(to_string(r.ll0_convention)) + ")"
     << std::right << std::setw(14) << std::setprecision(3) << r.ll0 << "\n";
  os << std::left << std::setw(28) << "LL1" << std::right << std::setw(14) << r.ll1 << "\n";
  os << std::left << std::setw(28) << "rho" << std::right << std::setw(14) << std::setprecision(4)
     << r.rho << "\n";
  os << std::left << std::setw(28) << "rho.adj" << std::right << std::setw(14) << r.rho_adjusted << "\n";
  for (const auto& [label, v] : r.vot)
    os << std::left << std::setw(28) << ("VOT (" + label + ")") << std::right << std::setw(14)
       << std::setprecision(2) << v << "\n";
  os << std::left << std::setw(28) << "Number of observations" << std::right << std::setw(14)
     << r.n_observations << "\n";
  os << std::left << std::setw(28) << "Free parameters" << std::right << std::setw(14) << r.n_free_params
     << "\n";
  os << "Converged: " << (r.converged ? "yes" : "no") << " (" << r.termination << ", " << r.iterations
     << " iterations, |g| = " << std::scientific << std::setprecision(2) << r.gradient_norm << ")\n";
  os << "Standard errors: " << to_string(r.covariance_source) << "\n";
  os << "(*) significant at 90% level, (**) significant at 95% level\n";
  return os.str();
}

}  // namespace intercity
