#include "intercity/likelihood.hpp"

#include <algorithm>
#include <cmath>

#include "intercity/errors.hpp"
#include "parallel.hpp"

namespace intercity {

double Gradient::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

double Gradient::at(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw ConfigError("no gradient entry for '" + name + "' (fixed or undeclared)");
}

JointLikelihood::JointLikelihood(const ModelSpec& spec, const ChoiceDataset& data,
                                 ParameterVector params, unsigned threads)
    : model_(spec, data.schema, params),
      data_(&data),
      params_(std::move(params)),
      free_(params_.free_indices()),
      threads_(threads) {
  std::vector<std::string> errors;
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    const auto& obs = data.observations[i];
    if (!obs.chosen || *obs.chosen >= obs.alternatives.size())
      errors.push_back("observation '" + obs.id + "' has no chosen alternative");
    if (!(obs.weight > 0.0) || !std::isfinite(obs.weight))
      errors.push_back("observation '" + obs.id + "' has a non-positive weight");
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

std::vector<double> JointLikelihood::free_values() const {
  std::vector<double> out;
  for (auto i : free_) out.push_back(params_.entries()[i].value);
  return out;
}

std::vector<double> JointLikelihood::expand(std::span<const double> free_values) const {
  if (free_values.size() != free_.size())
    throw DomainError("expected " + std::to_string(free_.size()) + " free parameter values, got " +
                      std::to_string(free_values.size()));
  std::vector<double> full = params_.values();
  for (std::size_t k = 0; k < free_.size(); ++k) full[free_[k]] = free_values[k];
  return full;
}

ParameterVector JointLikelihood::with_free(std::span<const double> free_values) const {
  ParameterVector out = params_;
  auto full = expand(free_values);
  for (std::size_t i = 0; i < full.size(); ++i) out.set_value(out.entries()[i].name, full[i]);
  return out;
}

LikelihoodValue JointLikelihood::evaluate(std::span<const double> free_values,
                                          bool per_observation) const {
  const auto full = expand(free_values);
  const auto& obs = data_->observations;
  const std::size_t chunks = detail::chunk_count(obs.size());
  std::vector<double> rp(chunks, 0.0), sp(chunks, 0.0);
  LikelihoodValue out;
  if (per_observation) out.per_observation.assign(obs.size(), 0.0);

  detail::for_each_chunk(chunks, threads_, [&](std::size_t c) {
    const std::size_t end = std::min(obs.size(), (c + 1) * detail::kChunkSize);
    for (std::size_t i = c * detail::kChunkSize; i < end; ++i) {
      double ll = model_.log_likelihood(full, obs[i]);
      (obs[i].context == Context::RP ? rp[c] : sp[c]) += ll;
      if (per_observation) out.per_observation[i] = ll;
    }
  });
  double rp_total = 0.0, sp_total = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    rp_total += rp[c];
    sp_total += sp[c];
  }
  out.per_context[Context::RP] = rp_total;
  out.per_context[Context::SP] = sp_total;
  out.total = rp_total + sp_total;
  return out;
}

double JointLikelihood::value(std::span<const double> free_values) const {
  return evaluate(free_values, false).total;
}

double JointLikelihood::value_and_gradient(std::span<const double> free_values,
                                           std::span<double> gradient) const {
  const auto full = expand(free_values);
  const auto& obs = data_->observations;
  const std::size_t chunks = detail::chunk_count(obs.size());
  const std::size_t p = full.size();
  std::vector<double> ll(chunks, 0.0);
  std::vector<double> grad(chunks * p, 0.0);

  detail::for_each_chunk(chunks, threads_, [&](std::size_t c) {
    const std::size_t end = std::min(obs.size(), (c + 1) * detail::kChunkSize);
    std::span<double> g(grad.data() + c * p, p);
    for (std::size_t i = c * detail::kChunkSize; i < end; ++i)
      ll[c] += model_.log_likelihood(full, obs[i], g);
  });

  double total = 0.0;
  std::vector<double> full_grad(p, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    total += ll[c];
    for (std::size_t j = 0; j < p; ++j) full_grad[j] += grad[c * p + j];
  }
  for (std::size_t k = 0; k < free_.size(); ++k) {
    gradient[k] = full_grad[free_[k]];
    if (!std::isfinite(gradient[k]))
      throw NumericError("non-finite gradient component for '" + params_.entries()[free_[k]].name + "'");
  }
  return total;
}

std::vector<double> JointLikelihood::finite_difference_gradient(std::span<const double> free_values) const {
  std::vector<double> x(free_values.begin(), free_values.end());
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
    const double orig = x[k];
    x[k] = orig + h;
    const double up = value(x);
    x[k] = orig - h;
    const double down = value(x);
    x[k] = orig;
    out[k] = (up - down) / (2.0 * h);
    if (!std::isfinite(out[k]))
      throw NumericError("non-finite gradient component for '" + params_.entries()[free_[k]].name + "'");
  }
  return out;
}

std::vector<double> JointLikelihood::scores(std::span<const double> free_values) const {
  const auto full = expand(free_values);
  const auto& obs = data_->observations;
  const std::size_t p = full.size();
  const std::size_t k = free_.size();
  std::vector<double> out(obs.size() * k, 0.0);
  detail::for_each_chunk(detail::chunk_count(obs.size()), threads_, [&](std::size_t c) {
    std::vector<double> g(p);
    const std::size_t end = std::min(obs.size(), (c + 1) * detail::kChunkSize);
    for (std::size_t i = c * detail::kChunkSize; i < end; ++i) {
      std::fill(g.begin(), g.end(), 0.0);
      model_.log_likelihood(full, obs[i], g);
      for (std::size_t j = 0; j < k; ++j) out[i * k + j] = g[free_[j]];
    }
  });
  return out;
}

LikelihoodValue log_likelihood(const ModelSpec& spec, const ParameterVector& params,
                               const ChoiceDataset& data, LikelihoodOptions options) {
  JointLikelihood lik(spec, data, params, options.threads);
  return lik.evaluate(lik.free_values(), options.per_observation);
}

Gradient gradient(const ModelSpec& spec, const ParameterVector& params, const ChoiceDataset& data,
                  GradientMethod method, unsigned threads) {
  JointLikelihood lik(spec, data, params, threads);
  Gradient out;
  out.names = lik.free_names();
  const auto x = lik.free_values();
  if (method == GradientMethod::Analytic) {
    out.values.resize(x.size());
    lik.value_and_gradient(x, out.values);
  } else {
    out.values = lik.finite_difference_gradient(x);
  }
  return out;
}

double equal_shares_log_likelihood(const ChoiceDataset& data) {
  double total = 0.0;
  for (const auto& obs : data.observations) {
    if (!obs.chosen || *obs.chosen >= obs.alternatives.size())
      throw DomainError("observation '" + obs.id + "' has no chosen alternative");
    std::vector<std::size_t> zones;
    std::size_t modes_in_chosen = 0;
    const std::size_t chosen_zone = obs.alternatives[*obs.chosen].zone;
    for (const auto& alt : obs.alternatives) {
      if (std::find(zones.begin(), zones.end(), alt.zone) == zones.end()) zones.push_back(alt.zone);
      if (alt.zone == chosen_zone) ++modes_in_chosen;
    }
    total += obs.weight * (-std::log(static_cast<double>(zones.size())) -
                           std::log(static_cast<double>(modes_in_chosen)));
  }
  return total;
}

}  // namespace intercity
