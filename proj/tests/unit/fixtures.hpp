#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "intercity/model_spec.hpp"
#include "intercity/types.hpp"

namespace fx {

using namespace intercity;

inline Factor los(const char* n) { return {FactorKind::Los, n}; }
inline Factor zattr(const char* n) { return {FactorKind::Zone, n}; }
inline Factor cov(const char* n) { return {FactorKind::Covariate, n}; }

inline UtilityTerm term(std::string coef, std::vector<Factor> factors, std::set<std::string> modes = {},
                        std::set<std::string> zones = {}, std::set<Context> ctx = {Context::RP, Context::SP},
                        bool scaled = true) {
  UtilityTerm t;
  t.coefficient = std::move(coef);
  t.factors = std::move(factors);
  t.modes = std::move(modes);
  t.zones = std::move(zones);
  t.contexts = std::move(ctx);
  t.scaled_by_mu = scaled;
  return t;
}

/// Zones A, B, C; modes m1, m2, m3 everywhere; m3 is the base mode.
/// Ten coefficients: size, cost, time, asc_m1, asc_m2, inc_m1, age_m2,
/// th_const, th_inc, mu.
inline ModelSpec three_by_three() {
  ModelSpec s;
  s.name = "toy";
  s.zones = {{"A", {{"size", 0.2}}}, {"B", {{"size", 1.1}}}, {"C", {{"size", -0.4}}}};
  s.modes = {{"m1", {}}, {"m2", {}}, {"m3", {}}};
  s.destination_terms = {term("size", {zattr("size")}, {}, {}, {Context::RP, Context::SP}, false)};
  s.mode_terms = {term("cost", {los("cost")}),
                  term("time", {los("time")}),
                  term("asc_m1", {}, {"m1"}),
                  term("asc_m2", {}, {"m2"}),
                  term("inc_m1", {cov("inc")}, {"m1"}),
                  term("age_m2", {cov("age")}, {"m2"})};
  s.theta.terms = {{"th_const", {}, {Context::RP, Context::SP}}, {"th_inc", {cov("inc")}, {Context::RP, Context::SP}}};
  s.attribute_units = {{"cost", "Mil VND"}, {"time", "min"}};
  s.vot = {{"in-vehicle time", "time", "cost"}};
  return s;
}

/// Same layout with theta pinned to 1 and no theta coefficients.
inline ModelSpec three_by_three_flat() {
  ModelSpec s = three_by_three();
  s.theta.terms.clear();
  s.theta.fixed_value = 1.0;
  return s;
}

inline ParameterVector toy_params(const ModelSpec& spec) {
  ParameterVector p;
  const std::map<std::string, double> v{{"size", 0.6},   {"cost", -1.3},  {"time", -0.02}, {"asc_m1", 0.4},
                                        {"asc_m2", -0.3}, {"inc_m1", 0.05}, {"age_m2", 0.01}, {"th_const", 0.5},
                                        {"th_inc", 0.08}, {"mu", 0.7}};
  for (const auto& name : spec.coefficient_names()) p.add(name, v.at(name));
  return p;
}

/// Random parameter draw with theta and mu kept in sensible ranges.
inline ParameterVector random_params(const ModelSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ParameterVector p;
  for (const auto& name : spec.coefficient_names()) {
    double v = u(rng);
    if (name == "mu") v = 0.5 + 0.5 * (v + 1.0);
    if (name == "cost") v = -1.0 + 0.5 * v;
    if (name == "time") v *= 0.03;
    if (name == "age_m2") v *= 0.02;
    if (name == "th_inc") v *= 0.1;
    p.add(name, v);
  }
  return p;
}

/// `n` observations alternating RP/SP, every (zone, mode) available unless
/// `drop` is set, in which case some cells are removed at random. The chosen
/// alternative is drawn uniformly.
inline ChoiceDataset toy_data(std::size_t n, std::uint64_t seed, bool drop = false) {
  ChoiceDataset d;
  d.schema = DatasetSchema({"A", "B", "C"}, {"m1", "m2", "m3"}, {"inc", "age"}, {"cost", "time"}, {"Mil VND", "min"});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    Observation o;
    o.id = "o" + std::to_string(i);
    o.individual_id = "p" + std::to_string(i / 2);
    o.context = i % 2 ? Context::SP : Context::RP;
    o.covariates = {2.0 + 10.0 * u(rng), 20.0 + 40.0 * u(rng)};
    for (std::size_t z = 0; z < 3; ++z)
      for (std::size_t m = 0; m < 3; ++m) {
        if (drop && u(rng) < 0.25 && !(z == 0 && m == 2)) continue;
        o.alternatives.push_back({z, m, {0.2 + 2.0 * u(rng), 30.0 + 200.0 * u(rng)}});
      }
    o.chosen = static_cast<std::size_t>(u(rng) * static_cast<double>(o.alternatives.size()));
    d.observations.push_back(std::move(o));
  }
  return d;
}

inline double logistic_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace fx
