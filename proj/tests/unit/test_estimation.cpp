#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "intercity/errors.hpp"
#include "intercity/estimation.hpp"
#include "intercity/nested_logit.hpp"

using namespace intercity;
using doctest::Approx;

namespace {

ChoiceDataset simulated(std::size_t n, std::uint64_t seed) {
  ModelSpec spec = fx::three_by_three();
  return simulate_choices(spec, fx::toy_params(spec), fx::toy_data(n, seed), seed + 1);
}

}  // namespace

TEST_CASE("fit statistics") {
  CHECK(rho_squared(-100.0, -70.0) == Approx(0.3));
  CHECK(rho_squared_adjusted(-100.0, -70.0, 5) == Approx(0.25));
  CHECK(rho_squared(-50.0, -50.0) == 0.0);
  CHECK_THROWS_AS(rho_squared(0.0, -1.0), DomainError);
}

TEST_CASE("value of time in VND per hour") {
  CHECK(value_of_time(-0.01, -2.0) == Approx(300000.0));
  CHECK(value_of_time(0.0, -1.0) == 0.0);
  CHECK_THROWS_AS(value_of_time(-0.01, 0.0), DomainError);
  ParameterVector p{{"t", -0.002, false}, {"c", -1.5, false}};
  CHECK(value_of_time(p, "t", "c") == Approx(80000.0));
}

TEST_CASE("significance stars") {
  CHECK(significance_stars(2.5) == "**");
  CHECK(significance_stars(-1.96) == "**");
  CHECK(significance_stars(1.7) == "*");
  CHECK(significance_stars(1.0).empty());
}

TEST_CASE("LL0 convention names") {
  CHECK(parse_ll0_convention("equal-shares") == Ll0Convention::EqualShares);
  CHECK(parse_ll0_convention(to_string(Ll0Convention::ConstantsOnly)) == Ll0Convention::ConstantsOnly);
  CHECK_THROWS_AS(parse_ll0_convention("zero"), ConfigError);
}

TEST_CASE("constants-only null has the closed form for one binary constant") {
  ModelSpec spec;
  spec.zones = {{"A", {}}};
  spec.modes = {{"x", {}}, {"y", {}}};
  spec.mode_terms = {fx::term("bx", {}, {"x"}), fx::term("slope", {fx::cov("z")}, {"x"})};
  ChoiceDataset d;
  d.schema = DatasetSchema({"A"}, {"x", "y"}, {"z"}, {});
  for (int i = 0; i < 100; ++i)
    d.observations.push_back({"o" + std::to_string(i), "p", Context::RP, {double(i % 7)},
                              {{0, 0, {}}, {0, 1, {}}}, std::size_t(i < 70 ? 0 : 1), 1.0});
  const double expected = 70 * std::log(0.7) + 30 * std::log(0.3);
  CHECK(constants_only_log_likelihood(spec, d) == Approx(expected).epsilon(1e-8));
}

TEST_CASE("estimation recovers the optimum of the toy model") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = simulated(3000, 21);
  ParameterVector truth = fx::toy_params(spec);
  EstimationResult r = estimate(spec, d, default_initial_parameters(spec));
  CHECK(r.converged);
  CHECK(r.n_observations == 3000);
  CHECK(r.n_free_params == 10);
  CHECK(r.ll1 >= log_likelihood(spec, truth, d).total);
  CHECK(r.ll0 == Approx(equal_shares_log_likelihood(d)));
  CHECK(r.rho == Approx(1.0 - r.ll1 / r.ll0));
  CHECK(r.rho_adjusted == Approx(1.0 - (r.ll1 - 10.0) / r.ll0));
  REQUIRE(r.std_errors_available());
  int within = 0;
  for (const auto& e : truth.entries())
    within += std::abs(r.params.value(e.name) - e.value) <= 3.0 * r.std_errors.at(e.name);
  CHECK(within >= 9);
  CHECK(r.vot.at("in-vehicle time") ==
        Approx(r.params.value("time") / r.params.value("cost") * 60e6));
  CHECK(r.t_ratio("cost") == Approx(r.params.value("cost") / r.std_errors.at("cost")));

  // Newton decrement g' V g: the log-likelihood still to gain, scale free.
  auto g = gradient(spec, r.params, d);
  const std::size_t k = g.values.size();
  REQUIRE(r.covariance.size() == k * k);
  double decrement = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) decrement += g.values[i] * r.covariance[i * k + j] * g.values[j];
  CHECK(decrement < 1e-6);

  const std::string report = format_report(spec, r);
  for (const char* s : {"cost", "th_inc", "rho", "in-vehicle time"}) CHECK(report.find(s) != std::string::npos);
}

TEST_CASE("rescaling an attribute rescales its coefficient only") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = simulated(1500, 5);
  ChoiceDataset scaled = d;
  for (auto& o : scaled.observations)
    for (auto& a : o.alternatives) a.los[0] *= 10.0;
  EstimationResult a = estimate(spec, d, default_initial_parameters(spec));
  EstimationResult b = estimate(spec, scaled, default_initial_parameters(spec));
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(b.ll1 == Approx(a.ll1).epsilon(1e-7));
  CHECK(b.params.value("cost") * 10.0 == Approx(a.params.value("cost")).epsilon(1e-3));
  CHECK(b.params.value("time") == Approx(a.params.value("time")).epsilon(1e-3));
}

TEST_CASE("fixed parameters stay put and are not counted") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = simulated(800, 2);
  ParameterVector init = default_initial_parameters(spec);
  init.set_value("mu", 0.7);
  init.set_fixed("mu", true);
  init.set_fixed("th_inc", true);
  EstimationResult r = estimate(spec, d, init);
  CHECK(r.params.value("mu") == 0.7);
  CHECK(r.params.value("th_inc") == 0.0);
  CHECK(r.n_free_params == 8);
  CHECK(r.std_errors.count("mu") == 0);
}

TEST_CASE("constants-only convention") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = simulated(600, 9);
  EstimationOptions opt;
  opt.ll0_convention = Ll0Convention::ConstantsOnly;
  EstimationResult r = estimate(spec, d, default_initial_parameters(spec), opt);
  CHECK(r.ll0 == Approx(constants_only_log_likelihood(spec, d)).epsilon(1e-9));
  CHECK(r.ll0 <= r.ll1);
}

TEST_CASE("iteration cap reports non-convergence") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = simulated(300, 4);
  EstimationOptions opt;
  opt.max_iterations = 1;
  EstimationResult r = estimate(spec, d, default_initial_parameters(spec), opt);
  CHECK_FALSE(r.converged);
  CHECK(r.termination == "maximum iterations reached");
}

TEST_CASE("empty dataset is a domain error") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = fx::toy_data(0, 1);
  CHECK_THROWS_AS(estimate(spec, d, default_initial_parameters(spec)), DomainError);
}
