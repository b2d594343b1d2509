#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "intercity/corridor.hpp"
#include "intercity/data_io.hpp"
#include "intercity/errors.hpp"
#include "intercity/scenario.hpp"

using namespace intercity;
using doctest::Approx;

namespace {

const std::string kData = INTERCITY_DATA_DIR;

Transformation scale(std::string mode, std::string attr, double f) {
  Transformation t;
  t.target.mode = std::move(mode);
  t.attribute = std::move(attr);
  t.factor = f;
  return t;
}

Transformation set(std::string mode, std::string attr, double v) {
  Transformation t = scale(std::move(mode), std::move(attr), 1.0);
  t.action = TransformAction::Set;
  t.value = v;
  return t;
}

Transformation copy(std::string mode, std::string attr, std::string from, double f) {
  Transformation t = scale(std::move(mode), std::move(attr), f);
  t.action = TransformAction::Copy;
  t.source.mode = std::move(from);
  return t;
}

const std::map<std::string, std::string> kClasses{{"A", "near"}, {"B", "near"}, {"C", "far"}};

}  // namespace

TEST_CASE("action names") {
  for (auto a : {TransformAction::Scale, TransformAction::Set, TransformAction::Copy, TransformAction::AddMode,
                 TransformAction::RemoveMode})
    CHECK(parse_transform_action(to_string(a)) == a);
  CHECK_THROWS_AS(parse_transform_action("double"), ConfigError);
  CHECK(copy("m1", "cost", "m2", 0.7).describe() == "copy m1.cost from m2.cost x0.7");
}

TEST_CASE("an empty scenario reproduces the baseline") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = fx::toy_data(30, 1, true);
  Scenario s{"base", "", {Purpose::Business}, {}, ""};
  ScenarioInput in = apply_scenario(d, spec.zones, s);
  CHECK(in.data == d);
  CHECK(in.zones == spec.zones);
}

TEST_CASE("scale multiplies only the targeted cells") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = fx::toy_data(10, 2);
  Scenario s{"S", "", {}, {scale("m2", "time", 0.8)}, ""};
  ScenarioInput in = apply_scenario(d, spec.zones, s);
  for (std::size_t i = 0; i < d.observations.size(); ++i)
    for (std::size_t a = 0; a < d.observations[i].alternatives.size(); ++a) {
      const auto& before = d.observations[i].alternatives[a];
      const auto& after = in.data.observations[i].alternatives[a];
      CHECK(after.los[1] == (before.mode == 1 ? 0.8 * before.los[1] : before.los[1]));
      CHECK(after.los[0] == before.los[0]);
    }
}

TEST_CASE("set is idempotent") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = fx::toy_data(10, 2);
  Scenario once{"S", "", {}, {set("m1", "cost", 0.9)}, ""};
  Scenario twice{"S", "", {}, {set("m1", "cost", 0.9), set("m1", "cost", 0.9)}, ""};
  CHECK(apply_scenario(d, spec.zones, once).data == apply_scenario(d, spec.zones, twice).data);
}

TEST_CASE("copy reads the baseline, not earlier edits") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = fx::toy_data(10, 2);
  Scenario s{"S", "", {}, {scale("m1", "cost", 3.0), copy("m2", "cost", "m1", 0.5)}, ""};
  ScenarioInput in = apply_scenario(d, spec.zones, s);
  for (std::size_t i = 0; i < d.observations.size(); ++i) {
    const auto& o = d.observations[i];
    for (const char* z : {"A", "B", "C"}) {
      const auto src = d.find_alternative(o, z, "m1");
      const auto dst = d.find_alternative(o, z, "m2");
      CHECK(in.data.observations[i].alternatives[*dst].los[0] == 0.5 * o.alternatives[*src].los[0]);
    }
  }
}

TEST_CASE("zone attribute copy") {
  ModelSpec spec = fx::three_by_three();
  Transformation t;
  t.target.zone = "C";
  t.attribute = "size";
  t.action = TransformAction::Copy;
  t.source.zone = "B";
  Scenario s{"S", "", {}, {t}, ""};
  ScenarioInput in = apply_scenario(fx::toy_data(2, 1), spec.zones, s);
  CHECK(in.zones[2].attributes.at("size") == 1.1);
  CHECK(in.zones[1].attributes.at("size") == 1.1);
  CHECK(in.zones[0].attributes.at("size") == 0.2);
}

TEST_CASE("add and remove modes") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = fx::toy_data(4, 3);
  Transformation add;
  add.action = TransformAction::AddMode;
  add.target.mode = "m4";
  add.target.zone = "B";
  add.source.mode = "m1";
  Transformation rm;
  rm.action = TransformAction::RemoveMode;
  rm.target.mode = "m2";
  ScenarioInput in = apply_scenario(d, spec.zones, {"S", "", {}, {add, rm}, ""});
  CHECK(in.data.schema.modes().size() == 4);
  for (const auto& o : in.data.observations) {
    CHECK(o.alternatives.size() == 9 - 3 + 1);
    CHECK(in.data.find_alternative(o, "B", "m4"));
    CHECK_FALSE(in.data.find_alternative(o, "A", "m2"));
  }
}

TEST_CASE("transformation problems are configuration errors") {
  ModelSpec spec = fx::three_by_three();
  ChoiceDataset d = fx::toy_data(4, 3);
  auto run = [&](Transformation t) { return apply_scenario(d, spec.zones, {"S", "", {}, {t}, ""}); };
  CHECK_THROWS_AS(run(scale("plane", "cost", 1.0)), ConfigError);
  CHECK_THROWS_AS(run(scale("m1", "comfort", 1.0)), ConfigError);
  CHECK_THROWS_AS(run(scale("m1", "cost", 0.0)), ConfigError);
  CHECK_THROWS_AS(run(copy("m1", "cost", "plane", 1.0)), ConfigError);
  Transformation none;
  CHECK_THROWS_AS(run(none), ConfigError);
}

TEST_CASE("identical alternatives share evenly") {
  ModelSpec spec;
  spec.zones = {{"A", {}}};
  spec.modes = {{"x", {}}, {"y", {}}};
  spec.mode_terms = {fx::term("cost", {fx::los("cost")})};
  ParameterVector p{{"cost", -1.0, false}, {"mu", 1.0, false}};
  ChoiceDataset d;
  d.schema = DatasetSchema({"A"}, {"x", "y"}, {}, {"cost"});
  d.observations.push_back({"o", "p", Context::SP, {}, {{0, 0, {1.0}}, {0, 1, {1.0}}}, std::nullopt, 1.0});
  ScenarioResult r = simulate_shares(spec, p, d, {{"A", "all"}});
  CHECK(r.mode_shares.at("all").at("x") == Approx(0.5));
  CHECK(r.mode_shares.at("all").at("y") == Approx(0.5));
  CHECK(r.destination_shares.at("A") == Approx(1.0));

  d.observations[0].alternatives.pop_back();
  ScenarioResult single = simulate_shares(spec, p, d, {{"A", "all"}});
  CHECK(single.mode_shares.at("all").at("x") == 1.0);
}

TEST_CASE("shares are proper distributions") {
  ModelSpec spec = fx::three_by_three();
  ScenarioResult r = simulate_shares(spec, fx::toy_params(spec), fx::toy_data(50, 3, true), kClasses);
  double dest = 0.0;
  for (const auto& [z, s] : r.destination_shares) dest += s;
  CHECK(dest == Approx(1.0).epsilon(1e-12));
  for (const auto& [cls, shares] : r.mode_shares) {
    double sum = 0.0;
    for (const auto& [m, s] : shares) sum += s;
    CHECK(sum == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("a zone without a distance class is an error") {
  ModelSpec spec = fx::three_by_three();
  CHECK_THROWS_AS(simulate_shares(spec, fx::toy_params(spec), fx::toy_data(5, 3), {{"A", "x"}, {"B", "x"}}),
                  ConfigError);
}

TEST_CASE("induced travel index") {
  auto rows = induced_travel_table({{"S1", 2.2}, {"S2", 2.0}, {"S3", 1.9}}, "S2");
  CHECK(rows[0].index == Approx(110.0));
  CHECK(rows[1].index == 100.0);
  CHECK(rows[2].index == Approx(95.0));
  CHECK_THROWS_AS(induced_travel_table({{"S1", 2.0}}, "S9"), DomainError);

  SUBCASE("invariant to a common rescaling of the weights") {
    ModelSpec spec = fx::three_by_three();
    ParameterVector p = fx::toy_params(spec);
    PoissonModel trips;
    trips.names = {std::string(kIntercept), "inc", "accessibility"};
    trips.coefficients = {0.1, 0.02, 0.6};
    ChoiceDataset d = fx::toy_data(40, 4, true);
    ScenarioSet set{"base", kClasses, {{"base", "", {Purpose::Business}, {}, ""},
                                       {"cheap", "", {Purpose::Business}, {scale("m1", "cost", 0.7)}, ""}}};
    auto a = run_scenarios(spec, p, d, set, &trips);
    for (auto& o : d.observations) o.weight *= 3.5;
    auto b = run_scenarios(spec, p, d, set, &trips);
    CHECK(*a[0].induced_index == 100.0);
    CHECK(*a[1].induced_index > 100.0);
    CHECK(*b[1].induced_index == Approx(*a[1].induced_index).epsilon(1e-12));
  }
}

TEST_CASE("scenarios run concurrently give the same results") {
  ModelSpec spec = fx::three_by_three();
  ParameterVector p = fx::toy_params(spec);
  ChoiceDataset d = fx::toy_data(40, 4, true);
  ScenarioSet set{"s0", kClasses, {}};
  for (int k = 0; k < 6; ++k)
    set.scenarios.push_back({"s" + std::to_string(k), "", {Purpose::Business}, {scale("m2", "cost", 0.6 + 0.1 * k)}, ""});
  auto one = run_scenarios(spec, p, d, set, nullptr, 1);
  auto many = run_scenarios(spec, p, d, set, nullptr, 3);
  REQUIRE(one.size() == many.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].scenario_id == many[i].scenario_id);
    CHECK(one[i].mean_accessibility == many[i].mean_accessibility);
    CHECK(one[i].mode_shares == many[i].mode_shares);
  }
}

TEST_CASE("shipped scenario set on the corridor fixture") {
  ScenarioSet set = load_scenarios(kData + "/scenarios/policy.json");
  ModelSpec spec = load_model_spec(kData + "/specs/business.json");
  ChoiceDataset base = make_corridor_fixture(Purpose::Business, 50, 7);

  SUBCASE("S6 scales HSR in-vehicle time to 80%") {
    ScenarioInput s4 = apply_scenario(base, spec.zones, *set.find("S4"));
    ScenarioInput s6 = apply_scenario(base, spec.zones, *set.find("S6"));
    const auto hsr = *base.schema.mode_index("hsr");
    const auto ivt = *base.schema.los_index("ivt");
    for (std::size_t i = 0; i < base.observations.size(); ++i)
      for (std::size_t a = 0; a < base.observations[i].alternatives.size(); ++a) {
        const auto& x4 = s4.data.observations[i].alternatives[a];
        const auto& x6 = s6.data.observations[i].alternatives[a];
        CHECK(x6.los[ivt] == (x4.mode == hsr ? 0.8 * x4.los[ivt] : x4.los[ivt]));
      }
  }
  SUBCASE("S15 gives Z6 the GRP of Z8") {
    ScenarioInput s15 = apply_scenario(base, spec.zones, *set.find("S15"));
    auto attr = [](const std::vector<Zone>& zs, const char* id) {
      for (const auto& z : zs)
        if (z.id == id) return z.attributes.at("log_grp");
      return std::nan("");
    };
    CHECK(attr(s15.zones, "Z6") == attr(spec.zones, "Z8"));
    CHECK(attr(s15.zones, "Z8") == attr(spec.zones, "Z8"));
  }
  SUBCASE("business-only scenarios are skipped for non-business") {
    CHECK_FALSE(set.find("S15")->applies_to(Purpose::NonBusiness));
    CHECK(set.find("S1")->applies_to(Purpose::NonBusiness));
    CHECK(set.base_id == "S4");
  }
}
