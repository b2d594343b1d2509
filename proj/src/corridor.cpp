#include "intercity/corridor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "intercity/errors.hpp"

namespace intercity {

namespace {

struct ZoneDistance {
  const char* id;
  double km;
};

constexpr std::array<ZoneDistance, 7> kZones{{{"Z2", 150.0},
                                               {"Z3", 300.0},
                                               {"Z4", 550.0},
                                               {"Z5", 770.0},
                                               {"Z6", 1050.0},
                                               {"Z7", 1300.0},
                                               {"Z8", 1650.0}}};

struct ModeLos {
  double cost, ivt, access;
};

ModeLos planned_los(const std::string& mode, double km) {
  const double airline_cost = 0.8 + 0.0011 * km;
  if (mode == "airline") return {airline_cost, 50.0 + 0.065 * km, 110.0};
  if (mode == "lcc") return {0.6 * airline_cost, 55.0 + 0.065 * km, 120.0};
  if (mode == "hsr") return {0.1 + 0.00125 * km, 20.0 + km / 280.0 * 60.0, 40.0};
  if (mode == "bus") return {0.00045 * km, km / 45.0 * 60.0, 30.0};
  if (mode == "cr") return {0.0006 * km, km / 50.0 * 60.0, 35.0};
  if (mode == "car") return {0.0016 * km, km / 55.0 * 60.0, 0.0};
  throw ConfigError("corridor fixture has no LOS profile for mode '" + mode + "'");
}

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  template <std::size_t N>
  std::size_t categorical(const std::array<double, N>& p) {
    double u = uniform(), c = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      c += p[i];
      if (u < c) return i;
    }
    return N - 1;
  }

 private:
  std::mt19937_64 rng_;
};

const std::vector<std::string> kCovariates{
    "age", "income", "car_owner", "married", "male", "working", "family", "summer",
    "occ_x_age", "edu_x_income", "income_x_family", "education_univ",
    "occupation=gov_office", "occupation=laborer", "occupation=other",
    "education=college", "education=bachelor", "education=master_doctor", "education=other",
    "rp_bus", "rp_cr", "rp_airline", "rp_lcc", "rp_visit_Z6", "rp_visit_Z8"};

// Fills the corridor covariates of one individual. `cov` is aligned with
// kCovariates.
void draw_individual(Draw& draw, std::vector<double>& cov) {
  cov.assign(kCovariates.size(), 0.0);
  auto set = [&](const char* name, double v) {
    for (std::size_t k = 0; k < kCovariates.size(); ++k)
      if (kCovariates[k] == name) cov[k] = v;
  };
  const double age = std::floor(draw.uniform(20.0, 65.0));
  const double income = draw.uniform(2.0, 15.0);
  const std::size_t occupation = draw.categorical(std::array<double, 4>{0.40, 0.40, 0.08, 0.12});
  const std::size_t education = draw.categorical(std::array<double, 5>{0.15, 0.19, 0.56, 0.05, 0.05});
  const bool family = draw.bernoulli(0.5);
  const bool univ = education == 2 || education == 3;
  set("age", age);
  set("income", income);
  set("car_owner", draw.bernoulli(0.3));
  set("married", draw.bernoulli(0.6));
  set("male", draw.bernoulli(0.53));
  set("working", draw.bernoulli(0.8));
  set("family", family);
  set("summer", draw.bernoulli(0.4));
  set("occ_x_age", occupation == 1 ? age : 0.0);
  set("edu_x_income", univ ? income : 0.0);
  set("income_x_family", family ? income : 0.0);
  set("education_univ", univ);
  set("occupation=gov_office", occupation == 1);
  set("occupation=laborer", occupation == 2);
  set("occupation=other", occupation == 3);
  set("education=college", education == 1);
  set("education=bachelor", education == 2);
  set("education=master_doctor", education == 3);
  set("education=other", education == 4);
  const std::size_t rp_mode = draw.categorical(std::array<double, 5>{0.25, 0.2, 0.15, 0.25, 0.15});
  set("rp_bus", rp_mode == 0);
  set("rp_cr", rp_mode == 1);
  set("rp_airline", rp_mode == 3);
  set("rp_lcc", rp_mode == 4);
  set("rp_visit_Z6", draw.bernoulli(0.3));
  set("rp_visit_Z8", draw.bernoulli(0.4));
}

Alternative draw_alternative(Draw& draw, std::size_t zone, std::size_t mode, const ModeLos& los) {
  Alternative alt;
  alt.zone = zone;
  alt.mode = mode;
  alt.los = {los.cost * draw.uniform(0.85, 1.15), los.ivt * draw.uniform(0.9, 1.1),
             los.access * draw.uniform(0.8, 1.2)};
  return alt;
}

bool has_profile(const std::string& mode) {
  for (const char* m : {"airline", "lcc", "hsr", "bus", "cr", "car"})
    if (mode == m) return true;
  return false;
}

}  // namespace

double corridor_distance_km(const std::string& zone) {
  for (const auto& z : kZones)
    if (zone == z.id) return z.km;
  throw ConfigError("zone '" + zone + "' is not part of the corridor fixture");
}

std::map<std::string, std::string> corridor_distance_classes() {
  std::map<std::string, std::string> out;
  for (const auto& z : kZones) out[z.id] = z.km < 1000.0 ? "MD" : "LD";
  return out;
}

ChoiceDataset make_corridor_fixture(Purpose purpose, std::size_t individuals, std::uint64_t seed) {
  std::vector<std::string> zones, modes;
  if (purpose == Purpose::Business) {
    for (const auto& z : kZones) zones.emplace_back(z.id);
    modes = {"airline", "lcc", "hsr"};
  } else {
    zones = {"Z6", "Z8"};
    modes = {"bus", "cr", "car", "airline", "lcc", "hsr"};
  }
  ChoiceDataset data;
  data.schema = DatasetSchema(zones, modes, kCovariates, {"cost", "ivt", "access"},
                              {"Mil VND", "min", "min"});
  Draw draw(seed);
  for (std::size_t i = 0; i < individuals; ++i) {
    Observation obs;
    obs.id = "t" + std::to_string(i + 1);
    obs.individual_id = "p" + std::to_string(i + 1);
    obs.context = Context::SP;
    draw_individual(draw, obs.covariates);
    for (std::size_t z = 0; z < zones.size(); ++z) {
      const double km = corridor_distance_km(zones[z]);
      for (std::size_t m = 0; m < modes.size(); ++m)
        obs.alternatives.push_back(draw_alternative(draw, z, m, planned_los(modes[m], km)));
    }
    data.observations.push_back(std::move(obs));
  }
  return data;
}

ChoiceDataset make_synthetic_templates(const ModelSpec& spec, std::size_t individuals, std::uint64_t seed,
                                       const std::set<Context>& contexts) {
  std::vector<std::string> zones, modes, covariates = kCovariates;
  for (const auto& z : spec.zones) zones.push_back(z.id);
  for (const auto& m : spec.modes) modes.push_back(m.id);
  auto need = [&](const std::vector<Factor>& factors) {
    for (const auto& f : factors) {
      if (f.kind == FactorKind::Los && f.name != "cost" && f.name != "ivt" && f.name != "access")
        throw ConfigError("synthetic templates only provide cost, ivt and access; '" + f.name + "' is referenced");
      if (f.kind == FactorKind::Covariate &&
          std::find(covariates.begin(), covariates.end(), f.name) == covariates.end())
        covariates.push_back(f.name);
    }
  };
  for (const auto& t : spec.destination_terms) need(t.factors);
  for (const auto& t : spec.mode_terms) need(t.factors);
  for (const auto& t : spec.theta.terms) need(t.factors);

  ChoiceDataset data;
  data.schema = DatasetSchema(zones, modes, covariates, {"cost", "ivt", "access"}, {"Mil VND", "min", "min"});
  Draw draw(seed);
  for (std::size_t i = 0; i < individuals; ++i) {
    std::vector<double> cov;
    draw_individual(draw, cov);
    cov.resize(covariates.size());
    for (std::size_t k = kCovariates.size(); k < covariates.size(); ++k) cov[k] = draw.uniform();
    for (Context ctx : contexts) {
      Observation obs;
      obs.id = "t" + std::to_string(i + 1) + "-" + std::string(to_string(ctx));
      obs.individual_id = "p" + std::to_string(i + 1);
      obs.context = ctx;
      obs.covariates = cov;
      for (std::size_t z = 0; z < zones.size(); ++z) {
        const auto it = std::find_if(kZones.begin(), kZones.end(), [&](const ZoneDistance& d) { return zones[z] == d.id; });
        const double km = it != kZones.end() ? it->km : 150.0 * static_cast<double>(z + 1);
        for (std::size_t m = 0; m < modes.size(); ++m) {
          if (!spec.modes[m].available(ctx, zones[z])) continue;
          ModeLos los = has_profile(modes[m])
                            ? planned_los(modes[m], km)
                            : ModeLos{0.3 + 0.001 * km * (1.0 + 0.25 * static_cast<double>(m)),
                                      30.0 + km / (60.0 + 20.0 * static_cast<double>(m)) * 60.0,
                                      20.0 + 10.0 * static_cast<double>(m)};
          obs.alternatives.push_back(draw_alternative(draw, z, m, los));
        }
      }
      if (!obs.alternatives.empty()) data.observations.push_back(std::move(obs));
    }
  }
  return data;
}

}  // namespace intercity
