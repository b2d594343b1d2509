#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "intercity/model_spec.hpp"
#include "intercity/types.hpp"

namespace intercity {

/// Synthetic north-south corridor: seven zones Z2..Z8 at increasing distance
/// from the origin, plausible fares (Mil VND) and times (minutes). Business
/// templates offer airline, LCC and HSR at every zone; non-business
/// templates offer all six modes at Z6 and Z8. Observations are SP templates
/// without a chosen alternative and carry every covariate used by the
/// bundled choice and trip generation models.
ChoiceDataset make_corridor_fixture(Purpose purpose, std::size_t individuals, std::uint64_t seed);

/// Choice templates for every zone and context of `spec`, offering exactly the
/// modes the spec makes available there. Covariates follow the corridor
/// fixture; covariates it does not know are drawn uniform on [0, 1). Used by
/// synthetic-data generation for recovery runs.
ChoiceDataset make_synthetic_templates(const ModelSpec& spec, std::size_t individuals, std::uint64_t seed,
                                       const std::set<Context>& contexts = {Context::RP, Context::SP});

/// Road distance in km used to build the fixture's LOS.
double corridor_distance_km(const std::string& zone);

/// Z2..Z5 -> "MD", Z6..Z8 -> "LD".
std::map<std::string, std::string> corridor_distance_classes();

}  // namespace intercity
