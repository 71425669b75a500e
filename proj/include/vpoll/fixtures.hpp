#pragma once

#include <cstdint>
#include <vector>

#include "vpoll/survey_data.hpp"

namespace vpoll {

/// Synthetic stand-ins for survey micro-data. Responses follow a latent trait
/// driven by age, education and gender plus noise, so item pairs correlate
/// and the two waves differ mildly in composition.
struct WvsFixture {
  SurveySample current;     // wave-7 style, with human responses
  SurveySample historical;  // wave-6 style
};

WvsFixture make_wvs_fixture(Country country, std::size_t n_current, std::size_t n_historical, std::uint64_t seed,
                            const std::vector<QuestionSpec>& catalog);

/// ANES-style roster covering every state (the first 51 rows take one state
/// each), with sampling weights in [0.5, 2].
SurveySample make_anes_fixture(std::size_t n, std::uint64_t seed);

}  // namespace vpoll
