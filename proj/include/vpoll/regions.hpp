#pragma once

#include <span>
#include <string>
#include <string_view>

#include "vpoll/survey_data.hpp"

namespace vpoll {

/// The 50 states plus "Washington DC", alphabetical.
std::span<const std::string_view> us_states() noexcept;

/// Mainland provincial-level divisions covered by the WVS China sample.
std::span<const std::string_view> china_provinces() noexcept;

/// Empty span for countries without a configured region list.
std::span<const std::string_view> regions_for(Country country) noexcept;

bool is_known_region(Country country, std::string_view region) noexcept;

}  // namespace vpoll
