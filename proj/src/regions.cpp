#include "vpoll/regions.hpp"

#include <algorithm>
#include <array>

namespace vpoll {

namespace {

constexpr std::array<std::string_view, 51> kUsStates = {
    "Alabama",       "Alaska",         "Arizona",        "Arkansas",      "California",
    "Colorado",      "Connecticut",    "Delaware",       "Florida",       "Georgia",
    "Hawaii",        "Idaho",          "Illinois",       "Indiana",       "Iowa",
    "Kansas",        "Kentucky",       "Louisiana",      "Maine",         "Maryland",
    "Massachusetts", "Michigan",       "Minnesota",      "Mississippi",   "Missouri",
    "Montana",       "Nebraska",       "Nevada",         "New Hampshire", "New Jersey",
    "New Mexico",    "New York",       "North Carolina", "North Dakota",  "Ohio",
    "Oklahoma",      "Oregon",         "Pennsylvania",   "Rhode Island",  "South Carolina",
    "South Dakota",  "Tennessee",      "Texas",          "Utah",          "Vermont",
    "Virginia",      "Washington",     "Washington DC",  "West Virginia", "Wisconsin",
    "Wyoming",
};

constexpr std::array<std::string_view, 31> kChinaProvinces = {
    "Anhui",    "Beijing",   "Chongqing", "Fujian",         "Gansu",    "Guangdong", "Guangxi",
    "Guizhou",  "Hainan",    "Hebei",     "Heilongjiang",   "Henan",    "Hubei",     "Hunan",
    "Inner Mongolia", "Jiangsu", "Jiangxi", "Jilin",        "Liaoning", "Ningxia",   "Qinghai",
    "Shaanxi",  "Shandong",  "Shanghai",  "Shanxi",         "Sichuan",  "Tianjin",   "Tibet",
    "Xinjiang", "Yunnan",    "Zhejiang",
};

}  // namespace

std::span<const std::string_view> us_states() noexcept { return kUsStates; }

std::span<const std::string_view> china_provinces() noexcept { return kChinaProvinces; }

std::span<const std::string_view> regions_for(Country country) noexcept {
  switch (country) {
    case Country::US: return kUsStates;
    case Country::CN: return kChinaProvinces;
    default: return {};
  }
}

bool is_known_region(Country country, std::string_view region) noexcept {
  const auto list = regions_for(country);
  if (list.empty()) return !region.empty();
  return std::find(list.begin(), list.end(), region) != list.end();
}

}  // namespace vpoll
