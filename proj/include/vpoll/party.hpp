#pragma once

#include <string_view>

namespace vpoll {

enum class Party { Democratic, Republican };

std::string_view to_string(Party p) noexcept;
Party parse_party(std::string_view s);

}  // namespace vpoll
