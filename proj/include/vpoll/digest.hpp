#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace vpoll {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

/// SHA-256 over length-prefixed fields, so ("ab","c") and ("a","bc") differ.
std::string field_digest(std::initializer_list<std::string_view> fields);

/// First 8 bytes of SHA-256 as an integer, for deterministic draws.
std::uint64_t digest_u64(std::string_view data);

}  // namespace vpoll
