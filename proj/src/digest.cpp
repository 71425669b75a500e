#include "vpoll/digest.hpp"

#include <array>

#include <openssl/evp.h>

#include "vpoll/error.hpp"

namespace vpoll {

namespace {

std::array<unsigned char, 32> sha256(std::string_view data) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw Error(Errc::Io, "SHA-256 failed");
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  const auto bytes = sha256(data);
  std::string out;
  out.reserve(64);
  for (unsigned char b : bytes) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

std::string field_digest(std::initializer_list<std::string_view> fields) {
  std::string buf;
  for (auto f : fields) {
    buf += std::to_string(f.size());
    buf += ':';
    buf.append(f.data(), f.size());
    buf += ';';
  }
  return sha256_hex(buf);
}

std::uint64_t digest_u64(std::string_view data) {
  const auto bytes = sha256(data);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace vpoll
