#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include <openssl/evp.h>

#include "aiaudit/errors.hpp"

namespace aiaudit {

using Digest256 = std::array<std::uint8_t, 32>;

/// Incremental SHA-256 over arbitrary byte sequences.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    require(ctx_ && EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) == 1, ErrorKind::Io,
            "sha256 init failed");
  }

  Sha256& update(const void* data, std::size_t n) {
    if (n > 0) EVP_DigestUpdate(ctx_.get(), data, n);
    return *this;
  }
  Sha256& update(std::string_view s) { return update(s.data(), s.size()); }
  Sha256& update(std::span<const float> values) {
    // Little-endian float32 on every supported target.
    return update(values.data(), values.size_bytes());
  }
  template <class T>
    requires std::is_integral_v<T>
  Sha256& update_int(T v) {
    std::uint64_t w = static_cast<std::uint64_t>(v);
    std::uint8_t bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>(w >> (8 * i));
    return update(bytes, 8);
  }

  Digest256 finish() {
    Digest256 out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), out.data(), &len);
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

inline std::string sha256_hex(std::string_view bytes) {
  auto d = Sha256().update(bytes).finish();
  return to_hex(d);
}

}  // namespace aiaudit
