#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace depthood {

// SHA-256 over the canonical parameter serialization: parameters in
// definition order, each float as 4 little-endian bytes. Equal digests
// imply bit-identical parameters.
struct WeightDigest {
  std::array<unsigned char, 32> bytes{};

  bool operator==(const WeightDigest& o) const { return bytes == o.bytes; }
  bool operator!=(const WeightDigest& o) const { return !(*this == o); }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (unsigned char b : bytes) {
      s.push_back(digits[b >> 4]);
      s.push_back(digits[b & 0xf]);
    }
    return s;
  }
};

inline void canonical_float_bytes(const std::vector<float>& params,
                                  std::vector<unsigned char>& out) {
  for (float f : params) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    out.push_back(static_cast<unsigned char>(u & 0xff));
    out.push_back(static_cast<unsigned char>((u >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((u >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((u >> 24) & 0xff));
  }
}

inline WeightDigest digest_bytes(const std::vector<unsigned char>& data) {
  WeightDigest d;
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(),
             nullptr);
  return d;
}

// Digest of one parameter vector.
inline WeightDigest snapshot_weights(const std::vector<float>& params) {
  std::vector<unsigned char> buf;
  buf.reserve(params.size() * 4);
  canonical_float_bytes(params, buf);
  return digest_bytes(buf);
}

// Digest of a parameter set made of several vectors, in definition order.
inline WeightDigest snapshot_weights(
    const std::vector<const std::vector<float>*>& groups) {
  std::vector<unsigned char> buf;
  for (const auto* g : groups) canonical_float_bytes(*g, buf);
  return digest_bytes(buf);
}

inline WeightDigest digest_string(const std::string& s) {
  std::vector<unsigned char> buf(s.begin(), s.end());
  return digest_bytes(buf);
}

}  // namespace depthood
