#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

#include "kamg/errors.hpp"

namespace kamg {

/// Incremental 64-bit FNV-1a. Used for content fingerprints in checkpoints
/// and manifests, not for security.
class Fnv1a {
 public:
  Fnv1a& update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& update(std::string_view s) {
    update(s.data(), s.size());
    const unsigned char sep = 0xff;
    return update(&sep, 1);
  }
  Fnv1a& update_u64(std::uint64_t v) { return update(&v, sizeof v); }
  Fnv1a& update_f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return update_u64(bits);
  }
  Fnv1a& update_f64s(std::span<const double> vs) {
    for (double v : vs) update_f64(v);
    return *this;
  }
  std::uint64_t digest() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file for hashing: " + path);
  Fnv1a h;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.digest();
}

}  // namespace kamg
