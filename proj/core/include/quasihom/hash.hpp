#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <type_traits>

namespace quasihom {

/// 64-bit FNV-1a, used for mesh/operator fingerprints.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= p[i];
      state_ *= 1099511628211ull;
    }
  }

  template <class T>
    requires std::is_trivially_copyable_v<T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }

  template <class T>
  void values(std::span<const T> v) {
    bytes(v.data(), v.size_bytes());
  }

  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 14695981039346656037ull;
};

}  // namespace quasihom
