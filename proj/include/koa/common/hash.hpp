#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace koa {

// FNV-1a, 64 bit. Stable across platforms, which std::hash is not.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

}  // namespace koa
