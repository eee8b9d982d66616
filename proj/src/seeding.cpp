// SPDX-License-Identifier: Apache-2.0
#include "qgen/seeding.hpp"

#include <numeric>

#include <fmt/format.h>

namespace qgen {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view name) {
  return mix64(parent ^ fnv1a(name));
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view name, std::uint64_t index) {
  return mix64(derive_seed(parent, name) ^ mix64(index));
}

std::string content_digest(std::string_view bytes) {
  return fmt::format("{:016x}", fnv1a(bytes));
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Lemire's multiply-shift with rejection; unbiased.
  using u128 = unsigned __int128;
  std::uint64_t x = rng();
  u128 m = static_cast<u128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
    while (low < threshold) {
      x = rng();
      m = static_cast<u128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  seeded_shuffle(perm, rng);
  return perm;
}

}  // namespace qgen
