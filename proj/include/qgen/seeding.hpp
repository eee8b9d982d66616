// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qgen {

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// splitmix64 finalizer; used to decorrelate hash outputs.
std::uint64_t mix64(std::uint64_t x);

/// Sub-seed for a named stage/item under a parent seed. Pure function of its
/// inputs, so every derived seed is reproducible from the master seed.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view name);
std::uint64_t derive_seed(std::uint64_t parent, std::string_view name, std::uint64_t index);

/// Hex content digest (FNV-1a, 16 hex chars).
std::string content_digest(std::string_view bytes);

/// The engine is fully specified by the standard; the helpers below avoid
/// std::*_distribution so sequences are identical across standard libraries.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from 53 random bits.
double uniform01(Rng& rng);

/// Uniform integer in [0, n). n must be > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

template <class T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace qgen
