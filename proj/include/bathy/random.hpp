#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace bathy {

using Rng = std::mt19937_64;

// FNV-1a over a stream name; used to name independent RNG substreams.
constexpr std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed for element `index` of substream `stream` under `root`. Mixing is
// splitmix64, so neighbouring indices give unrelated generators.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index = 0);

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                                 std::uint64_t index = 0) {
  return derive_seed(root, stream_id(stream), index);
}

Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n);

}  // namespace bathy
