#pragma once

// Seeded random streams. Every consumer derives its generator from a root
// seed and a stable purpose label, so adding a consumer never shifts the
// numbers another consumer sees.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace pacmeta {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the stream named `label` under `root`.
constexpr std::uint64_t stream_seed(std::uint64_t root, std::string_view label) {
  return splitmix64(root ^ splitmix64(fnv1a(label)));
}

inline Rng make_stream(std::uint64_t root, std::string_view label) {
  return Rng(stream_seed(root, label));
}

inline Rng make_stream(std::uint64_t root, std::string_view label, std::uint64_t index) {
  return Rng(splitmix64(stream_seed(root, label) + splitmix64(index)));
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline std::vector<double> standard_normal_vector(Rng& rng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

}  // namespace pacmeta
