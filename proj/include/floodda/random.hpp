#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace floodda {

/// Independent random stream keyed by a seed and a list of integer labels.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto l : labels) {
    words.push_back(static_cast<std::uint32_t>(l));
    words.push_back(static_cast<std::uint32_t>(l >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

enum class Stream : std::uint64_t { GaugeNoise = 11, WsrNoise = 12, Prior = 21, Perturbation = 22, ZoneCorrection = 23 };

} // namespace floodda
