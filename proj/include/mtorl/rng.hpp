#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

namespace mtorl {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Folds `salt` into `base` with one splitmix round. Chaining calls gives the
/// master -> instance -> run -> generation -> task seed schedule.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t state = base ^ (salt * 0xD1B54A32D192ED03ULL);
  splitmix64(state);
  return splitmix64(state);
}

template <typename... Salts>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt, Salts... rest) {
  return derive_seed(derive_seed(base, salt), static_cast<std::uint64_t>(rest)...);
}

/// FNV-1a, used to key seeds on instance ids.
inline std::uint64_t hash_text(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Independent random streams used by the engine and the controller.
enum class Stream : std::uint64_t {
  initialization = 1,
  self_evolution = 2,
  transfer = 3,
  policy = 4,
  ablation = 5,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  /// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + index(n - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// One stream per (seed, purpose, generation, task).
inline Rng make_stream(std::uint64_t seed, Stream purpose, std::uint64_t generation,
                       std::uint64_t task) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(purpose), generation, task));
}

inline std::vector<Rng> make_task_streams(std::uint64_t seed, Stream purpose,
                                          std::uint64_t generation, std::size_t tasks) {
  std::vector<Rng> streams;
  streams.reserve(tasks);
  for (std::size_t j = 0; j < tasks; ++j) streams.push_back(make_stream(seed, purpose, generation, j));
  return streams;
}

}  // namespace mtorl
