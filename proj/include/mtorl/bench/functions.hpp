#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>

#include "mtorl/errors.hpp"

namespace mtorl::bench {

enum class BasicFunction { sphere, rosenbrock, ackley, rastrigin, griewank, weierstrass, schwefel };

inline constexpr std::array<BasicFunction, 7> kAllFunctions = {
    BasicFunction::sphere,    BasicFunction::rosenbrock,  BasicFunction::ackley,  BasicFunction::rastrigin,
    BasicFunction::griewank, BasicFunction::weierstrass, BasicFunction::schwefel};

inline std::string_view function_name(BasicFunction f) {
  switch (f) {
    case BasicFunction::sphere: return "sphere";
    case BasicFunction::rosenbrock: return "rosenbrock";
    case BasicFunction::ackley: return "ackley";
    case BasicFunction::rastrigin: return "rastrigin";
    case BasicFunction::griewank: return "griewank";
    case BasicFunction::weierstrass: return "weierstrass";
    case BasicFunction::schwefel: return "schwefel";
  }
  return "?";
}

inline BasicFunction parse_function(std::string_view name) {
  for (auto f : kAllFunctions) {
    if (function_name(f) == name) return f;
  }
  throw ConfigurationError("unknown base function: " + std::string(name));
}

struct SearchRange {
  double lower;
  double upper;
};

/// Decision-space box of each base function.
inline SearchRange search_range(BasicFunction f) {
  switch (f) {
    case BasicFunction::sphere: return {-100.0, 100.0};
    case BasicFunction::rosenbrock: return {-50.0, 50.0};
    case BasicFunction::ackley: return {-50.0, 50.0};
    case BasicFunction::rastrigin: return {-50.0, 50.0};
    case BasicFunction::griewank: return {-100.0, 100.0};
    case BasicFunction::weierstrass: return {-0.5, 0.5};
    case BasicFunction::schwefel: return {-500.0, 500.0};
  }
  return {0.0, 0.0};
}

namespace detail {

struct WeierstrassTable {
  static constexpr int kMax = 20;
  std::array<double, kMax + 1> a_pow{};
  std::array<double, kMax + 1> b_pow{};
  double offset = 0.0;  // sum_k a^k cos(pi b^k)

  WeierstrassTable() {
    double a = 1.0;
    double b = 1.0;
    for (int k = 0; k <= kMax; ++k) {
      a_pow[k] = a;
      b_pow[k] = b;
      offset += a * std::cos(2.0 * std::numbers::pi * b * 0.5);
      a *= 0.5;
      b *= 3.0;
    }
  }
};

inline const WeierstrassTable& weierstrass_table() {
  static const WeierstrassTable table;
  return table;
}

}  // namespace detail

/// Raw base function at an already rotated/shifted point z.
inline double evaluate_basic(BasicFunction f, std::span<const double> z) {
  const auto d = static_cast<double>(z.size());
  constexpr double two_pi = 2.0 * std::numbers::pi;
  switch (f) {
    case BasicFunction::sphere: {
      double s = 0.0;
      for (double v : z) s += v * v;
      return s;
    }
    case BasicFunction::rosenbrock: {
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < z.size(); ++i) {
        const double a = z[i] * z[i] - z[i + 1];
        const double b = z[i] - 1.0;
        s += 100.0 * a * a + b * b;
      }
      return s;
    }
    case BasicFunction::ackley: {
      double sq = 0.0;
      double cs = 0.0;
      for (double v : z) {
        sq += v * v;
        cs += std::cos(two_pi * v);
      }
      return -20.0 * std::exp(-0.2 * std::sqrt(sq / d)) - std::exp(cs / d) + 20.0 + std::numbers::e;
    }
    case BasicFunction::rastrigin: {
      double s = 0.0;
      for (double v : z) s += v * v - 10.0 * std::cos(two_pi * v) + 10.0;
      return s;
    }
    case BasicFunction::griewank: {
      double sq = 0.0;
      double prod = 1.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        sq += z[i] * z[i];
        prod *= std::cos(z[i] / std::sqrt(static_cast<double>(i + 1)));
      }
      return 1.0 + sq / 4000.0 - prod;
    }
    case BasicFunction::weierstrass: {
      const auto& t = detail::weierstrass_table();
      double s = 0.0;
      for (double v : z) {
        for (int k = 0; k <= detail::WeierstrassTable::kMax; ++k) {
          s += t.a_pow[k] * std::cos(two_pi * t.b_pow[k] * (v + 0.5));
        }
      }
      return s - d * t.offset;
    }
    case BasicFunction::schwefel: {
      double s = 0.0;
      for (double v : z) s += v * std::sin(std::sqrt(std::abs(v)));
      return 418.9829 * d - s;
    }
  }
  throw ContractError("unknown base function");
}

}  // namespace mtorl::bench
