#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "mtorl/bench/functions.hpp"
#include "mtorl/bench/transforms.hpp"

namespace mtorl::bench {

enum class ShiftLevel { vs, s, m, l, vl };

inline constexpr std::array<ShiftLevel, 5> kAllShiftLevels = {ShiftLevel::vs, ShiftLevel::s, ShiftLevel::m,
                                                              ShiftLevel::l, ShiftLevel::vl};

inline double shift_factor(ShiftLevel level) {
  switch (level) {
    case ShiftLevel::vs: return 0.05;
    case ShiftLevel::s: return 0.1;
    case ShiftLevel::m: return 0.2;
    case ShiftLevel::l: return 0.3;
    case ShiftLevel::vl: return 0.4;
  }
  return 0.0;
}

inline std::string_view level_name(ShiftLevel level) {
  switch (level) {
    case ShiftLevel::vs: return "vs";
    case ShiftLevel::s: return "s";
    case ShiftLevel::m: return "m";
    case ShiftLevel::l: return "l";
    case ShiftLevel::vl: return "vl";
  }
  return "?";
}

inline ShiftLevel parse_level(std::string_view name) {
  for (auto l : kAllShiftLevels) {
    if (level_name(l) == name) return l;
  }
  throw ConfigurationError("unknown shift level '" + std::string(name) + "' (expected vs|s|m|l|vl)");
}

/// One rotated and shifted base function: f(W^T (x - s)) on [lb, ub]^D.
struct SubTaskDefinition {
  BasicFunction function = BasicFunction::sphere;
  RealMatrix rotation;
  RealVector shift;
  double lower = -100.0;
  double upper = 100.0;

  std::size_t dimension() const { return static_cast<std::size_t>(shift.size()); }

  /// Known optimal value; all base functions reach 0 at their optimizer.
  double optimum() const { return 0.0; }

  RealVector to_z(std::span<const double> unified) const {
    RealVector x = decode(unified, lower, upper);
    return rotation.transpose() * (x - shift);
  }

  double evaluate(std::span<const double> unified) const {
    RealVector z = to_z(unified);
    return evaluate_basic(function, std::span<const double>(z.data(), static_cast<std::size_t>(z.size())));
  }
};

inline double evaluate_subtask(const SubTaskDefinition& def, std::span<const double> unified) {
  return def.evaluate(unified);
}

struct MTOInstance {
  std::string id;
  ShiftLevel level = ShiftLevel::vs;
  std::vector<BasicFunction> combination;
  std::vector<SubTaskDefinition> tasks;

  std::size_t task_count() const { return tasks.size(); }
  std::size_t dimension() const { return tasks.empty() ? 0 : tasks.front().dimension(); }

  /// Throws InvalidInstanceError when a structural invariant is broken.
  void validate() const {
    if (tasks.size() < 2) throw InvalidInstanceError(id + ": needs at least 2 sub-tasks");
    if (combination.empty()) throw InvalidInstanceError(id + ": empty function combination");
    const std::size_t d = dimension();
    for (const auto& t : tasks) {
      if (t.dimension() != d || d == 0) throw InvalidInstanceError(id + ": inconsistent sub-task dimensions");
      if (t.rotation.rows() != static_cast<Eigen::Index>(d) || t.rotation.cols() != static_cast<Eigen::Index>(d)) {
        throw InvalidInstanceError(id + ": rotation shape does not match dimension");
      }
      if (!(t.lower < t.upper)) throw InvalidInstanceError(id + ": lower bound must be below upper bound");
      if (std::find(combination.begin(), combination.end(), t.function) == combination.end()) {
        throw InvalidInstanceError(id + ": sub-task function outside the combination");
      }
    }
  }
};

/// All 127 non-empty subsets of the seven base functions, ordered by size and
/// then lexicographically by function index.
inline std::vector<std::vector<BasicFunction>> enumerate_combinations() {
  std::vector<std::vector<std::size_t>> subsets;
  for (unsigned mask = 1; mask < (1u << kAllFunctions.size()); ++mask) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < kAllFunctions.size(); ++i) {
      if (mask & (1u << i)) members.push_back(i);
    }
    subsets.push_back(std::move(members));
  }
  std::sort(subsets.begin(), subsets.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  std::vector<std::vector<BasicFunction>> out;
  out.reserve(subsets.size());
  for (const auto& s : subsets) {
    std::vector<BasicFunction> fs;
    for (std::size_t i : s) fs.push_back(kAllFunctions[i]);
    out.push_back(std::move(fs));
  }
  return out;
}

inline SubTaskDefinition make_subtask(BasicFunction f, double level, std::size_t dim, Rng& rng) {
  SubTaskDefinition t;
  t.function = f;
  const auto range = search_range(f);
  t.lower = range.lower;
  t.upper = range.upper;
  t.rotation = make_rotation(dim, rng);
  t.shift = make_shift(level, range.lower, range.upper, dim, rng);
  return t;
}

inline std::string instance_name(ShiftLevel level, std::size_t combination_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "awcci-%s-%03zu", std::string(level_name(level)).c_str(), combination_index);
  return buf;
}

/// One instance per function combination. Each sub-task draws its function
/// from the combination with replacement and gets a fresh rotation and
/// level-scaled shift. Instance c uses its own stream derived from (seed, level, c).
inline std::vector<MTOInstance> generate_awcci(ShiftLevel level, std::uint64_t seed, std::size_t tasks = 10,
                                               std::size_t dim = 50) {
  if (tasks < 2) throw ConfigurationError("generate_awcci: need at least 2 sub-tasks");
  if (dim < 1) throw ConfigurationError("generate_awcci: dimension must be >= 1");
  const auto combos = enumerate_combinations();
  std::vector<MTOInstance> out;
  out.reserve(combos.size());
  for (std::size_t c = 0; c < combos.size(); ++c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(level) + 1, c));
    MTOInstance inst;
    inst.id = instance_name(level, c);
    inst.level = level;
    inst.combination = combos[c];
    for (std::size_t j = 0; j < tasks; ++j) {
      const BasicFunction f = combos[c][rng.index(combos[c].size())];
      inst.tasks.push_back(make_subtask(f, shift_factor(level), dim, rng));
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// --- dataset files: JSON Lines, one instance per line -----------------------

inline nlohmann::json to_json(const MTOInstance& inst) {
  nlohmann::json j;
  j["instance_id"] = inst.id;
  j["shift_level"] = level_name(inst.level);
  auto& combo = j["combination"] = nlohmann::json::array();
  for (auto f : inst.combination) combo.push_back(function_name(f));
  auto& tasks = j["sub_tasks"] = nlohmann::json::array();
  for (const auto& t : inst.tasks) {
    tasks.push_back({{"function", function_name(t.function)},
                     {"D", t.dimension()},
                     {"lb", t.lower},
                     {"ub", t.upper},
                     {"rotation", std::vector<double>(t.rotation.data(), t.rotation.data() + t.rotation.size())},
                     {"shift", std::vector<double>(t.shift.data(), t.shift.data() + t.shift.size())}});
  }
  return j;
}

inline MTOInstance instance_from_json(const nlohmann::json& j) {
  MTOInstance inst;
  try {
    inst.id = j.at("instance_id").get<std::string>();
    inst.level = parse_level(j.at("shift_level").get<std::string>());
    for (const auto& f : j.at("combination")) inst.combination.push_back(parse_function(f.get<std::string>()));
    for (const auto& tj : j.at("sub_tasks")) {
      SubTaskDefinition t;
      t.function = parse_function(tj.at("function").get<std::string>());
      const auto d = tj.at("D").get<std::size_t>();
      t.lower = tj.at("lb").get<double>();
      t.upper = tj.at("ub").get<double>();
      auto rot = tj.at("rotation").get<std::vector<double>>();
      auto shift = tj.at("shift").get<std::vector<double>>();
      if (rot.size() != d * d || shift.size() != d) throw LoadError(inst.id + ": rotation/shift size mismatch");
      t.rotation.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      std::copy(rot.begin(), rot.end(), t.rotation.data());
      t.shift = Eigen::Map<RealVector>(shift.data(), static_cast<Eigen::Index>(d));
      inst.tasks.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed instance document: ") + e.what());
  }
  inst.validate();
  return inst;
}

inline void write_dataset(const std::string& path, std::span<const MTOInstance> instances) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write dataset " + path);
  for (const auto& inst : instances) out << to_json(inst).dump() << '\n';
}

inline std::vector<MTOInstance> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset " + path);
  std::vector<MTOInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(instance_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw LoadError("dataset " + path + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mtorl::bench
