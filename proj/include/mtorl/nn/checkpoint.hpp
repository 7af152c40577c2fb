#pragma once

#include <fstream>
#include <json.hpp>
#include <string>

#include "mtorl/errors.hpp"
#include "mtorl/nn/parameters.hpp"

namespace mtorl::nn {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "mtorl-checkpoint";

namespace detail {
inline nlohmann::json matrix_values(const RealMatrix& m) {
  return nlohmann::json(std::vector<double>(m.data(), m.data() + m.size()));
}

inline RealMatrix matrix_from(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
    throw LoadError("checkpoint field '" + what + "' has " + std::to_string(v.size()) + " values, expected " +
                    std::to_string(rows * cols));
  }
  RealMatrix m(rows, cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}
}  // namespace detail

/// JSON document: format tag, version, free-form metadata and one record per
/// parameter with its shape, values and both Adam moments. Doubles are written
/// in shortest round-trip form, so values reload bit-exactly.
inline nlohmann::json checkpoint_to_json(const ParameterSet& params, const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json doc;
  doc["format"] = kCheckpointFormat;
  doc["format_version"] = kCheckpointVersion;
  doc["step_count"] = params.step_count();
  doc["meta"] = meta;
  auto& records = doc["parameters"] = nlohmann::json::array();
  for (const auto& [name, p] : params) {
    records.push_back({{"name", name},
                       {"shape", {p.rows(), p.cols()}},
                       {"values", detail::matrix_values(p.value)},
                       {"moment1", detail::matrix_values(p.moment1)},
                       {"moment2", detail::matrix_values(p.moment2)},
                       {"step_count", params.step_count()}});
  }
  return doc;
}

inline ParameterSet checkpoint_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", std::string{}) != kCheckpointFormat) {
    throw LoadError("not a mtorl checkpoint (missing or wrong 'format' tag)");
  }
  const int version = doc.value("format_version", -1);
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint format_version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  ParameterSet params;
  try {
    params.set_step_count(doc.at("step_count").get<std::uint64_t>());
    for (const auto& rec : doc.at("parameters")) {
      const auto name = rec.at("name").get<std::string>();
      const auto shape = rec.at("shape").get<std::vector<Eigen::Index>>();
      if (shape.size() != 2) throw LoadError("parameter '" + name + "' must have a 2-d shape");
      Parameter& p = params.add(name, shape[0], shape[1]);
      p.value = detail::matrix_from(rec.at("values"), shape[0], shape[1], name + ".values");
      p.moment1 = detail::matrix_from(rec.at("moment1"), shape[0], shape[1], name + ".moment1");
      p.moment2 = detail::matrix_from(rec.at("moment2"), shape[0], shape[1], name + ".moment2");
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("corrupt checkpoint: ") + e.what());
  }
  return params;
}

inline void save_checkpoint(const ParameterSet& params, const std::string& path,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write checkpoint to " + path);
  out << checkpoint_to_json(params, meta).dump() << '\n';
}

inline nlohmann::json read_checkpoint_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open checkpoint " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
}

inline ParameterSet load_checkpoint(const std::string& path) {
  return checkpoint_from_json(read_checkpoint_document(path));
}

}  // namespace mtorl::nn
