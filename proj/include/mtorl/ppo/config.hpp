#pragma once

#include <fstream>
#include <json.hpp>
#include <string>

#include "mtorl/errors.hpp"

namespace mtorl::ppo {

struct PPOConfig {
  std::size_t t_ppo = 10;  ///< update every t_ppo environment steps
  std::size_t k_ppo = 3;   ///< passes over the segment per update
  double clip_eps = 0.2;
  double learning_rate = 0.0003;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  bool normalize_advantages = true;
  std::size_t epochs = 10;   ///< L
  std::size_t budget = 250;  ///< G, generations per episode

  void validate() const {
    if (!(clip_eps > 0.0)) throw ConfigurationError("clip_eps must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigurationError("gamma must be in (0, 1]");
    if (t_ppo < 1) throw ConfigurationError("t_ppo must be at least 1");
    if (k_ppo < 1) throw ConfigurationError("k_ppo must be at least 1");
    if (budget < 1) throw ConfigurationError("budget must be at least 1");
  }
};

inline void to_json(nlohmann::json& j, const PPOConfig& c) {
  j = {{"t_ppo", c.t_ppo},           {"k_ppo", c.k_ppo},         {"clip_eps", c.clip_eps},
       {"learning_rate", c.learning_rate}, {"gamma", c.gamma},         {"gae_lambda", c.gae_lambda},
       {"value_coef", c.value_coef}, {"entropy_coef", c.entropy_coef}, {"normalize_advantages", c.normalize_advantages},
       {"epochs", c.epochs},         {"budget", c.budget}};
}

/// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, PPOConfig& c) {
  c.t_ppo = j.value("t_ppo", c.t_ppo);
  c.k_ppo = j.value("k_ppo", c.k_ppo);
  c.clip_eps = j.value("clip_eps", c.clip_eps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.gamma = j.value("gamma", c.gamma);
  c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
  c.value_coef = j.value("value_coef", c.value_coef);
  c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
  c.normalize_advantages = j.value("normalize_advantages", c.normalize_advantages);
  c.epochs = j.value("epochs", c.epochs);
  c.budget = j.value("budget", c.budget);
}

/// Training job description read from a JSON config file.
struct TrainingJob {
  PPOConfig ppo;
  std::string dataset;
  std::size_t population_size = 50;
  std::size_t tasks = 10;     ///< expected K of every dataset instance
  std::size_t dimension = 50; ///< expected D
  std::uint64_t seed = 0;
  std::size_t limit = 0;      ///< use only the first `limit` instances (0 = all)
};

inline TrainingJob read_training_job(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open training config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("training config " + path + ": " + e.what());
  }
  TrainingJob job;
  try {
    if (j.contains("ppo")) job.ppo = j.at("ppo").get<PPOConfig>();
    job.dataset = j.at("dataset").get<std::string>();
    job.population_size = j.value("population_size", job.population_size);
    job.tasks = j.value("tasks", job.tasks);
    job.dimension = j.value("dimension", job.dimension);
    job.seed = j.value("seed", job.seed);
    job.limit = j.value("limit", job.limit);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("training config " + path + ": " + e.what());
  }
  job.ppo.validate();
  return job;
}

}  // namespace mtorl::ppo
