#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mtorl/emt/engine.hpp"
#include "mtorl/nn/checkpoint.hpp"
#include "mtorl/ppo/update.hpp"

namespace mtorl::ppo {

using InstancePtr = std::shared_ptr<const bench::MTOInstance>;

struct TrainConfig {
  PPOConfig ppo;
  std::size_t population_size = 50;
  std::string checkpoint_dir;  ///< one checkpoint per epoch when non-empty
};

struct EpisodeLog {
  std::size_t epoch = 0;  ///< 1-based
  std::string instance_id;
  double episode_return = 0.0;
  double mean_rc = 0.0;  ///< per step and task
  double mean_rk = 0.0;  ///< per step and task
  double wall_time = 0.0;
  std::size_t updates = 0;
  std::size_t aborted_updates = 0;
};

struct TrainResult {
  nn::ParameterSet params;
  std::vector<EpisodeLog> log;
  std::vector<std::string> failures;  ///< instances whose run threw
};

inline constexpr std::uint64_t kPolicyInitSalt = 0x5EED;

inline emt::EngineConfig engine_config(const TrainConfig& config) {
  emt::EngineConfig e;
  e.population_size = config.population_size;
  e.budget = config.ppo.budget;
  return e;
}

inline std::uint64_t episode_seed(std::uint64_t master, std::size_t epoch, const std::string& instance_id) {
  return derive_seed(master, epoch, hash_text(instance_id));
}

/// One training episode: a fresh run of G generations acting in sample mode,
/// with a PPO update every t_ppo steps and at the end of the episode.
inline EpisodeLog train_episode(const InstancePtr& instance, nn::ParameterSet& params, const TrainConfig& config,
                                std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const PPOConfig& ppo = config.ppo;
  emt::EMTState state = emt::init_populations(instance, engine_config(config), seed);
  const std::size_t k = state.task_count();

  EpisodeLog log;
  log.instance_id = instance->id;
  std::vector<Transition> buffer;
  emt::StateFeatures features = emt::extract_state(state);
  double rc = 0.0;
  double rk = 0.0;
  for (std::size_t t = 0; t < ppo.budget; ++t) {
    auto streams = make_task_streams(seed, Stream::policy, t, k);
    ActionBundle action = policy::act(features, params, policy::ActMode::sample, streams);
    const double value = policy::state_value(features, params);
    const emt::RewardBreakdown reward = emt::emt_step(state, action);
    for (std::size_t j = 0; j < k; ++j) {
      rc += reward.convergence[j];
      rk += reward.transfer[j];
    }
    log.episode_return += reward.total;

    const bool done = t + 1 == ppo.budget;
    const double lp = action.log_prob;
    buffer.push_back(Transition{std::move(features), std::move(action), lp, reward.total, value, done});
    features = emt::extract_state(state);

    if (buffer.size() == ppo.t_ppo || done) {
      const double bootstrap = done ? 0.0 : policy::state_value(features, params);
      UpdateStats stats = ppo_update(buffer, bootstrap, params, ppo);
      ++log.updates;
      if (stats.aborted) {
        ++log.aborted_updates;
        std::cerr << "ppo update skipped on " << instance->id << ": " << stats.diagnostic << '\n';
      }
      buffer.clear();
    }
  }
  const double steps = static_cast<double>(ppo.budget * k);
  log.mean_rc = rc / steps;
  log.mean_rk = rk / steps;
  log.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return log;
}

inline nlohmann::json checkpoint_meta(const TrainConfig& config, std::uint64_t seed, std::size_t epoch) {
  return {{"population_size", config.population_size}, {"budget", config.ppo.budget},
          {"seed", seed}, {"epoch", epoch}, {"ppo", config.ppo}};
}

/// L epochs over the training set; each instance gets a fresh run per epoch.
/// Starts from `initial` when given, otherwise from seeded initialization.
inline TrainResult train(std::span<const InstancePtr> train_set, const TrainConfig& config, std::uint64_t seed,
                         const nn::ParameterSet* initial = nullptr) {
  config.ppo.validate();
  if (train_set.empty()) throw ConfigurationError("training set is empty");
  TrainResult result;
  result.params = initial ? *initial : policy::make_policy_parameters(derive_seed(seed, kPolicyInitSalt));
  for (std::size_t epoch = 1; epoch <= config.ppo.epochs; ++epoch) {
    for (const InstancePtr& inst : train_set) {
      try {
        EpisodeLog log = train_episode(inst, result.params, config, episode_seed(seed, epoch, inst->id));
        log.epoch = epoch;
        result.log.push_back(std::move(log));
      } catch (const std::exception& e) {
        result.failures.push_back(inst->id + ": " + e.what());
        std::cerr << "training run on " << inst->id << " failed: " << e.what() << '\n';
      }
    }
    if (!config.checkpoint_dir.empty()) {
      std::filesystem::create_directories(config.checkpoint_dir);
      const auto path = std::filesystem::path(config.checkpoint_dir) / ("epoch_" + std::to_string(epoch) + ".json");
      nn::save_checkpoint(result.params, path.string(), checkpoint_meta(config, seed, epoch));
    }
  }
  return result;
}

/// Mean episode return of each epoch, in epoch order.
inline std::vector<double> epoch_mean_returns(const std::vector<EpisodeLog>& log) {
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  for (const auto& e : log) {
    if (e.epoch > sums.size()) {
      sums.resize(e.epoch, 0.0);
      counts.resize(e.epoch, 0);
    }
    sums[e.epoch - 1] += e.episode_return;
    ++counts[e.epoch - 1];
  }
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] = counts[i] ? sums[i] / static_cast<double>(counts[i]) : 0.0;
  return sums;
}

inline constexpr const char* kTrainingLogHeader = "epoch,instance_id,episode_return,mean_Rc,mean_Rk,wall_time";

inline void write_training_log(std::ostream& out, const std::vector<EpisodeLog>& log) {
  out << kTrainingLogHeader << '\n' << std::setprecision(17);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.instance_id << ',' << e.episode_return << ',' << e.mean_rc << ',' << e.mean_rk << ','
        << e.wall_time << '\n';
  }
}

}  // namespace mtorl::ppo
