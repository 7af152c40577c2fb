// Command-line front end: dataset generation, training, evaluation, ablation,
// attention export and paired comparison.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "mtorl.hpp"

namespace fs = std::filesystem;
using namespace mtorl;

namespace {

std::vector<harness::InstancePtr> load_instances(const std::string& path, std::size_t skip, std::size_t limit) {
  auto all = bench::read_dataset(path);
  std::vector<harness::InstancePtr> out;
  for (std::size_t i = skip; i < all.size(); ++i) {
    if (limit != 0 && out.size() == limit) break;
    out.push_back(std::make_shared<const bench::MTOInstance>(std::move(all[i])));
  }
  if (out.empty()) throw ConfigurationError("no instances selected from " + path);
  return out;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  return out;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  std::size_t skip = 0;
  std::size_t limit = 0;
  std::optional<std::size_t> generations;
  std::optional<std::size_t> population;
  bool sample = false;
};

void add_eval_flags(CLI::App* cmd, EvalArgs& a, bool checkpoint_required) {
  auto* ck = cmd->add_option("--checkpoint", a.checkpoint, "policy checkpoint (JSON)");
  if (checkpoint_required) ck->required();
  cmd->add_option("--dataset", a.dataset, "dataset file (JSON Lines)")->required();
  cmd->add_option("--runs", a.runs, "independent runs per instance")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_option("--out", a.out, "output directory")->required();
  cmd->add_option("--skip", a.skip, "skip the first N dataset instances");
  cmd->add_option("--limit", a.limit, "use at most N instances (0 = all)");
  cmd->add_option("--generations", a.generations, "generation budget G (default: checkpoint or 250)");
  cmd->add_option("--pop", a.population, "population size N (default: checkpoint or 50)");
  cmd->add_flag("--sample", a.sample, "sample actions instead of acting deterministically");
}

int run_evaluation(const EvalArgs& a, harness::AblationVariant variant) {
  std::optional<nn::ParameterSet> params;
  harness::EvalConfig config;
  config.runs = a.runs;
  config.seed = a.seed;
  config.mode = a.sample ? policy::ActMode::sample : policy::ActMode::deterministic;
  if (!a.checkpoint.empty()) {
    const auto doc = nn::read_checkpoint_document(a.checkpoint);
    params = nn::checkpoint_from_json(doc);
    const auto& meta = doc.at("meta");
    config.engine.population_size = meta.value("population_size", config.engine.population_size);
    config.engine.budget = meta.value("budget", config.engine.budget);
  }
  if (a.generations) config.engine.budget = *a.generations;
  if (a.population) config.engine.population_size = *a.population;

  const harness::Controller controller(params ? &*params : nullptr, variant);
  const auto instances = load_instances(a.dataset, a.skip, a.limit);
  const auto output = harness::evaluate(instances, controller, config);

  const fs::path dir(a.out);
  auto results = open_out(dir / "results.csv");
  harness::write_results_csv(results, output.results);
  auto convergence = open_out(dir / "convergence.csv");
  harness::write_convergence_csv(convergence, instances, output.traces);

  double mean = 0.0;
  for (const auto& r : output.results) {
    mean += r.perf / static_cast<double>(output.results.size());
    if (r.clamped) std::cerr << "note: " << r.instance_id << " run " << r.run_index << " perf ratio clamped to [0,1]\n";
  }
  std::cout << harness::variant_name(variant) << ": " << output.results.size() << " runs, mean perf " << mean << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned evolutionary multitasking laboratory"};
  app.require_subcommand(1);

  // generate
  std::string level = "m";
  std::uint64_t gen_seed = 0;
  std::size_t gen_tasks = 10;
  std::size_t gen_dim = 50;
  std::size_t gen_skip = 0;
  std::size_t gen_limit = 0;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "write an AWCCI-style dataset");
  generate->add_option("--level", level, "shift level")->check(CLI::IsMember({"vs", "s", "m", "l", "vl"}));
  generate->add_option("--seed", gen_seed, "generation seed");
  generate->add_option("--tasks", gen_tasks, "sub-tasks per instance")->check(CLI::Range(2, 1000));
  generate->add_option("--dim", gen_dim, "dimension")->check(CLI::PositiveNumber);
  generate->add_option("--skip", gen_skip, "drop the first N combinations");
  generate->add_option("--limit", gen_limit, "keep at most N instances (0 = all)");
  generate->add_option("--out", gen_out, "output file")->required();

  // train
  std::string train_config;
  std::string train_out;
  auto* train = app.add_subcommand("train", "train a policy with clipped-surrogate updates");
  train->add_option("--config", train_config, "training job (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "output directory")->required();

  // evaluate / ablate
  EvalArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint deterministically");
  add_eval_flags(evaluate, eval_args, true);

  EvalArgs ablate_args;
  std::string variant_id;
  auto* ablate = app.add_subcommand("ablate", "evaluate an ablation variant or control");
  ablate->add_option("--variant", variant_id, "full|no_tr|no_kc|no_op|no_f|no_cr|random_all|no_transfer")->required();
  add_eval_flags(ablate, ablate_args, false);

  // export-attention
  std::string att_checkpoint;
  std::string att_instance;
  std::string att_out;
  std::uint64_t att_seed = 0;
  std::size_t att_index = 0;
  std::optional<std::size_t> att_generations;
  auto* attention = app.add_subcommand("export-attention", "dump per-generation routing scores for one run");
  attention->add_option("--checkpoint", att_checkpoint, "policy checkpoint")->required();
  attention->add_option("--instance", att_instance, "dataset file holding the instance")->required();
  attention->add_option("--index", att_index, "instance position in the file");
  attention->add_option("--seed", att_seed, "run seed");
  attention->add_option("--generations", att_generations, "generation budget G");
  attention->add_option("--out", att_out, "output CSV")->required();

  // compare
  std::string cmp_a;
  std::string cmp_b;
  double cmp_alpha = 0.05;
  auto* compare = app.add_subcommand("compare", "paired Wilcoxon comparison of two results files");
  compare->add_option("--a", cmp_a, "results CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("--b", cmp_b, "results CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("--alpha", cmp_alpha, "significance level");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      auto instances = bench::generate_awcci(bench::parse_level(level), gen_seed, gen_tasks, gen_dim);
      std::vector<bench::MTOInstance> picked;
      for (std::size_t i = gen_skip; i < instances.size(); ++i) {
        if (gen_limit != 0 && picked.size() == gen_limit) break;
        picked.push_back(std::move(instances[i]));
      }
      bench::write_dataset(gen_out, picked);
      std::cout << "wrote " << picked.size() << " instances to " << gen_out << '\n';
    } else if (*train) {
      const auto job = ppo::read_training_job(train_config);
      const auto instances = load_instances(job.dataset, 0, job.limit);
      for (const auto& inst : instances) {
        if (inst->tasks.size() != job.tasks || inst->tasks.front().dimension() != job.dimension) {
          throw ConfigurationError(inst->id + ": shape does not match the configured tasks/dimension");
        }
      }
      ppo::TrainConfig config;
      config.ppo = job.ppo;
      config.population_size = job.population_size;
      config.checkpoint_dir = (fs::path(train_out) / "checkpoints").string();
      const auto result = ppo::train(instances, config, job.seed);
      auto log = open_out(fs::path(train_out) / "training_log.csv");
      ppo::write_training_log(log, result.log);
      nn::save_checkpoint(result.params, (fs::path(train_out) / "final.json").string(),
                          ppo::checkpoint_meta(config, job.seed, config.ppo.epochs));
      const auto returns = ppo::epoch_mean_returns(result.log);
      for (std::size_t e = 0; e < returns.size(); ++e) {
        std::cout << "epoch " << e + 1 << " mean return " << returns[e] << '\n';
      }
      if (!result.failures.empty()) {
        std::cerr << result.failures.size() << " training runs failed\n";
        return 1;
      }
    } else if (*evaluate) {
      return run_evaluation(eval_args, harness::AblationVariant::full);
    } else if (*ablate) {
      return run_evaluation(ablate_args, harness::parse_variant(variant_id));
    } else if (*attention) {
      const auto doc = nn::read_checkpoint_document(att_checkpoint);
      const auto params = nn::checkpoint_from_json(doc);
      harness::EvalConfig config;
      config.engine.population_size = doc.at("meta").value("population_size", config.engine.population_size);
      config.engine.budget = att_generations.value_or(doc.at("meta").value("budget", config.engine.budget));
      config.record_attention = true;
      const auto instances = load_instances(att_instance, att_index, 1);
      const harness::Controller controller(&params, harness::AblationVariant::full);
      const auto trace = harness::run_episode(instances.front(), controller, config, att_seed);
      auto out = open_out(att_out);
      harness::write_attention_csv(out, trace.scores);
    } else if (*compare) {
      const auto summary =
          harness::compare_results(harness::read_results_csv(cmp_a), harness::read_results_csv(cmp_b), cmp_alpha);
      harness::write_comparison(std::cout, summary);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
