// Acceptance run: one PASS/FAIL line per criterion, exit code 1 on any FAIL.
// The desk-scale policy trained for the training criterion is reused by the
// evaluation, routing, variable-K and ablation criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mtorl.hpp"
#include "oracles/ablation_diff.hpp"
#include "oracles/policy_gradients.hpp"
#include "oracles/reference_de.hpp"

using namespace mtorl;
using harness::AblationVariant;
using harness::InstancePtr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// --- desk-scale setup --------------------------------------------------------

constexpr std::size_t kTasks = 5;
constexpr std::size_t kDim = 10;
constexpr std::size_t kPop = 30;
constexpr std::size_t kBudget = 100;
constexpr std::uint64_t kDataSeed = 2024;
constexpr std::uint64_t kEvalSeed = 99;
const std::vector<std::uint64_t> kMasterSeeds = {1, 2, 3};

std::vector<InstancePtr> awcci_pool(std::size_t tasks, std::size_t dim, std::uint64_t seed) {
  std::vector<InstancePtr> pool;
  for (auto level : bench::kAllShiftLevels) {
    for (auto& inst : bench::generate_awcci(level, seed, tasks, dim)) {
      pool.push_back(std::make_shared<const bench::MTOInstance>(std::move(inst)));
    }
  }
  Rng rng(derive_seed(seed, 7));
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.index(i)]);
  return pool;
}

struct DeskScale {
  std::vector<InstancePtr> train;
  std::vector<InstancePtr> held_out;
  std::vector<ppo::TrainResult> runs;  ///< one per master seed
  double train_seconds = 0.0;
};

ppo::TrainConfig desk_config() {
  ppo::TrainConfig c;
  c.population_size = kPop;
  c.ppo.budget = kBudget;
  c.ppo.epochs = 3;
  return c;
}

harness::EvalConfig desk_eval(std::size_t runs) {
  harness::EvalConfig c;
  c.engine.population_size = kPop;
  c.engine.budget = kBudget;
  c.runs = runs;
  c.seed = kEvalSeed;
  return c;
}

// --- criteria ----------------------------------------------------------------

Outcome benchmark_correctness() {
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream why;
  bool ok = true;
  for (auto f : bench::kAllFunctions) {
    const bool schwefel = f == bench::BasicFunction::schwefel;
    const double at = schwefel ? 420.9687 : f == bench::BasicFunction::rosenbrock ? 1.0 : 0.0;
    for (std::size_t d : {1u, 10u, 50u}) {
      std::vector<double> z(d, at);
      const double v = bench::evaluate_basic(f, z);
      if (!(std::abs(v) < (schwefel ? 1e-2 : 1e-8))) {
        ok = false;
        why << bench::function_name(f) << "(D=" << d << ")=" << v << "; ";
      }
    }
  }
  std::size_t total = 0;
  double worst_orth = 0.0;
  for (auto level : bench::kAllShiftLevels) {
    auto set = bench::generate_awcci(level, 1, 10, 50);
    if (set.size() != 127) {
      ok = false;
      why << bench::level_name(level) << " has " << set.size() << " instances; ";
    }
    total += set.size();
    for (const auto& inst : set) {
      inst.validate();
      if (inst.task_count() != 10 || inst.dimension() != 50) {
        ok = false;
        why << inst.id << " shape; ";
      }
      for (const auto& t : inst.tasks) worst_orth = std::max(worst_orth, bench::orthogonality_error(t.rotation));
    }
  }
  const double secs = seconds_since(start);
  ok = ok && total == 635 && worst_orth < 1e-10 && secs < 60.0;
  why << "instances=" << total << " max|W^T W - I|=" << fmt(worst_orth, 3) << " time=" << fmt(secs, 3) << "s";
  return {ok, why.str()};
}

Outcome gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t checks = 0;
  for (std::size_t k : {2u, 5u}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      for (const auto& [block, report] : oracle::policy_gradient_suite(k, 1000 + seed, 16)) {
        checks += report.checked;
        if (report.worst_relative > worst) {
          worst = report.worst_relative;
          where = block + "/" + report.worst_name + " K=" + std::to_string(k) + " seed=" + std::to_string(seed);
        }
      }
    }
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 60.0, "worst relative error " + fmt(worst, 3) + " at " + where + " over " +
                                           std::to_string(checks) + " entries, time=" + fmt(secs, 3) + "s"};
}

bool features_in_range(const emt::StateFeatures& f) {
  for (Eigen::Index j = 0; j < f.rows(); ++j) {
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      const double v = f(j, c);
      if (!std::isfinite(v)) return false;
      if (c == 3 ? !(v == 0.0 || v == 1.0) : !(v >= 0.0 && v <= 1.0)) return false;
    }
  }
  return true;
}

Outcome engine_invariants() {
  auto pool = awcci_pool(5, 10, 31);
  harness::EvalConfig config;
  config.engine.population_size = 20;
  config.engine.budget = 100;
  config.record_actions = true;
  const harness::Controller random(nullptr, AblationVariant::random_all);
  const auto trace = harness::run_episode(pool.front(), random, config, 12345);
  bool monotone = true;
  for (std::size_t g = 1; g < trace.best.size(); ++g) {
    for (std::size_t j = 0; j < 5; ++j) monotone = monotone && trace.best[g][j] <= trace.best[g - 1][j];
  }
  bool features = true;
  bool actions = true;
  for (std::size_t t = 0; t < trace.actions.size(); ++t) {
    features = features && features_in_range(trace.features[t]);
    try {
      validate_action(trace.actions[t], 5);
    } catch (const std::exception&) {
      actions = false;
    }
  }
  const bool evals = trace.evaluations == 5u * 20u * 100u;
  std::ostringstream why;
  why << "monotone=" << monotone << " features_in_range=" << features << " actions_in_bounds=" << actions
      << " evaluations=" << trace.evaluations << " (expected 10000)";
  return {monotone && features && actions && evals && trace.actions.size() == 100, why.str()};
}

Outcome oracle_equivalence() {
  Rng rng(21);
  auto inst = std::make_shared<bench::MTOInstance>();
  inst->id = "oracle";
  inst->combination = {bench::BasicFunction::rastrigin, bench::BasicFunction::ackley};
  inst->tasks.push_back(bench::make_subtask(bench::BasicFunction::rastrigin, 0.2, 3, rng));
  inst->tasks.push_back(bench::make_subtask(bench::BasicFunction::ackley, 0.2, 3, rng));
  emt::EngineConfig config;
  config.population_size = 6;
  config.budget = 10;
  const std::uint64_t seed = 777;
  auto state = emt::init_populations(inst, config, seed);
  std::vector<oracle::DERun> ref;
  for (std::size_t j = 0; j < 2; ++j) ref.push_back(oracle::reference_de(inst->tasks[j], j, 6, 10, seed));
  ActionBundle idle;
  for (std::size_t j = 0; j < 2; ++j) {
    idle.source.push_back(1 - j);
    idle.transfer_ratio.push_back(0.0);
    idle.op.push_back(1);
    idle.mutation.push_back(0.5);
    idle.crossover.push_back(0.5);
  }
  std::size_t compared = 0;
  for (std::size_t g = 0; g <= 10; ++g) {
    for (std::size_t j = 0; j < 2; ++j) {
      const auto& p = state.populations[j];
      for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t d = 0; d < 3; ++d) {
          if (p.positions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) != ref[j].positions[g][i][d]) {
            return {false, "position mismatch at generation " + std::to_string(g) + " task " + std::to_string(j)};
          }
          ++compared;
        }
        if (p.fitness(static_cast<Eigen::Index>(i)) != ref[j].fitness[g][i]) {
          return {false, "fitness mismatch at generation " + std::to_string(g)};
        }
      }
      if (p.best_value != ref[j].best[g]) return {false, "best mismatch at generation " + std::to_string(g)};
    }
    if (g < 10) emt::emt_step(state, idle);
  }
  return {true, "bit-identical over " + std::to_string(compared) + " coordinates, 11 generations, 2 tasks"};
}

Outcome training_smoke(DeskScale& desk) {
  const auto start = std::chrono::steady_clock::now();
  int improved = 0;
  std::ostringstream why;
  for (std::uint64_t seed : kMasterSeeds) {
    desk.runs.push_back(ppo::train(desk.train, desk_config(), seed));
    const auto& run = desk.runs.back();
    const auto means = ppo::epoch_mean_returns(run.log);
    const bool up = means.size() == 3 && run.failures.empty() && means.back() > means.front();
    improved += up ? 1 : 0;
    why << "seed " << seed << ": epoch returns";
    for (double m : means) why << ' ' << fmt(m, 5);
    why << (up ? " (up); " : " (not up); ");
    std::cout << "  training seed " << seed << " done after " << fmt(seconds_since(start), 4) << "s" << std::endl;
  }
  desk.train_seconds = seconds_since(start);
  why << improved << "/3 improved, time=" << fmt(desk.train_seconds, 4) << "s";
  return {improved >= 2 && desk.train_seconds < 1800.0, why.str()};
}

struct HeldOutScores {
  std::vector<harness::EvaluationResult> learned;
  std::vector<harness::EvaluationResult> random_all;
  std::vector<harness::EvaluationResult> no_transfer;
  std::vector<harness::EvaluationResult> learned_sampled;  ///< context only, not part of any verdict
};

double mean_of(const std::vector<harness::EvaluationResult>& rows, double harness::EvaluationResult::*field) {
  double s = 0.0;
  for (const auto& r : rows) s += r.*field;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

HeldOutScores held_out_scores(const DeskScale& desk) {
  const auto& params = desk.runs.front().params;
  const auto config = desk_eval(5);
  HeldOutScores s;
  s.learned = harness::evaluate(desk.held_out, harness::Controller(&params, AblationVariant::full), config).results;
  s.random_all = harness::evaluate(desk.held_out, harness::Controller(nullptr, AblationVariant::random_all), config).results;
  s.no_transfer =
      harness::evaluate(desk.held_out, harness::Controller(nullptr, AblationVariant::no_transfer), config).results;
  auto sampled = config;
  sampled.mode = policy::ActMode::sample;
  s.learned_sampled = harness::evaluate(desk.held_out, harness::Controller(&params, AblationVariant::full), sampled).results;
  return s;
}

Outcome learned_advantage(const HeldOutScores& s) {
  auto perfs = [](const std::vector<harness::EvaluationResult>& rows) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.perf);
    return v;
  };
  const double ours = mean_of(s.learned, &harness::EvaluationResult::perf);
  const double rnd = mean_of(s.random_all, &harness::EvaluationResult::perf);
  const double idle = mean_of(s.no_transfer, &harness::EvaluationResult::perf);
  const auto test = harness::wilcoxon_signed_rank(perfs(s.learned), perfs(s.random_all));
  std::ostringstream why;
  why << "mean perf learned=" << fmt(ours) << " random_all=" << fmt(rnd) << " no_transfer=" << fmt(idle)
      << ", wilcoxon vs random_all p=" << fmt(test.p_value, 3) << " (n=" << test.n << " of " << s.learned.size()
      << ")";
  return {ours < rnd && ours < idle && test.p_value < 0.05 && s.learned.size() == 50, why.str()};
}

Outcome kt_quality(const HeldOutScores& s) {
  const double ours = mean_of(s.learned, &harness::EvaluationResult::kt_success_ratio);
  const double rnd = mean_of(s.random_all, &harness::EvaluationResult::kt_success_ratio);
  return {ours >= rnd + 0.05,
          "mean kt_success_ratio learned=" + fmt(ours) + " random_all=" + fmt(rnd) + " (margin " + fmt(ours - rnd) + ")"};
}

InstancePtr twin_instance() {
  // Tasks 0 and 1 are the same problem; tasks 2-4 use a different function.
  Rng rng(derive_seed(kDataSeed, 55));
  auto inst = std::make_shared<bench::MTOInstance>();
  inst->id = "routing_twins";
  inst->combination = {bench::BasicFunction::rastrigin, bench::BasicFunction::griewank};
  const auto twin = bench::make_subtask(bench::BasicFunction::rastrigin, 0.4, kDim, rng);
  inst->tasks = {twin, twin};
  for (int j = 0; j < 3; ++j) {
    inst->tasks.push_back(bench::make_subtask(bench::BasicFunction::griewank, 0.4, kDim, rng));
  }
  inst->validate();
  return inst;
}

Outcome routing_sanity(const DeskScale& desk) {
  const auto inst = twin_instance();
  const auto& params = desk.runs.front().params;
  auto config = desk_eval(5);
  config.record_attention = true;
  const harness::Controller controller(&params, AblationVariant::full);
  std::size_t hits = 0;
  std::size_t total = 0;
  double score_gap = 0.0;
  for (std::size_t r = 0; r < 5; ++r) {
    const auto trace = harness::run_episode(inst, controller, config, harness::run_seed(kEvalSeed, inst->id, r));
    for (const RealMatrix& s : trace.scores) {
      auto masked_argmax = [&](Eigen::Index row) {
        Eigen::Index best = row == 0 ? 1 : 0;
        for (Eigen::Index c = 0; c < s.cols(); ++c) {
          if (c != row && s(row, c) > s(row, best)) best = c;
        }
        return best;
      };
      if (masked_argmax(0) == 1 && masked_argmax(1) == 0) ++hits;
      score_gap += s(0, 1) - s(0, 2);
      ++total;
    }
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(total);
  return {frac >= 0.6, "twins mutually top-ranked in " + fmt(100.0 * frac, 3) + "% of " + std::to_string(total) +
                           " generations (mean score(0,1)-score(0,2)=" + fmt(score_gap / static_cast<double>(total)) +
                           ")"};
}

Outcome variable_k(const DeskScale& desk) {
  const auto& params = desk.runs.front().params;
  std::ostringstream why;
  bool ok = true;
  for (std::size_t k : {3u, 10u}) {
    auto pool = awcci_pool(k, kDim, kDataSeed + k);
    std::vector<InstancePtr> some(pool.begin(), pool.begin() + 3);
    auto config = desk_eval(1);
    config.record_actions = true;
    std::size_t checked = 0;
    for (auto mode : {policy::ActMode::deterministic, policy::ActMode::sample}) {
      config.mode = mode;
      try {
        auto out = harness::evaluate(some, harness::Controller(&params, AblationVariant::full), config);
        for (const auto& runs : out.traces) {
          for (const auto& trace : runs) {
            for (std::size_t t = 0; t < trace.actions.size(); ++t) {
              validate_action(trace.actions[t], k);
              ok = ok && features_in_range(trace.features[t]);
              ++checked;
            }
          }
        }
      } catch (const std::exception& e) {
        ok = false;
        why << "K=" << k << " error: " << e.what() << "; ";
      }
    }
    why << "K=" << k << ": " << checked << " actions in bounds; ";
  }
  return {ok, why.str()};
}

Outcome ablation_harness(const DeskScale& desk) {
  const auto& params = desk.runs.front().params;
  std::ostringstream why;
  bool ok = true;
  for (auto v : {AblationVariant::no_tr, AblationVariant::no_kc, AblationVariant::no_op, AblationVariant::no_f,
                 AblationVariant::no_cr}) {
    const auto d = oracle::diff_against_full(desk.held_out.front(), params, v, desk_eval(1), 4242);
    const bool this_ok = d.ok && d.generations == kBudget && d.substituted_differs > 0;
    ok = ok && this_ok;
    why << harness::variant_name(v) << (this_ok ? " ok" : " FAILED") << " (" << d.substituted_differs << "/"
        << d.generations << " differ";
    if (!d.ok) why << ", " << d.detail;
    why << "); ";
  }
  return {ok, why.str()};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& criterion) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criterion();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " [" << fmt(seconds_since(start), 4) << "s] " << o.detail
              << std::endl;
  };

  report("benchmark_correctness", benchmark_correctness);
  report("gradient_suite", gradient_suite);
  report("engine_invariants", engine_invariants);
  report("oracle_equivalence", oracle_equivalence);

  DeskScale desk;
  {
    auto pool = awcci_pool(kTasks, kDim, kDataSeed);
    desk.train.assign(pool.begin(), pool.begin() + 20);
    desk.held_out.assign(pool.begin() + 20, pool.begin() + 30);
  }
  report("training_smoke", [&] { return training_smoke(desk); });
  if (desk.runs.empty()) {
    std::cout << "FAIL downstream criteria skipped: no trained policy" << std::endl;
    return 1;
  }
  HeldOutScores scores;
  report("learned_policy_advantage", [&] {
    scores = held_out_scores(desk);
    std::cout << "  note: same policy acting in sample mode: mean perf "
              << fmt(mean_of(scores.learned_sampled, &harness::EvaluationResult::perf)) << ", mean kt_success_ratio "
              << fmt(mean_of(scores.learned_sampled, &harness::EvaluationResult::kt_success_ratio)) << std::endl;
    return learned_advantage(scores);
  });
  report("kt_success_ratio_margin", [&] { return kt_quality(scores); });
  report("routing_sanity", [&] { return routing_sanity(desk); });
  report("variable_k", [&] { return variable_k(desk); });
  report("ablation_harness", [&] { return ablation_harness(desk); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
