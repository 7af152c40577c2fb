#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mtorl/emt/engine.hpp"
#include "mtorl/emt/trace.hpp"
#include "oracles/reference_de.hpp"

using namespace mtorl;
using namespace mtorl::emt;

namespace {

std::shared_ptr<const bench::MTOInstance> small_instance(std::size_t k, std::size_t d, std::uint64_t seed,
                                                         double level = 0.2) {
  Rng rng(seed);
  auto inst = std::make_shared<bench::MTOInstance>();
  inst->id = "test";
  inst->combination = {bench::kAllFunctions.begin(), bench::kAllFunctions.end()};
  for (std::size_t j = 0; j < k; ++j) {
    inst->tasks.push_back(bench::make_subtask(bench::kAllFunctions[j % 7], level, d, rng));
  }
  return inst;
}

ActionBundle random_action(std::size_t k, Rng& rng, double max_ratio = 0.5) {
  ActionBundle a;
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t s = rng.index(k - 1);
    a.source.push_back(s >= j ? s + 1 : s);
    a.transfer_ratio.push_back(rng.uniform(0.0, max_ratio));
    a.op.push_back(static_cast<int>(rng.index(4)) + 1);
    a.mutation.push_back(rng.uniform());
    a.crossover.push_back(rng.uniform());
  }
  return a;
}

ActionBundle idle_action(std::size_t k) {
  ActionBundle a;
  for (std::size_t j = 0; j < k; ++j) {
    a.source.push_back((j + 1) % k);
    a.transfer_ratio.push_back(0.0);
    a.op.push_back(1);
    a.mutation.push_back(0.5);
    a.crossover.push_back(0.5);
  }
  return a;
}

Population population_from(const RealMatrix& x, const RealVector& f) {
  Population p;
  p.positions = x;
  p.fitness = f;
  p.best_value = f.minCoeff();
  return p;
}

EngineConfig config(std::size_t n, std::size_t g = 100) {
  EngineConfig c;
  c.population_size = n;
  c.budget = g;
  return c;
}

}  // namespace

TEST(Init, PopulationShapeAndInitialBest) {
  auto inst = small_instance(3, 5, 1);
  auto s = init_populations(inst, config(50), 7);
  ASSERT_EQ(s.populations.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& p = s.populations[j];
    EXPECT_EQ(p.size(), 50u);
    EXPECT_GE(p.positions.minCoeff(), 0.0);
    EXPECT_LE(p.positions.maxCoeff(), 1.0);
    EXPECT_EQ(s.initial_best[j], p.fitness.minCoeff());
    EXPECT_EQ(p.best_value, p.fitness.minCoeff());
    for (Eigen::Index i = 0; i < 50; ++i) {
      const double* row = p.positions.data() + i * 5;
      EXPECT_EQ(p.fitness(i), inst->tasks[j].evaluate(std::span<const double>(row, 5)));
    }
  }
  EXPECT_EQ(s.initial_evaluations, 150u);
  EXPECT_EQ(s.evaluations, 0u);
}

TEST(Init, DeterministicUnderSeed) {
  auto inst = small_instance(2, 4, 2);
  auto a = init_populations(inst, config(10), 99);
  auto b = init_populations(inst, config(10), 99);
  auto c = init_populations(inst, config(10), 100);
  EXPECT_EQ(a.populations[1].positions, b.populations[1].positions);
  EXPECT_NE(a.populations[1].positions, c.populations[1].positions);
}

TEST(Init, TinyPopulationIsAConfigurationError) {
  EXPECT_THROW(init_populations(small_instance(2, 3, 1), config(3), 1), ConfigurationError);
}

TEST(Features, IdenticalIndividualsHaveZeroSpread) {
  auto s = init_populations(small_instance(2, 3, 1), config(6), 1);
  for (auto& p : s.populations) {
    p.positions.rowwise() = p.positions.row(0);
    p.fitness.setConstant(p.fitness(0));
  }
  auto f = extract_state(s);
  EXPECT_EQ(f(0, 0), 0.0);
  EXPECT_EQ(f(0, 1), 0.0);
  EXPECT_EQ(f(1, 0), 0.0);
}

TEST(Features, InitialStateFlags) {
  auto s = init_populations(small_instance(3, 3, 1), config(8), 1);
  auto f = extract_state(s);
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_EQ(f(j, 2), 0.0);
    EXPECT_EQ(f(j, 3), 0.0);
    EXPECT_EQ(f(j, 4), 0.0);
  }
}

TEST(Features, TwoPointPopulationDiversity) {
  // positions 0 and 1 per dimension: population std = 0.5.
  Population p;
  p.positions.resize(2, 4);
  p.positions.row(0).setZero();
  p.positions.row(1).setOnes();
  EXPECT_DOUBLE_EQ(population_diversity(p), 0.5);
}

TEST(Features, ObjectiveSpreadMatchesHandComputation) {
  auto s = init_populations(small_instance(2, 3, 3), config(4), 1);
  // f* = 0, so fhat = f / fmax0.
  s.initial_worst[0] = 8.0;
  s.populations[0].fitness << 0.0, 2.0, 4.0, 8.0;
  auto f = extract_state(s);
  const std::vector<double> fhat = {0.0, 0.25, 0.5, 1.0};
  const double mu = (0.0 + 0.25 + 0.5 + 1.0) / 4;
  double var = 0;
  for (double v : fhat) var += (v - mu) * (v - mu) / 4;
  EXPECT_NEAR(f(0, 1), std::sqrt(var), 1e-15);
}

TEST(SelfEvolve, ZeroDifferenceGivesBaseVector) {
  // All rows equal except the parent: any r2, r3 share a position, so v = x_r1.
  RealMatrix x = RealMatrix::Constant(5, 3, 0.3);
  x.row(0) << 0.9, 0.9, 0.9;
  auto p = population_from(x, RealVector::Zero(5));
  Rng rng(4);
  const std::vector<std::size_t> parents = {0};
  auto off = self_evolve(p, parents, 0.5, 1.0, rng);
  EXPECT_EQ(off.row(0), RealMatrix::Constant(1, 3, 0.3));
}

TEST(SelfEvolve, CrossoverOneTakesMutantEverywhere) {
  Rng init(5);
  RealMatrix x(6, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = init.uniform(0.3, 0.7);
  auto p = population_from(x, RealVector::Zero(6));
  Rng rng(6);
  Rng replay(6);
  const std::vector<std::size_t> parents = {2};
  auto off = self_evolve(p, parents, 0.5, 1.0, rng);
  const std::size_t r1 = draw_excluding(6, {2}, replay);
  const std::size_t r2 = draw_excluding(6, {2, r1}, replay);
  const std::size_t r3 = draw_excluding(6, {2, r1, r2}, replay);
  RealMatrix mutant = x.row(static_cast<Eigen::Index>(r1)) +
                      0.5 * (x.row(static_cast<Eigen::Index>(r2)) - x.row(static_cast<Eigen::Index>(r3)));
  EXPECT_EQ(off.row(0), mutant.cwiseMax(0.0).cwiseMin(1.0));
}

TEST(SelfEvolve, OffspringStayInUnitBox) {
  Rng init(7);
  RealMatrix x(10, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = init.uniform() < 0.5 ? 0.0 : 1.0;
  auto p = population_from(x, RealVector::Zero(10));
  std::vector<std::size_t> parents(10);
  std::iota(parents.begin(), parents.end(), 0);
  auto off = self_evolve(p, parents, 1.0, 0.9, init);
  EXPECT_GE(off.minCoeff(), 0.0);
  EXPECT_LE(off.maxCoeff(), 1.0);
}

TEST(Transfer, CountRounding) {
  EXPECT_EQ(transfer_count(0.2, 50), 10u);
  EXPECT_EQ(transfer_count(0.0, 50), 0u);
  EXPECT_EQ(transfer_count(0.5, 7), 4u);   // 3.5 rounds up
  EXPECT_EQ(transfer_count(0.07, 50), 4u); // 3.5 rounds up
  EXPECT_EQ(transfer_count(2.0, 5), 5u);
}

TEST(Transfer, ZeroRatioProducesNothingAndDrawsNothing) {
  auto s = init_populations(small_instance(2, 3, 1), config(10), 1);
  Rng rng(3);
  Rng untouched(3);
  auto kt = transfer_evolve(s.populations[0], s.populations[1], {0.0, 2, 0.5, 0.5}, rng);
  EXPECT_EQ(kt.count(), 0u);
  EXPECT_EQ(rng.next(), untouched.next());
}

TEST(Transfer, OperatorOneMatchesTableFormula) {
  auto s = init_populations(small_instance(2, 4, 8), config(20), 2);
  const auto& target = s.populations[0];
  const auto& source = s.populations[1];
  const TransferControl ctl{0.2, 1, 0.7, 1.0};
  Rng rng(11);
  Rng replay(11);
  auto kt = transfer_evolve(target, source, ctl, rng);
  ASSERT_EQ(kt.count(), 4u);
  const auto hosts = replay.sample_without_replacement(20, 4);
  EXPECT_EQ(hosts, kt.hosts);
  const auto ranked = source.ranking();
  for (std::size_t k = 0; k < 4; ++k) {
    const auto e = replay.sample_without_replacement(4, 2);
    ASSERT_NE(e[0], e[1]);
    RealMatrix mutant = target.positions.row(static_cast<Eigen::Index>(target.best_index())) +
                        0.7 * (source.positions.row(static_cast<Eigen::Index>(ranked[e[0]])) -
                               source.positions.row(static_cast<Eigen::Index>(ranked[e[1]])));
    replay.index(4);  // j_rand
    for (int g = 0; g < 4; ++g) replay.uniform();
    EXPECT_EQ(kt.offspring.row(static_cast<Eigen::Index>(k)), mutant.cwiseMax(0.0).cwiseMin(1.0)) << k;
  }
}

TEST(Transfer, OperatorThreeWithZeroScaleInjectsElites) {
  auto s = init_populations(small_instance(2, 5, 9), config(20), 3);
  const auto& source = s.populations[1];
  Rng rng(12);
  auto kt = transfer_evolve(s.populations[0], source, {0.25, 3, 0.0, 1.0}, rng);
  ASSERT_EQ(kt.count(), 5u);
  const auto ranked = source.ranking();
  for (Eigen::Index k = 0; k < kt.offspring.rows(); ++k) {
    bool matched = false;
    for (std::size_t e = 0; e < 5; ++e) {
      matched = matched || kt.offspring.row(k) == source.positions.row(static_cast<Eigen::Index>(ranked[e]));
    }
    EXPECT_TRUE(matched) << "offspring " << k << " is not an elite";
  }
}

TEST(Transfer, SingleEliteStillWorksForEveryOperator) {
  auto s = init_populations(small_instance(2, 3, 9), config(10), 3);
  for (int op = 1; op <= 4; ++op) {
    Rng rng(static_cast<std::uint64_t>(op));
    auto kt = transfer_evolve(s.populations[0], s.populations[1], {0.1, op, 0.5, 0.5}, rng);
    ASSERT_EQ(kt.count(), 1u);
    EXPECT_GE(kt.offspring.minCoeff(), 0.0);
    EXPECT_LE(kt.offspring.maxCoeff(), 1.0);
  }
}

TEST(Selection, WorseOffspringLeavePopulationAndBumpStagnation) {
  auto p = population_from(RealMatrix::Constant(4, 2, 0.5), RealVector::Constant(4, 1.0));
  p.best_value = 1.0;
  auto before = p.positions;
  const std::vector<bool> flags(4, true);
  auto survived = greedy_select(p, RealMatrix::Zero(4, 2), RealVector::Constant(4, 2.0), flags);
  EXPECT_EQ(survived, 0u);
  EXPECT_EQ(p.positions, before);
  EXPECT_EQ(p.stagnation, 1u);
  EXPECT_FALSE(p.improved);
}

TEST(Selection, TiesKeepTheOffspring) {
  auto p = population_from(RealMatrix::Constant(4, 2, 0.5), RealVector::Constant(4, 1.0));
  const std::vector<bool> flags = {true, false, false, false};
  auto survived = greedy_select(p, RealMatrix::Zero(4, 2), RealVector::Constant(4, 1.0), flags);
  EXPECT_EQ(survived, 1u);
  EXPECT_EQ(p.positions, RealMatrix::Zero(4, 2));
  EXPECT_EQ(p.stagnation, 1u);
}

TEST(Selection, SurvivalRateFeedsNextFeatures) {
  auto s = init_populations(small_instance(2, 3, 1), config(20), 5);
  // 10 transfer offspring for task 0 of which exactly 4 win.
  auto& p = s.populations[0];
  RealVector fit = p.fitness;
  std::vector<bool> flags(20, false);
  for (std::size_t i = 0; i < 10; ++i) {
    flags[i] = true;
    fit(static_cast<Eigen::Index>(i)) = i < 4 ? p.fitness(static_cast<Eigen::Index>(i)) - 1.0 : p.fitness(static_cast<Eigen::Index>(i)) + 1.0;
  }
  for (std::size_t i = 10; i < 20; ++i) fit(static_cast<Eigen::Index>(i)) += 1.0;
  const auto survived = greedy_select(p, p.positions, fit, flags);
  EXPECT_EQ(survived, 4u);
  s.ledger.current[0] = {10, survived};
  EXPECT_DOUBLE_EQ(extract_state(s)(0, 4), 0.4);
}

TEST(Reward, Examples) {
  const std::vector<double> opt = {0.0, 0.0};
  const std::vector<double> f0 = {10.0, 4.0};
  std::vector<TransferCount> none(2);
  auto r = compute_reward(std::vector<double>{5.0, 3.0}, std::vector<double>{5.0, 3.0}, f0, opt, none);
  EXPECT_EQ(r.total, 0.0);
  r = compute_reward(std::vector<double>{10.0, 3.0}, std::vector<double>{0.0, 3.0}, f0, opt, none);
  EXPECT_EQ(r.convergence[0], 1.0);
  std::vector<TransferCount> half = {{10, 5}, {0, 0}};
  r = compute_reward(std::vector<double>{5.0, 3.0}, std::vector<double>{5.0, 3.0}, f0, opt, half);
  EXPECT_EQ(r.task_reward(0), 0.5);
  EXPECT_EQ(r.total, 0.5);
}

TEST(Reward, DegenerateNormalizerGivesZero) {
  std::vector<TransferCount> none(1);
  auto r = compute_reward(std::vector<double>{1.0}, std::vector<double>{0.5}, std::vector<double>{0.0},
                          std::vector<double>{0.0}, none);
  EXPECT_EQ(r.convergence[0], 0.0);
}

TEST(Step, SelfRouteIsAContractError) {
  auto s = init_populations(small_instance(3, 3, 1), config(6), 1);
  auto a = idle_action(3);
  a.source[1] = 1;
  EXPECT_THROW(emt_step(s, a), ContractError);
}

TEST(Step, IdleStepRewardIsConvergenceOnly) {
  auto s = init_populations(small_instance(3, 4, 2), config(10), 4);
  auto r = emt_step(s, idle_action(3));
  double rc = 0;
  for (double v : r.convergence) rc += v;
  EXPECT_EQ(r.total, rc);
  for (double v : r.transfer) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.evaluations, 30u);
}

TEST(Step, IdleRunMatchesReferenceDE) {
  // K=2, N=6, D=3, G=10
  auto inst = small_instance(2, 3, 21);
  const std::uint64_t seed = 1234;
  auto s = init_populations(inst, config(6, 10), seed);
  std::vector<oracle::DERun> ref;
  for (std::size_t j = 0; j < 2; ++j) ref.push_back(oracle::reference_de(inst->tasks[j], j, 6, 10, seed));
  for (std::size_t g = 0; g <= 10; ++g) {
    for (std::size_t j = 0; j < 2; ++j) {
      const auto& p = s.populations[j];
      for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t d = 0; d < 3; ++d) {
          ASSERT_EQ(p.positions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)), ref[j].positions[g][i][d])
              << "gen " << g << " task " << j;
        }
        ASSERT_EQ(p.fitness(static_cast<Eigen::Index>(i)), ref[j].fitness[g][i]);
      }
      ASSERT_EQ(p.best_value, ref[j].best[g]);
    }
    if (g < 10) emt_step(s, idle_action(2));
  }
}

TEST(Step, RandomPolicyRunKeepsInvariants) {
  auto inst = small_instance(4, 5, 3);
  auto s = init_populations(inst, config(12, 30), 8);
  Rng policy(77);
  std::vector<double> prev = s.best_values();
  for (std::size_t t = 0; t < 30; ++t) {
    auto f = extract_state(s);
    ASSERT_TRUE(f.allFinite());
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
      for (Eigen::Index c : {0, 1, 2, 4}) {
        EXPECT_GE(f(j, c), 0.0);
        EXPECT_LE(f(j, c), 1.0);
      }
      EXPECT_TRUE(f(j, 3) == 0.0 || f(j, 3) == 1.0);
    }
    auto r = emt_step(s, random_action(4, policy));
    auto now = s.best_values();
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_LE(now[j], prev[j]);
      EXPECT_LE(s.ledger.current[j].survived, s.ledger.current[j].transferred);
      EXPECT_LE(s.ledger.current[j].transferred, transfer_count(0.5, 12));
      EXPECT_LE(r.convergence[j], 1.0);
      EXPECT_LE(r.task_reward(j), 2.0);
    }
    prev = now;
  }
  EXPECT_EQ(s.evaluations, 4u * 12u * 30u);
}

TEST(Step, SameSeedSameTrajectory) {
  auto inst = small_instance(3, 4, 5);
  auto run = [&] {
    auto s = init_populations(inst, config(8, 5), 42);
    Rng policy(1);
    for (int t = 0; t < 5; ++t) emt_step(s, random_action(3, policy));
    return s.populations[2].positions;
  };
  EXPECT_EQ(run(), run());
}

TEST(Trace, CsvHeaderAndRows) {
  auto s = init_populations(small_instance(2, 3, 1), config(6, 3), 1);
  std::vector<TraceRow> rows;
  Rng policy(2);
  for (int t = 0; t < 3; ++t) {
    auto f = extract_state(s);
    auto a = random_action(2, policy);
    auto r = emt_step(s, a);
    append_trace(rows, s, f, a, r);
  }
  std::ostringstream out;
  write_trace_csv(out, rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kTraceHeader);
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 6);
}
