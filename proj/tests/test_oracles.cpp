#include <gtest/gtest.h>

#include <random>

#include "cpgraph/generators.hpp"
#include "cpgraph/oracles.hpp"
#include "oracle_reference.hpp"

namespace cpg {
namespace {

TEST(Dpll, Trivial) {
  EXPECT_FALSE(oracle_sat_dpll({1, {{1}, {-1}}}));
  EXPECT_TRUE(oracle_sat_dpll({1, {{1}}}));
  EXPECT_TRUE(oracle_sat_dpll({3, {}}));
}

TEST(Dpll, ModelSatisfiesFormula) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    CnfFormula f{8, {}};
    for (int c = 0; c < 20; ++c) f.clauses.push_back(random_clause(8, rng, {2, 0.5, 0.6}));
    const auto model = dpll_solve(f);
    if (!model) continue;
    for (const auto& clause : f.clauses) {
      bool any = false;
      for (int lit : clause) any |= (*model)[std::abs(lit)] == (lit > 0);
      EXPECT_TRUE(any);
    }
  }
}

TEST(Dpll, AgreesWithTruthTable) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const int n = 3 + t % 6;
    CnfFormula f{n, {}};
    const int m = 2 + static_cast<int>(rng() % (5 * n));
    for (int c = 0; c < m; ++c) f.clauses.push_back(random_clause(n, rng, {1, 0.5, 0.5}));
    EXPECT_EQ(oracle_sat_dpll(f), reference::truth_table_sat(f)) << t;
  }
}

TEST(Dpll, LimitsAndValidation) {
  EXPECT_THROW(oracle_sat_dpll({kDpllVarLimit + 1, {{1}}}), OracleLimitError);
  EXPECT_THROW(oracle_sat_dpll({2, {{3}}}), std::invalid_argument);
  EXPECT_THROW(oracle_sat_dpll({2, {{}}}), std::invalid_argument);
}

TEST(HeldKarp, UnitSquare) {
  const DistanceMatrix square = {{0, 1, 2, 1}, {1, 0, 1, 2}, {2, 1, 0, 1}, {1, 2, 1, 0}};
  EXPECT_EQ(oracle_tsp(square), 4);
}

TEST(HeldKarp, AgreesWithPermutations) {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const auto d = random_tsp_data(4 + t % 5, rng);
    EXPECT_EQ(d.optimal, reference::permutation_tsp(d.dist));
  }
}

TEST(HeldKarp, SeedSevenFiveCities) {
  Rng rng(7);
  const auto d = random_tsp_data(5, rng);
  EXPECT_EQ(oracle_tsp(d.dist), reference::permutation_tsp(d.dist));
}

TEST(HeldKarp, Limit) {
  DistanceMatrix big(kHeldKarpLimit + 1, std::vector<std::int64_t>(kHeldKarpLimit + 1, 1));
  EXPECT_THROW(oracle_tsp(big), OracleLimitError);
}

TEST(Chromatic, KnownGraphs) {
  EXPECT_EQ(oracle_chromatic({4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}}), 4);
  EXPECT_EQ(oracle_chromatic({3, {{0, 1}, {1, 2}, {0, 2}}}), 3);
  EXPECT_EQ(oracle_chromatic({3, {{0, 1}, {1, 2}}}), 2);
  EXPECT_EQ(oracle_chromatic({5, {}}), 1);
  // Odd cycle.
  EXPECT_EQ(oracle_chromatic({5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}}}), 3);
}

TEST(Chromatic, AgreesWithExhaustive) {
  Rng rng(4);
  std::bernoulli_distribution coin(0.45);
  for (int t = 0; t < 30; ++t) {
    SimpleGraph g{4 + t % 5, {}};
    for (int a = 0; a < g.n; ++a)
      for (int b = a + 1; b < g.n; ++b)
        if (coin(rng)) g.edges.emplace_back(a, b);
    EXPECT_EQ(oracle_chromatic(g), reference::exhaustive_chromatic(g));
  }
}

TEST(Knapsack, TwoItems) {
  EXPECT_EQ(oracle_knapsack({2, 3}, {3, 4}, 3), 4);
  EXPECT_EQ(oracle_knapsack({2, 3}, {3, 4}, 5), 7);
  EXPECT_EQ(oracle_knapsack({2, 3}, {3, 4}, 1), 0);
}

TEST(Knapsack, AgreesWithSubsets) {
  Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    const auto d = random_knapsack_data(3 + t % 10, rng);
    EXPECT_EQ(d.optimal, reference::subset_knapsack(d.weights, d.values, d.capacity));
  }
}

}  // namespace
}  // namespace cpg
