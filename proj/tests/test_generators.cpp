#include <gtest/gtest.h>

#include <cmath>

#include "cpgraph/check.hpp"
#include "cpgraph/generators.hpp"
#include "cpgraph/xcsp3.hpp"
#include "oracle_reference.hpp"

namespace cpg {
namespace {

int sign_differences(const CnfFormula& a, const CnfFormula& b) {
  int diff = 0;
  for (std::size_t c = 0; c < a.clauses.size(); ++c)
    for (std::size_t k = 0; k < a.clauses[c].size(); ++k) {
      EXPECT_EQ(std::abs(a.clauses[c][k]), std::abs(b.clauses[c][k]));
      diff += a.clauses[c][k] != b.clauses[c][k];
    }
  return diff;
}

TEST(DeriveSeed, DistinctStreams) {
  EXPECT_EQ(derive_seed(1, 0), derive_seed(1, 0));
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(SatGenerator, PairLabelsAndSingleFlip) {
  Rng rng(1);
  const auto pair = gen_sat_formulas(5, rng);
  EXPECT_FALSE(reference::truth_table_sat(pair.unsat));
  EXPECT_TRUE(reference::truth_table_sat(pair.sat));
  ASSERT_EQ(pair.sat.clauses.size(), pair.unsat.clauses.size());
  EXPECT_EQ(sign_differences(pair.sat, pair.unsat), 1);
  EXPECT_EQ(pair.sat.clauses.back().front(), -pair.unsat.clauses.back().front());
  // Minimal prefix: dropping the last clause restores satisfiability.
  CnfFormula prefix = pair.unsat;
  prefix.clauses.pop_back();
  EXPECT_TRUE(reference::truth_table_sat(prefix));
}

TEST(SatGenerator, ManyPairsAgreeWithTruthTable) {
  for (int t = 0; t < 40; ++t) {
    Rng rng(derive_seed(9, t));
    const auto pair = gen_sat_formulas(3 + t % 8, rng);
    EXPECT_FALSE(reference::truth_table_sat(pair.unsat));
    EXPECT_TRUE(reference::truth_table_sat(pair.sat));
  }
}

TEST(SatGenerator, MeanClauseArity) {
  Rng rng(10);
  double total = 0;
  constexpr int kClauses = 10000;
  for (int c = 0; c < kClauses; ++c) {
    const auto clause = random_clause(40, rng);
    total += clause.size();
    std::vector<int> vars;
    for (int lit : clause) vars.push_back(std::abs(lit));
    std::sort(vars.begin(), vars.end());
    ASSERT_EQ(std::adjacent_find(vars.begin(), vars.end()), vars.end());
  }
  const double mean = total / kClauses;
  EXPECT_GE(mean, 7.0);
  EXPECT_LE(mean, 9.0);
}

TEST(SatModel, Mapping) {
  const CnfFormula f{3, {{1, -2}, {-3}, {2}}};
  const Instance inst = sat_model(f);
  ASSERT_EQ(inst.constraints.size(), 3u);
  EXPECT_EQ(std::get<Intension>(inst.constraints[0].body).expr,
            Expr::op(OpKind::or_, {Expr::var("x1"), Expr::op(OpKind::not_, {Expr::var("x2")})}));
  EXPECT_EQ(std::get<Intension>(inst.constraints[1].body).expr, Expr::op(OpKind::not_, {Expr::var("x3")}));
  EXPECT_EQ(std::get<Intension>(inst.constraints[2].body).expr, Expr::var("x2"));
  for (const auto& v : inst.vars) {
    EXPECT_EQ(v.kind, VarKind::boolean);
    EXPECT_EQ(v.domain, (std::vector<std::int64_t>{0, 1}));
  }
  EXPECT_TRUE(validate(inst).ok());
}

TEST(TspGenerator, SquareCornersThresholds) {
  // Slightly perturbed corners so the optimum is unique up to direction.
  TspData d = tsp_data_from_points({{0.0, 0.0}, {0.7, 0.0}, {0.7, 0.69}, {0.01, 0.7}});
  EXPECT_EQ(d.optimal, reference::permutation_tsp(d.dist));
  for (bool element : {false, true}) {
    d.target = tsp_sat_target(d.optimal);
    const Instance sat = element ? tsp_elem_model(d) : tsp_ext_model(d);
    const auto solution = brute_force_solve(sat);
    ASSERT_TRUE(solution.has_value());
    std::int64_t cost = 0;
    for (int j = 0; j < 4; ++j) cost += solution->at("d" + std::to_string(j));
    EXPECT_LE(cost, d.target);
    d.target = tsp_unsat_target(d.optimal);
    EXPECT_LT(d.target, d.optimal);
    EXPECT_FALSE(brute_force_solve(element ? tsp_elem_model(d) : tsp_ext_model(d)).has_value());
  }
}

TEST(TspGenerator, TargetsBracketOptimum) {
  for (std::int64_t c : {1, 2, 49, 50, 51, 100, 12345, 40000}) {
    EXPECT_GE(tsp_sat_target(c), c);
    EXPECT_LT(tsp_unsat_target(c), c);
  }
  EXPECT_EQ(tsp_sat_target(10000), 10200);
  EXPECT_EQ(tsp_unsat_target(10000), 9800);
}

TEST(TspModels, ConstraintCounts) {
  Rng rng(4);
  TspData d = random_tsp_data(4, rng);
  d.target = tsp_sat_target(d.optimal);
  const Instance ext = tsp_ext_model(d);
  int tables = 0;
  for (const auto& c : ext.constraints)
    if (const auto* t = std::get_if<Extension>(&c.body)) {
      ++tables;
      EXPECT_EQ(t->tuples.size(), 12u);
    }
  EXPECT_EQ(tables, 4);

  const Instance elem = tsp_elem_model(d);
  std::array<int, 7> kinds{};
  for (const auto& c : elem.constraints) ++kinds[static_cast<int>(c.kind())];
  EXPECT_EQ(kinds[static_cast<int>(ConstraintKind::element)], 4);
  EXPECT_EQ(kinds[static_cast<int>(ConstraintKind::sum)], 1);
  EXPECT_EQ(kinds[static_cast<int>(ConstraintKind::all_different)], 1);
  EXPECT_EQ(kinds[static_cast<int>(ConstraintKind::intension)], 1);
  EXPECT_EQ(elem.constraints.size(), 7u);
}

TEST(TspModels, ExtAndElemAgreeWithPermutationOracle) {
  for (int n : {4, 5, 6}) {
    for (int seed = 0; seed < 50; ++seed) {
      Rng rng(derive_seed(n, seed));
      TspData d = random_tsp_data(n, rng);
      const std::int64_t best = reference::permutation_tsp(d.dist);
      ASSERT_EQ(d.optimal, best);
      // Alternate targets so both outcomes are exercised.
      d.target = seed % 2 ? tsp_sat_target(best) : tsp_unsat_target(best);
      const bool expected = best <= d.target;
      EXPECT_EQ(brute_force_solve(tsp_ext_model(d)).has_value(), expected);
      EXPECT_EQ(brute_force_solve(tsp_elem_model(d)).has_value(), expected);
    }
  }
}

TEST(ColGenerator, TrianglePath) {
  const SimpleGraph path{3, {{0, 1}, {1, 2}}};
  const SimpleGraph triangle{3, {{0, 1}, {1, 2}, {0, 2}}};
  EXPECT_TRUE(brute_force_solve(coloring_model(path, 2)).has_value());
  EXPECT_FALSE(brute_force_solve(coloring_model(triangle, 2)).has_value());
}

TEST(ColGenerator, PairsDifferByOneEdgeAndLabelsHold) {
  for (int t = 0; t < 30; ++t) {
    Rng rng(derive_seed(77, t));
    const int n = 4 + t % 7;
    const auto pair = gen_coloring_graphs(n, rng);
    EXPECT_GE(pair.k, 3);
    SimpleGraph denser = pair.graph;
    denser.edges.push_back(pair.edge);
    EXPECT_EQ(std::count(pair.graph.edges.begin(), pair.graph.edges.end(), pair.edge), 0);
    EXPECT_TRUE(reference::exhaustive_colorable(pair.graph, pair.k));
    EXPECT_FALSE(reference::exhaustive_colorable(denser, pair.k));
  }
}

TEST(KnapsackGenerator, TwoItemThreshold) {
  const KnapsackData d{{2, 3}, {3, 4}, 3, 4};
  EXPECT_TRUE(brute_force_solve(knapsack_model(d, 4)).has_value());
  EXPECT_FALSE(brute_force_solve(knapsack_model(d, 5)).has_value());
}

TEST(KnapsackGenerator, TargetsFlipAtOptimum) {
  for (int t = 0; t < 30; ++t) {
    Rng rng(derive_seed(5, t));
    const auto d = random_knapsack_data(3 + t % 10, rng);
    EXPECT_GT(d.optimal, 0);
    EXPECT_EQ(d.optimal, reference::subset_knapsack(d.weights, d.values, d.capacity));
    EXPECT_LE(knapsack_sat_target(d.optimal), d.optimal);
    EXPECT_GT(knapsack_unsat_target(d.optimal), d.optimal);
    std::int64_t total = 0;
    for (auto w : d.weights) total += w;
    EXPECT_EQ(d.capacity, total / 2);
  }
}

TEST(GeneratePair, LabelsMatchBruteForce) {
  const std::vector<std::pair<Problem, int>> cases = {
      {Problem::sat, 5}, {Problem::tsp_ext, 5}, {Problem::tsp_elem, 5}, {Problem::col, 6}, {Problem::knap, 8}};
  for (const auto& [problem, size] : cases) {
    for (std::uint64_t k = 0; k < 6; ++k) {
      const auto [sat, unsat] = generate_pair(problem, size, 123, k);
      EXPECT_TRUE(sat.label);
      EXPECT_FALSE(unsat.label);
      EXPECT_TRUE(brute_force_solve(sat.instance).has_value()) << problem_name(problem) << " " << k;
      EXPECT_FALSE(brute_force_solve(unsat.instance).has_value()) << problem_name(problem) << " " << k;
      EXPECT_EQ(sat.meta, unsat.meta);
      EXPECT_EQ(sat.meta.pair, k);
    }
  }
}

TEST(GeneratePair, Deterministic) {
  for (auto problem : {Problem::sat, Problem::tsp_ext, Problem::tsp_elem, Problem::col, Problem::knap}) {
    const int size = problem == Problem::knap ? 20 : 6;
    const auto a = generate_pair(problem, size, 31, 4);
    const auto b = generate_pair(problem, size, 31, 4);
    EXPECT_EQ(serialize_instance(a.first.instance), serialize_instance(b.first.instance));
    EXPECT_EQ(serialize_instance(a.second.instance), serialize_instance(b.second.instance));
  }
}

TEST(GeneratePair, SizeLimits) {
  EXPECT_THROW(generate_pair(Problem::tsp_ext, 13, 1, 0), OracleLimitError);
  EXPECT_THROW(generate_pair(Problem::sat, 2, 1, 0), std::invalid_argument);
  EXPECT_THROW(generate_pair(Problem::col, 19, 1, 0), std::invalid_argument);
}

TEST(Check, EvaluateSemantics) {
  const Assignment a{{"x", 7}, {"y", -2}};
  EXPECT_EQ(*evaluate(parse_functional_expr("add(x,mul(3,y))"), a), 1);
  EXPECT_EQ(*evaluate(parse_functional_expr("dist(y,x)"), a), 9);
  EXPECT_EQ(*evaluate(parse_functional_expr("xor(1,1,1)"), a), 1);
  EXPECT_FALSE(evaluate(parse_functional_expr("div(x,0)"), a).has_value());
}

}  // namespace
}  // namespace cpg
