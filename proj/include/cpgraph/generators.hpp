#pragma once

// Labeled satisfiable/unsatisfiable instance pairs for four decision problems:
// random SAT, TSP (two models), graph coloring and knapsack.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cpgraph/encoder.hpp"
#include "cpgraph/model.hpp"
#include "cpgraph/oracles.hpp"

namespace cpg {

using Rng = std::mt19937_64;

// Independent stream per pair: splitmix64 over (master seed, pair index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

enum class Problem { sat, tsp_ext, tsp_elem, col, knap };

std::string_view problem_name(Problem p);
std::optional<Problem> problem_from_name(std::string_view name);

struct InstancePair {
  Instance sat;
  Instance unsat;
};

// ---- SAT

// Clause length is min(n_vars, 3 + Bernoulli(0.7) + Geometric(0.25)) with the
// geometric counted in trials, mean 7.7 before clamping.
struct ClauseLength {
  int base = 3;
  double bernoulli = 0.7;
  double geometric = 0.25;
};

std::vector<int> random_clause(int n_vars, Rng& rng, const ClauseLength& len = {});

struct CnfPair {
  CnfFormula unsat;  // minimal unsatisfiable prefix of the clause stream
  CnfFormula sat;    // same, first literal of the last clause negated
};

CnfPair gen_sat_formulas(int n_vars, Rng& rng);
Instance sat_model(const CnfFormula& f);
InstancePair gen_sat_pair(int n_vars, Rng& rng);

// ---- TSP

inline constexpr double kTspScale = 1e4;

struct TspData {
  std::vector<std::pair<double, double>> points;
  DistanceMatrix dist;
  std::int64_t target = 0;
  std::int64_t optimal = 0;
};

// Points uniform in [0, sqrt(2)/2]^2, distances scaled and rounded. `optimal`
// is filled by Held-Karp within its limit and left at zero beyond it; `target`
// is left at zero.
TspData random_tsp_data(int n, Rng& rng);
TspData tsp_data_from_points(std::vector<std::pair<double, double>> points);
// floor(1.02 C*) and ceil(0.98 C*), the latter pulled below C* if rounding
// reaches it.
std::int64_t tsp_sat_target(std::int64_t optimal);
std::int64_t tsp_unsat_target(std::int64_t optimal);

Instance tsp_ext_model(const TspData& d);
Instance tsp_elem_model(const TspData& d);
InstancePair gen_tsp_pair(int n, bool element_model, Rng& rng);

// ---- Coloring

Instance coloring_model(const SimpleGraph& g, int k);

struct ColoringPair {
  SimpleGraph graph;  // k-colorable
  std::pair<int, int> edge;  // adding it raises the chromatic number above k
  int k = 0;
};

// Grows a random graph edge by edge until the first edge that raises the
// chromatic number from some k >= 3.
ColoringPair gen_coloring_graphs(int n, Rng& rng);
InstancePair gen_col_pair(int n, Rng& rng);

// ---- Knapsack

struct KnapsackData {
  std::vector<std::int64_t> weights;
  std::vector<std::int64_t> values;
  std::int64_t capacity = 0;
  std::int64_t optimal = 0;
};

KnapsackData random_knapsack_data(int n_items, Rng& rng);
std::int64_t knapsack_sat_target(std::int64_t optimal);
std::int64_t knapsack_unsat_target(std::int64_t optimal);
Instance knapsack_model(const KnapsackData& d, std::int64_t target);
InstancePair gen_knapsack_pair(int n_items, Rng& rng);

// ---- Datasets

struct ExampleMeta {
  std::string problem;
  int size = 0;
  std::uint64_t seed = 0;
  std::uint64_t pair = 0;
  std::string model;

  bool operator==(const ExampleMeta&) const = default;
};

struct LabeledExample {
  EncodedGraph graph;
  bool label = false;
  ExampleMeta meta;
};

struct LabeledInstance {
  Instance instance;
  bool label = false;
  ExampleMeta meta;
};

// Both members of pair `pair_index`, satisfiable first, using the stream
// derive_seed(seed, pair_index). Deterministic in its arguments.
std::pair<LabeledInstance, LabeledInstance> generate_pair(Problem problem, int size, std::uint64_t seed,
                                                          std::uint64_t pair_index);

LabeledExample encode_example(const LabeledInstance& li);

}  // namespace cpg
