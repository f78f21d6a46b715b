#pragma once

// Exact solvers used to label generated instances.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cpg {

class OracleLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Literals are signed 1-based variable indices.
struct CnfFormula {
  int num_vars = 0;
  std::vector<std::vector<int>> clauses;

  bool valid() const;
  bool operator==(const CnfFormula&) const = default;
};

inline constexpr int kDpllVarLimit = 40;
inline constexpr int kHeldKarpLimit = 12;
inline constexpr int kChromaticLimit = 18;

// DPLL with unit propagation, pure literals and most-occurrences branching.
// Returns a satisfying assignment (index 0 unused) or nullopt.
std::optional<std::vector<bool>> dpll_solve(const CnfFormula& f);
bool oracle_sat_dpll(const CnfFormula& f);

using DistanceMatrix = std::vector<std::vector<std::int64_t>>;

// Held-Karp dynamic program; optimal closed-tour cost.
std::int64_t oracle_tsp(const DistanceMatrix& dist);

struct SimpleGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
  bool operator==(const SimpleGraph&) const = default;
};

bool k_colorable(const SimpleGraph& g, int k);
// Smallest k with a proper k-coloring, by iterative deepening on k.
int oracle_chromatic(const SimpleGraph& g);

// Maximum total value with total weight <= capacity; DP over values.
std::int64_t oracle_knapsack(const std::vector<std::int64_t>& weights, const std::vector<std::int64_t>& values,
                             std::int64_t capacity);

}  // namespace cpg
