#include "cpgraph/oracles.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>

namespace cpg {

bool CnfFormula::valid() const {
  if (num_vars < 0) return false;
  for (const auto& c : clauses) {
    if (c.empty()) return false;
    for (int lit : c)
      if (lit == 0 || std::abs(lit) > num_vars) return false;
  }
  return true;
}

namespace {

class Dpll {
 public:
  explicit Dpll(const CnfFormula& f) : f_(f), value_(f.num_vars + 1, 0) {}

  bool solve() { return search(); }

  std::vector<bool> model() const {
    std::vector<bool> m(value_.size(), false);
    for (std::size_t v = 1; v < value_.size(); ++v) m[v] = value_[v] > 0;
    return m;
  }

 private:
  int lit_value(int lit) const {
    const int v = value_[std::abs(lit)];
    return lit > 0 ? v : -v;
  }

  void assign(int lit) {
    value_[std::abs(lit)] = lit > 0 ? 1 : -1;
    trail_.push_back(std::abs(lit));
  }

  void undo(std::size_t mark) {
    while (trail_.size() > mark) {
      value_[trail_.back()] = 0;
      trail_.pop_back();
    }
  }

  // Unit propagation and pure-literal elimination to a fixpoint. Returns false
  // on a falsified clause.
  bool simplify() {
    for (;;) {
      bool changed = false;
      std::vector<int> polarity(value_.size(), 0);  // bit 1: positive seen, bit 2: negative seen
      for (const auto& clause : f_.clauses) {
        int unassigned = 0, last = 0;
        bool satisfied = false;
        for (int lit : clause) {
          const int v = lit_value(lit);
          if (v > 0) {
            satisfied = true;
            break;
          }
          if (v == 0) {
            ++unassigned;
            last = lit;
          }
        }
        if (satisfied) continue;
        if (unassigned == 0) return false;
        if (unassigned == 1) {
          assign(last);
          changed = true;
          continue;
        }
        for (int lit : clause)
          if (lit_value(lit) == 0) polarity[std::abs(lit)] |= lit > 0 ? 1 : 2;
      }
      if (!changed) {
        for (std::size_t v = 1; v < value_.size(); ++v) {
          if (value_[v] == 0 && (polarity[v] == 1 || polarity[v] == 2)) {
            assign(polarity[v] == 1 ? static_cast<int>(v) : -static_cast<int>(v));
            changed = true;
          }
        }
      }
      if (!changed) return true;
    }
  }

  int pick_branch_literal() const {
    std::vector<int> count(2 * value_.size(), 0);
    for (const auto& clause : f_.clauses) {
      bool satisfied = false;
      for (int lit : clause)
        if (lit_value(lit) > 0) satisfied = true;
      if (satisfied) continue;
      for (int lit : clause)
        if (lit_value(lit) == 0) ++count[2 * std::abs(lit) + (lit < 0 ? 1 : 0)];
    }
    int best = 0, best_count = -1;
    for (std::size_t v = 1; v < value_.size(); ++v) {
      if (value_[v] != 0) continue;
      const int total = count[2 * v] + count[2 * v + 1];
      if (total > best_count) {
        best_count = total;
        best = count[2 * v] >= count[2 * v + 1] ? static_cast<int>(v) : -static_cast<int>(v);
      }
    }
    return best;
  }

  bool search() {
    const std::size_t mark = trail_.size();
    if (!simplify()) {
      undo(mark);
      return false;
    }
    const int lit = pick_branch_literal();
    if (lit == 0) return true;
    for (int choice : {lit, -lit}) {
      const std::size_t branch_mark = trail_.size();
      assign(choice);
      if (search()) return true;
      undo(branch_mark);
    }
    undo(mark);
    return false;
  }

  const CnfFormula& f_;
  std::vector<int> value_;
  std::vector<int> trail_;
};

}  // namespace

std::optional<std::vector<bool>> dpll_solve(const CnfFormula& f) {
  if (!f.valid()) throw std::invalid_argument("malformed CNF formula");
  if (f.num_vars > kDpllVarLimit)
    throw OracleLimitError("DPLL oracle limited to " + std::to_string(kDpllVarLimit) + " variables");
  Dpll solver(f);
  if (!solver.solve()) return std::nullopt;
  return solver.model();
}

bool oracle_sat_dpll(const CnfFormula& f) { return dpll_solve(f).has_value(); }

std::int64_t oracle_tsp(const DistanceMatrix& dist) {
  const int n = static_cast<int>(dist.size());
  if (n < 2) throw std::invalid_argument("TSP needs at least 2 cities");
  if (n > kHeldKarpLimit)
    throw OracleLimitError("Held-Karp oracle limited to " + std::to_string(kHeldKarpLimit) + " cities");
  for (const auto& row : dist)
    if (static_cast<int>(row.size()) != n) throw std::invalid_argument("distance matrix is not square");

  // best[S][j]: cheapest path from city 0 through set S (over cities 1..n-1)
  // ending at j, with j in S.
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  const int m = n - 1;
  const std::size_t subsets = std::size_t{1} << m;
  std::vector<std::int64_t> best(subsets * m, kInf);
  for (int j = 0; j < m; ++j) best[(std::size_t{1} << j) * m + j] = dist[0][j + 1];
  for (std::size_t s = 1; s < subsets; ++s) {
    for (int j = 0; j < m; ++j) {
      if (!(s & (std::size_t{1} << j))) continue;
      const std::int64_t here = best[s * m + j];
      if (here >= kInf) continue;
      for (int k = 0; k < m; ++k) {
        if (s & (std::size_t{1} << k)) continue;
        const std::size_t t = s | (std::size_t{1} << k);
        best[t * m + k] = std::min(best[t * m + k], here + dist[j + 1][k + 1]);
      }
    }
  }
  std::int64_t tour = kInf;
  for (int j = 0; j < m; ++j) tour = std::min(tour, best[(subsets - 1) * m + j] + dist[j + 1][0]);
  return tour;
}

bool k_colorable(const SimpleGraph& g, int k) {
  if (g.n == 0) return true;
  if (k <= 0) return false;
  std::vector<std::vector<int>> adj(g.n);
  for (const auto& [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  // Highest degree first.
  std::vector<int> order(g.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return adj[a].size() > adj[b].size(); });
  std::vector<int> color(g.n, -1);
  auto search = [&](auto&& self, int depth, int used) -> bool {
    if (depth == g.n) return true;
    const int v = order[depth];
    // Colors beyond the first unused one are symmetric.
    for (int c = 0; c < std::min(k, used + 1); ++c) {
      bool ok = true;
      for (int u : adj[v])
        if (color[u] == c) {
          ok = false;
          break;
        }
      if (!ok) continue;
      color[v] = c;
      if (self(self, depth + 1, std::max(used, c + 1))) return true;
      color[v] = -1;
    }
    return false;
  };
  return search(search, 0, 0);
}

int oracle_chromatic(const SimpleGraph& g) {
  if (g.n > kChromaticLimit)
    throw OracleLimitError("chromatic oracle limited to " + std::to_string(kChromaticLimit) + " vertices");
  if (g.n == 0) return 0;
  for (int k = 1;; ++k)
    if (k_colorable(g, k)) return k;
}

std::int64_t oracle_knapsack(const std::vector<std::int64_t>& weights, const std::vector<std::int64_t>& values,
                             std::int64_t capacity) {
  if (weights.size() != values.size()) throw std::invalid_argument("weights/values size mismatch");
  std::int64_t total = 0;
  for (auto v : values) {
    if (v < 0) throw std::invalid_argument("negative item value");
    total += v;
  }
  for (auto w : weights)
    if (w < 0) throw std::invalid_argument("negative item weight");
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  // lightest[v]: minimum weight reaching total value exactly v.
  std::vector<std::int64_t> lightest(static_cast<std::size_t>(total) + 1, kInf);
  lightest[0] = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::int64_t v = total; v >= values[i]; --v)
      if (lightest[v - values[i]] < kInf) lightest[v] = std::min(lightest[v], lightest[v - values[i]] + weights[i]);
  for (std::int64_t v = total; v >= 0; --v)
    if (lightest[v] <= capacity) return v;
  return 0;
}

}  // namespace cpg
