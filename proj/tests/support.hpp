#pragma once

#include <algorithm>
#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "cpgraph/encoder.hpp"
#include "cpgraph/model.hpp"

namespace cpg::testing {

// x1 in 1..2, x2 in 2..3, 3*x1 <= 4*x2, table over (x1,x2) with (1,2)(2,3),
// maximize x1.
inline const char* const kRunningExample = R"(<instance format="XCSP3" type="COP">
  <variables>
    <var id="x1"> 1..2 </var>
    <var id="x2"> 2..3 </var>
  </variables>
  <constraints>
    <intension> le(mul(3,x1),mul(4,x2)) </intension>
    <extension>
      <list> x1 x2 </list>
      <supports> (1,2)(2,3) </supports>
    </extension>
  </constraints>
  <objectives>
    <maximize> x1 </maximize>
  </objectives>
</instance>
)";

inline Instance two_var_instance(std::vector<std::int64_t> d1, std::vector<std::int64_t> d2) {
  Instance inst;
  inst.vars.push_back({"x1", VarKind::integer, std::move(d1)});
  inst.vars.push_back({"x2", VarKind::integer, std::move(d2)});
  return inst;
}

inline Instance with_intension(Instance inst, Expr e) {
  inst.constraints.push_back({"", Intension{std::move(e)}});
  inst.assign_missing_ids();
  return inst;
}

// a*x1 <cmp> b*x2 over x1 in 1..2, x2 in 2..3.
inline Instance scaled_comparison(std::int64_t a, OpKind cmp, std::int64_t b) {
  return with_intension(two_var_instance({1, 2}, {2, 3}),
                        Expr::op(cmp, {Expr::op(OpKind::mul, {Expr::constant(a), Expr::var("x1")}),
                                       Expr::op(OpKind::mul, {Expr::constant(b), Expr::var("x2")})}));
}

// Exhaustive search over every type-preserving bijection; independent of the
// pruned search in canon.cpp. Only usable for a handful of vertices per type.
inline bool brute_force_isomorphic(const EncodedGraph& a, const EncodedGraph& b) {
  if (a.counts != b.counts || a.edges.size() != b.edges.size()) return false;
  const std::uint32_t n = a.num_vertices();
  std::vector<std::vector<bool>> adj_b(n, std::vector<bool>(n));
  for (const auto& [x, y] : b.edges) adj_b[x][y] = adj_b[y][x] = true;

  std::array<std::vector<VertexId>, kVertexTypeCount> blocks;
  for (int t = 0; t < kVertexTypeCount; ++t) {
    blocks[t].resize(a.counts[t]);
    std::iota(blocks[t].begin(), blocks[t].end(), a.offset(static_cast<VertexType>(t)));
  }
  auto try_map = [&]() {
    std::vector<VertexId> map(n);
    for (int t = 0; t < kVertexTypeCount; ++t)
      for (std::uint32_t i = 0; i < a.counts[t]; ++i) map[a.offset(static_cast<VertexType>(t)) + i] = blocks[t][i];
    for (VertexId v = 0; v < n; ++v) {
      auto fa = a.feature_row(v), fb = b.feature_row(map[v]);
      if (!std::equal(fa.begin(), fa.end(), fb.begin(), fb.end())) return false;
    }
    for (const auto& [x, y] : a.edges)
      if (!adj_b[map[x]][map[y]]) return false;
    return true;
  };
  auto rec = [&](auto&& self, int t) -> bool {
    if (t == kVertexTypeCount) return try_map();
    std::sort(blocks[t].begin(), blocks[t].end());
    do {
      if (self(self, t + 1)) return true;
    } while (std::next_permutation(blocks[t].begin(), blocks[t].end()));
    return false;
  };
  return rec(rec, 0);
}

}  // namespace cpg::testing
