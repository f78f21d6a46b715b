#pragma once

// Heterogeneous graph encoding of a constraint problem instance.
//
// Five vertex types. One VAR vertex per variable edged to the VAL vertices
// of its domain; one VAL vertex per distinct constant (shared pool); one CST
// vertex per constraint; OPE vertices break constraint bodies into elementary
// operations; a single MOD vertex is edged to every CST vertex and to the
// variables of the objective.
//
// Feature layout (schema version 1):
//   VAL  [int, bool, real, reserved] ++ [v / (1 + |v|)]                  dim 5
//   VAR  [bool, int, set]                                                dim 3
//   CST  [lt, le, gt, ge, eq, ne, table+, table-, tableShort, element,
//         sum, allDifferent] ++ [none, lt, le, gt, ge, eq, ne]           dim 19
//        (second block carries the comparator of a sum, `none` otherwise)
//   OPE  [add, sub, mul, div, mod, neg, abs, dist, and, or, not, xor, lhs,
//         rhs, tuple, cell, coeff, indexer] ++ [k / (1 + |k|)] ++ [flag] dim 20
//        (k is the numeric operand, flag = 1 iff an operand is present)
//   MOD  [min, max, satisfy]                                             dim 3
//
// Vertex ids are dense and grouped by type in the order VAR, VAL, CST, OPE,
// MOD. VAL vertices are sorted by value; other types keep creation order.

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cpgraph/model.hpp"

namespace cpg {

enum class VertexType : std::uint8_t { var, val, cst, ope, mod };

inline constexpr int kVertexTypeCount = 5;
inline constexpr std::array<VertexType, kVertexTypeCount> kVertexTypes = {
    VertexType::var, VertexType::val, VertexType::cst, VertexType::ope, VertexType::mod};

inline constexpr std::uint32_t kFeatureSchemaVersion = 1;

std::string_view type_name(VertexType t);

enum class CstKind {
  lt, le, gt, ge, eq, ne, table_positive, table_negative, table_short, element, sum,
  all_different,
};

enum class OpeKind {
  add, sub, mul, div, mod, neg, abs, dist, and_, or_, not_, xor_, lhs, rhs, tuple, cell,
  coeff, indexer,
};

inline constexpr int kCstKindCount = 12;
inline constexpr int kOpeKindCount = 18;

std::string_view ope_kind_name(OpeKind k);

constexpr int feature_dim(VertexType t) {
  constexpr std::array<int, kVertexTypeCount> dims = {3, 5, 19, 20, 3};
  return dims[static_cast<int>(t)];
}

using VertexId = std::uint32_t;
using Edge = std::pair<VertexId, VertexId>;  // first < second

struct EncodedGraph {
  std::array<std::uint32_t, kVertexTypeCount> counts{};
  // Row-major, counts[t] x feature_dim(t) per type.
  std::array<std::vector<double>, kVertexTypeCount> features;
  std::vector<Edge> edges;  // sorted, unique, no self-loops
  std::vector<std::string> provenance;  // one entry per vertex id

  std::uint32_t num_vertices() const;
  std::uint32_t offset(VertexType t) const;
  VertexType type_of(VertexId v) const;
  std::uint32_t local_index(VertexId v) const { return v - offset(type_of(v)); }
  std::span<const double> feature_row(VertexId v) const;

  bool operator==(const EncodedGraph&) const = default;
};

struct GraphStats {
  std::array<std::uint32_t, kVertexTypeCount> counts{};
  std::size_t edges = 0;
  std::map<std::size_t, std::size_t> degree_histogram;  // degree -> #vertices

  std::uint32_t count(VertexType t) const { return counts[static_cast<int>(t)]; }
  std::uint32_t vertices() const;
};

// Throws std::invalid_argument if the instance does not validate.
EncodedGraph encode(const Instance& instance);

GraphStats graph_stats(const EncodedGraph& g);

// Structural invariants of an encoding: edge ordering, allowed type pairs,
// a single MOD vertex, one-hot well-formedness, VAR vertices with domain edges.
// Returns a list of human-readable problems; empty means well-formed.
std::vector<std::string> check_graph(const EncodedGraph& g);

// Relabels vertices with `perm` (perm[old] = new). The permutation must map
// each type block onto itself.
EncodedGraph permute_vertices(const EncodedGraph& g, std::span<const VertexId> perm);

// Uniformly random type-preserving permutation.
std::vector<VertexId> random_type_preserving_permutation(const EncodedGraph& g, std::mt19937_64& rng);

}  // namespace cpg
