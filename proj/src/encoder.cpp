#include "cpgraph/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace cpg {

namespace {

constexpr std::array<std::string_view, kVertexTypeCount> kTypeNames = {"VAR", "VAL", "CST", "OPE", "MOD"};

constexpr std::array<std::string_view, kOpeKindCount> kOpeNames = {
    "add", "sub", "mul", "div", "mod", "neg", "abs", "dist", "and",
    "or",  "not", "xor", "lhs", "rhs", "tuple", "cell", "coeff", "indexer"};

double squash(double v) { return v / (1.0 + std::abs(v)); }

OpeKind ope_of(OpKind k) {
  switch (k) {
    case OpKind::add: return OpeKind::add;
    case OpKind::sub: return OpeKind::sub;
    case OpKind::mul: return OpeKind::mul;
    case OpKind::div: return OpeKind::div;
    case OpKind::mod: return OpeKind::mod;
    case OpKind::neg: return OpeKind::neg;
    case OpKind::abs: return OpeKind::abs;
    case OpKind::dist: return OpeKind::dist;
    case OpKind::and_: return OpeKind::and_;
    case OpKind::or_: return OpeKind::or_;
    case OpKind::not_: return OpeKind::not_;
    case OpKind::xor_: return OpeKind::xor_;
    default: break;
  }
  throw std::invalid_argument("comparison operator below an intension root");
}

std::string operand_label(OpeKind kind, std::int64_t operand) {
  if (kind == OpeKind::mul) return "×" + std::to_string(operand);
  return std::string(kOpeNames[static_cast<int>(kind)]) + "[" + std::to_string(operand) + "]";
}

bool allowed_pair(VertexType a, VertexType b) {
  if (a > b) std::swap(a, b);
  using T = VertexType;
  static const std::set<std::pair<T, T>> allowed = {
      {T::var, T::val}, {T::var, T::cst}, {T::var, T::ope}, {T::var, T::mod}, {T::val, T::cst},
      {T::val, T::ope}, {T::cst, T::ope}, {T::cst, T::mod}, {T::ope, T::ope}};
  return allowed.count({a, b}) > 0;
}

class GraphBuilder {
 public:
  explicit GraphBuilder(const Instance& instance) : instance_(instance) {}

  EncodedGraph build() {
    for (const auto& v : instance_.vars) {
      std::vector<double> f(feature_dim(VertexType::var), 0.0);
      f[v.kind == VarKind::boolean ? 0 : 1] = 1.0;
      const int id = add(VertexType::var, std::move(f), "var:" + v.id);
      var_vertex_.emplace(v.id, id);
      for (auto value : v.domain) edge(id, value_vertex(value));
    }

    std::vector<double> mod_f(feature_dim(VertexType::mod), 0.0);
    mod_f[static_cast<int>(instance_.objective.direction)] = 1.0;
    const int mod = add(VertexType::mod, std::move(mod_f), "mod");

    for (const auto& c : instance_.constraints) {
      cid_ = c.id;
      const int cst = std::visit([this](const auto& body) { return lower(body); }, c.body);
      edge(mod, cst);
    }
    if (instance_.objective.expr)
      for (const auto& id : free_variables(*instance_.objective.expr)) edge(mod, var(id));
    return finish();
  }

 private:
  struct Proto {
    VertexType type;
    std::vector<double> features;
    std::string provenance;
    std::int64_t value = 0;  // VAL vertices only, used for ordering
  };

  int add(VertexType t, std::vector<double> f, std::string provenance, std::int64_t value = 0) {
    protos_.push_back({t, std::move(f), std::move(provenance), value});
    return static_cast<int>(protos_.size()) - 1;
  }

  void edge(int a, int b) {
    if (a == b) throw std::logic_error("self-loop in encoding");
    edges_.emplace(std::min(a, b), std::max(a, b));
  }

  int value_vertex(std::int64_t v) {
    if (auto it = val_vertex_.find(v); it != val_vertex_.end()) return it->second;
    std::vector<double> f(feature_dim(VertexType::val), 0.0);
    f[0] = 1.0;  // all values are integers
    f[4] = squash(static_cast<double>(v));
    const int id = add(VertexType::val, std::move(f), "val:" + std::to_string(v), v);
    val_vertex_.emplace(v, id);
    return id;
  }

  int var(const std::string& id) const {
    auto it = var_vertex_.find(id);
    if (it == var_vertex_.end()) throw std::invalid_argument("unresolved variable '" + id + "'");
    return it->second;
  }

  int cst(CstKind kind, std::optional<Comparator> sum_cmp = std::nullopt) {
    std::vector<double> f(feature_dim(VertexType::cst), 0.0);
    f[static_cast<int>(kind)] = 1.0;
    f[kCstKindCount + (sum_cmp ? 1 + static_cast<int>(*sum_cmp) : 0)] = 1.0;
    return add(VertexType::cst, std::move(f), "cst:" + cid_);
  }

  int ope(OpeKind kind, const std::string& path, std::optional<std::int64_t> operand = std::nullopt) {
    std::vector<double> f(feature_dim(VertexType::ope), 0.0);
    f[static_cast<int>(kind)] = 1.0;
    std::string label(kOpeNames[static_cast<int>(kind)]);
    if (operand) {
      f[kOpeKindCount] = squash(static_cast<double>(*operand));
      f[kOpeKindCount + 1] = 1.0;
      label = operand_label(kind, *operand);
    }
    return add(VertexType::ope, std::move(f), "ope:" + path + "/" + label);
  }

  // Provenance of an OPE vertex without its "ope:" prefix.
  std::string path(int v) const { return protos_[v].provenance.substr(4); }

  // Attaches an operand expression below `parent`.
  void attach(int parent, const Expr& e) {
    if (const auto* v = e.as_var()) edge(parent, var(v->id));
    else if (const auto* c = e.as_const()) edge(parent, value_vertex(c->value));
    else edge(parent, lower_op(*e.as_op(), path(parent)));
  }

  int lower_op(const Expr::Op& op, const std::string& parent_path) {
    const OpeKind kind = ope_of(op.kind);
    if (is_binary(op.kind) && !is_commutative(op.kind)) {
      // Operand order matters: wrap both sides.
      const int v = ope(kind, parent_path);
      const int l = ope(OpeKind::lhs, path(v));
      const int r = ope(OpeKind::rhs, path(v));
      edge(v, l);
      edge(v, r);
      attach(l, op.children[0]);
      attach(r, op.children[1]);
      return v;
    }

    // A single constant operand of a commutative operator becomes a feature
    // of the operator vertex (the ×3 of 3·x).
    constexpr std::size_t kNone = ~std::size_t{0};
    std::size_t absorbed = kNone;
    if (!is_unary(op.kind)) {
      std::size_t consts = 0;
      for (std::size_t k = 0; k < op.children.size(); ++k) {
        if (op.children[k].as_const() != nullptr) {
          ++consts;
          absorbed = k;
        }
      }
      if (consts != 1) absorbed = kNone;
    }
    const int v = absorbed != kNone ? ope(kind, parent_path, op.children[absorbed].as_const()->value)
                                    : ope(kind, parent_path);
    for (std::size_t k = 0; k < op.children.size(); ++k)
      if (k != absorbed) attach(v, op.children[k]);
    return v;
  }

  int lower(const Intension& c) {
    const auto* root = c.expr.as_op();
    if (root != nullptr && is_comparator(root->kind)) {
      const int k = cst(static_cast<CstKind>(static_cast<int>(root->kind) - static_cast<int>(OpKind::lt)));
      const int l = ope(OpeKind::lhs, cid_);
      const int r = ope(OpeKind::rhs, cid_);
      edge(k, l);
      edge(k, r);
      attach(l, root->children[0]);
      attach(r, root->children[1]);
      return k;
    }
    // Boolean-valued root: encoded as `expr == true` with a single side.
    const int k = cst(CstKind::eq);
    const int l = ope(OpeKind::lhs, cid_);
    edge(k, l);
    attach(l, c.expr);
    return k;
  }

  int lower(const Extension& c) {
    const CstKind kind = c.kind == TableKind::positive   ? CstKind::table_positive
                         : c.kind == TableKind::negative ? CstKind::table_negative
                                                         : CstKind::table_short;
    const int k = cst(kind);
    std::vector<int> scope;
    scope.reserve(c.scope.size());
    for (const auto& id : c.scope) scope.push_back(var(id));
    for (std::size_t t = 0; t < c.tuples.size(); ++t) {
      const std::string tuple_path = cid_ + "/t" + std::to_string(t + 1);
      std::vector<double> f(feature_dim(VertexType::ope), 0.0);
      f[static_cast<int>(OpeKind::tuple)] = 1.0;
      const int tv = add(VertexType::ope, std::move(f), "ope:" + tuple_path);
      edge(k, tv);
      for (std::size_t i = 0; i < c.tuples[t].size(); ++i) {
        const int cell = ope(OpeKind::cell, tuple_path);
        edge(tv, cell);
        edge(cell, scope[i]);
        if (c.tuples[t][i]) edge(cell, value_vertex(*c.tuples[t][i]));
      }
    }
    return k;
  }

  int lower(const Element& c) {
    const int k = cst(CstKind::element);
    int previous = k;
    for (std::size_t i = 0; i < c.list.size(); ++i) {
      const int idx = ope(OpeKind::indexer, cid_);
      edge(previous, idx);
      const int cell = ope(OpeKind::cell, path(idx));
      edge(idx, cell);
      attach(cell, c.list[i]);
      previous = idx;
    }
    const int l = ope(OpeKind::lhs, cid_);
    const int r = ope(OpeKind::rhs, cid_);
    edge(k, l);
    edge(k, r);
    attach(l, c.index);
    attach(r, c.value);
    return k;
  }

  int lower(const Sum& c) {
    const int k = cst(CstKind::sum, c.cmp);
    const int l = ope(OpeKind::lhs, cid_);
    edge(k, l);
    for (std::size_t i = 0; i < c.vars.size(); ++i) {
      const int term = ope(OpeKind::coeff, path(l), c.coeffs[i]);
      edge(l, term);
      edge(term, var(c.vars[i]));
    }
    const int r = ope(OpeKind::rhs, cid_);
    edge(k, r);
    attach(r, c.rhs);
    return k;
  }

  int lower(const AllDifferent& c) {
    const int k = cst(CstKind::all_different);
    for (const auto& id : c.scope) edge(k, var(id));
    return k;
  }

  EncodedGraph finish() {
    std::vector<int> order(protos_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const auto& pa = protos_[a];
      const auto& pb = protos_[b];
      if (pa.type != pb.type) return pa.type < pb.type;
      if (pa.type == VertexType::val) return pa.value < pb.value;
      return false;
    });
    std::vector<VertexId> new_id(protos_.size());
    for (std::size_t k = 0; k < order.size(); ++k) new_id[order[k]] = static_cast<VertexId>(k);

    EncodedGraph g;
    g.provenance.reserve(protos_.size());
    for (int old : order) {
      auto& p = protos_[old];
      const int t = static_cast<int>(p.type);
      ++g.counts[t];
      g.features[t].insert(g.features[t].end(), p.features.begin(), p.features.end());
      g.provenance.push_back(std::move(p.provenance));
    }
    g.edges.reserve(edges_.size());
    for (const auto& [a, b] : edges_) {
      const VertexId x = new_id[a], y = new_id[b];
      g.edges.emplace_back(std::min(x, y), std::max(x, y));
    }
    std::sort(g.edges.begin(), g.edges.end());
    return g;
  }

  const Instance& instance_;
  std::string cid_;
  std::vector<Proto> protos_;
  std::set<std::pair<int, int>> edges_;
  std::unordered_map<std::string, int> var_vertex_;
  std::map<std::int64_t, int> val_vertex_;
};

}  // namespace

std::string_view type_name(VertexType t) { return kTypeNames[static_cast<int>(t)]; }

std::string_view ope_kind_name(OpeKind k) { return kOpeNames[static_cast<int>(k)]; }

std::uint32_t EncodedGraph::num_vertices() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint32_t{0});
}

std::uint32_t EncodedGraph::offset(VertexType t) const {
  std::uint32_t off = 0;
  for (int k = 0; k < static_cast<int>(t); ++k) off += counts[k];
  return off;
}

VertexType EncodedGraph::type_of(VertexId v) const {
  std::uint32_t end = 0;
  for (int k = 0; k < kVertexTypeCount; ++k) {
    end += counts[k];
    if (v < end) return static_cast<VertexType>(k);
  }
  throw std::out_of_range("vertex id out of range");
}

std::span<const double> EncodedGraph::feature_row(VertexId v) const {
  const VertexType t = type_of(v);
  const int dim = feature_dim(t);
  const auto& f = features[static_cast<int>(t)];
  return std::span<const double>(f).subspan(static_cast<std::size_t>(v - offset(t)) * dim, dim);
}

std::uint32_t GraphStats::vertices() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint32_t{0});
}

EncodedGraph encode(const Instance& instance) {
  const auto report = validate(instance);
  if (!report.ok()) throw std::invalid_argument("cannot encode an invalid instance:\n" + report.summary());
  return GraphBuilder(instance).build();
}

GraphStats graph_stats(const EncodedGraph& g) {
  GraphStats s;
  s.counts = g.counts;
  s.edges = g.edges.size();
  std::vector<std::size_t> degree(g.num_vertices(), 0);
  for (const auto& [a, b] : g.edges) {
    ++degree[a];
    ++degree[b];
  }
  for (auto d : degree) ++s.degree_histogram[d];
  return s;
}

std::vector<std::string> check_graph(const EncodedGraph& g) {
  std::vector<std::string> problems;
  const std::uint32_t n = g.num_vertices();
  if (g.provenance.size() != n) problems.push_back("provenance size mismatch");
  for (int t = 0; t < kVertexTypeCount; ++t)
    if (g.features[t].size() != static_cast<std::size_t>(g.counts[t]) * feature_dim(kVertexTypes[t]))
      problems.push_back("feature matrix size mismatch for " + std::string(kTypeNames[t]));
  if (!problems.empty()) return problems;
  if (g.counts[static_cast<int>(VertexType::mod)] != 1) problems.push_back("expected exactly one MOD vertex");

  std::vector<bool> var_has_value(g.counts[0], false);
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto [a, b] = g.edges[k];
    if (a >= b || b >= n) {
      problems.push_back("malformed edge " + std::to_string(a) + "-" + std::to_string(b));
      continue;
    }
    if (k > 0 && g.edges[k - 1] >= g.edges[k]) problems.push_back("edges not sorted or duplicated");
    const VertexType ta = g.type_of(a), tb = g.type_of(b);
    if (!allowed_pair(ta, tb))
      problems.push_back("edge between " + std::string(type_name(ta)) + " and " + std::string(type_name(tb)));
    if (ta == VertexType::var && tb == VertexType::val) var_has_value[a] = true;
  }
  for (std::uint32_t v = 0; v < g.counts[0]; ++v)
    if (!var_has_value[v]) problems.push_back("variable vertex " + std::to_string(v) + " has no domain edge");

  // One-hot blocks: (type, begin, length).
  struct Block {
    VertexType type;
    int begin;
    int length;
  };
  const std::array<Block, 6> blocks = {{{VertexType::var, 0, 3},
                                        {VertexType::val, 0, 4},
                                        {VertexType::cst, 0, kCstKindCount},
                                        {VertexType::cst, kCstKindCount, 7},
                                        {VertexType::ope, 0, kOpeKindCount},
                                        {VertexType::mod, 0, 3}}};
  for (const auto& block : blocks) {
    const int t = static_cast<int>(block.type);
    const int dim = feature_dim(block.type);
    for (std::uint32_t r = 0; r < g.counts[t]; ++r) {
      double sum = 0.0;
      for (int k = 0; k < block.length; ++k) {
        const double x = g.features[t][r * dim + block.begin + k];
        if (x != 0.0 && x != 1.0) problems.push_back("non-binary one-hot entry");
        sum += x;
      }
      if (sum != 1.0)
        problems.push_back("one-hot block of " + std::string(kTypeNames[t]) + " row " + std::to_string(r) +
                           " sums to " + std::to_string(sum));
    }
  }
  const int ope = static_cast<int>(VertexType::ope);
  for (std::uint32_t r = 0; r < g.counts[ope]; ++r) {
    const double value = g.features[ope][r * 20 + kOpeKindCount];
    const double flag = g.features[ope][r * 20 + kOpeKindCount + 1];
    if (flag != 0.0 && flag != 1.0) problems.push_back("operand flag not binary");
    if (flag == 0.0 && value != 0.0) problems.push_back("operand value without flag");
  }
  return problems;
}

EncodedGraph permute_vertices(const EncodedGraph& g, std::span<const VertexId> perm) {
  const std::uint32_t n = g.num_vertices();
  if (perm.size() != n) throw std::invalid_argument("permutation size mismatch");
  EncodedGraph out;
  out.counts = g.counts;
  out.provenance.resize(n);
  for (int t = 0; t < kVertexTypeCount; ++t) out.features[t].resize(g.features[t].size());
  for (VertexId v = 0; v < n; ++v) {
    const VertexId w = perm[v];
    const VertexType t = g.type_of(v);
    if (w >= n || g.type_of(w) != t) throw std::invalid_argument("permutation does not preserve vertex types");
    const int dim = feature_dim(t);
    const auto src = g.feature_row(v);
    std::copy(src.begin(), src.end(),
              out.features[static_cast<int>(t)].begin() + static_cast<std::ptrdiff_t>(w - g.offset(t)) * dim);
    out.provenance[w] = g.provenance[v];
  }
  out.edges.reserve(g.edges.size());
  for (const auto& [a, b] : g.edges) out.edges.emplace_back(std::min(perm[a], perm[b]), std::max(perm[a], perm[b]));
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

std::vector<VertexId> random_type_preserving_permutation(const EncodedGraph& g, std::mt19937_64& rng) {
  std::vector<VertexId> perm(g.num_vertices());
  std::iota(perm.begin(), perm.end(), VertexId{0});
  VertexId begin = 0;
  for (int t = 0; t < kVertexTypeCount; ++t) {
    std::shuffle(perm.begin() + begin, perm.begin() + begin + g.counts[t], rng);
    begin += g.counts[t];
  }
  return perm;
}

}  // namespace cpg
