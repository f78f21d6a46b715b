#include "cpgraph/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace cpg {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(master) ^ (index * 0xD1B54A32D192ED03ull + 1));
}

std::string_view problem_name(Problem p) {
  switch (p) {
    case Problem::sat: return "sat";
    case Problem::tsp_ext: return "tsp-ext";
    case Problem::tsp_elem: return "tsp-elem";
    case Problem::col: return "col";
    case Problem::knap: return "knap";
  }
  return "?";
}

std::optional<Problem> problem_from_name(std::string_view name) {
  for (auto p : {Problem::sat, Problem::tsp_ext, Problem::tsp_elem, Problem::col, Problem::knap})
    if (problem_name(p) == name) return p;
  return std::nullopt;
}

// ---- SAT

std::vector<int> random_clause(int n_vars, Rng& rng, const ClauseLength& len) {
  if (n_vars < 1) throw std::invalid_argument("random_clause needs at least one variable");
  std::bernoulli_distribution extra(len.bernoulli);
  std::geometric_distribution<int> tail(len.geometric);  // failures before success
  const int k = std::min(n_vars, len.base + static_cast<int>(extra(rng)) + tail(rng) + 1);

  std::vector<int> vars(n_vars);
  std::iota(vars.begin(), vars.end(), 1);
  // Partial Fisher-Yates for k distinct variables.
  std::vector<int> clause;
  std::bernoulli_distribution sign(0.5);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n_vars - 1);
    std::swap(vars[i], vars[pick(rng)]);
    clause.push_back(sign(rng) ? vars[i] : -vars[i]);
  }
  return clause;
}

namespace {

bool satisfied_by(const std::vector<int>& clause, const std::vector<bool>& model) {
  for (int lit : clause)
    if (model[std::abs(lit)] == (lit > 0)) return true;
  return false;
}

}  // namespace

CnfPair gen_sat_formulas(int n_vars, Rng& rng) {
  if (n_vars < 3 || n_vars > kDpllVarLimit)
    throw std::invalid_argument("SAT generator supports 3.." + std::to_string(kDpllVarLimit) + " variables");
  CnfFormula f;
  f.num_vars = n_vars;
  std::vector<bool> model(n_vars + 1, false);
  for (;;) {
    f.clauses.push_back(random_clause(n_vars, rng));
    // The previous model usually survives the new clause; only re-solve when
    // it does not.
    if (satisfied_by(f.clauses.back(), model)) continue;
    auto solved = dpll_solve(f);
    if (!solved) break;
    model = std::move(*solved);
  }
  CnfPair pair{f, f};
  pair.sat.clauses.back().front() = -pair.sat.clauses.back().front();
  return pair;
}

Instance sat_model(const CnfFormula& f) {
  if (!f.valid()) throw std::invalid_argument("malformed CNF formula");
  Instance inst;
  for (int v = 1; v <= f.num_vars; ++v) inst.vars.push_back({"x" + std::to_string(v), VarKind::boolean, {0, 1}});
  auto literal = [](int lit) {
    Expr x = Expr::var("x" + std::to_string(std::abs(lit)));
    return lit > 0 ? x : Expr::op(OpKind::not_, {std::move(x)});
  };
  for (const auto& clause : f.clauses) {
    Constraint c;
    if (clause.size() == 1) {
      c.body = Intension{literal(clause[0])};
    } else {
      std::vector<Expr> lits;
      for (int lit : clause) lits.push_back(literal(lit));
      c.body = Intension{Expr::op(OpKind::or_, std::move(lits))};
    }
    inst.constraints.push_back(std::move(c));
  }
  inst.assign_missing_ids();
  inst.metadata = "sat";
  return inst;
}

InstancePair gen_sat_pair(int n_vars, Rng& rng) {
  auto formulas = gen_sat_formulas(n_vars, rng);
  return {sat_model(formulas.sat), sat_model(formulas.unsat)};
}

// ---- TSP

TspData tsp_data_from_points(std::vector<std::pair<double, double>> points) {
  const int n = static_cast<int>(points.size());
  TspData d;
  d.dist.assign(n, std::vector<std::int64_t>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j)
        d.dist[i][j] = std::llround(
            kTspScale * std::hypot(points[i].first - points[j].first, points[i].second - points[j].second));
  d.points = std::move(points);
  if (n <= kHeldKarpLimit) d.optimal = oracle_tsp(d.dist);
  return d;
}

TspData random_tsp_data(int n, Rng& rng) {
  if (n < 4) throw std::invalid_argument("TSP generator needs at least 4 cities");
  std::uniform_real_distribution<double> coord(0.0, std::sqrt(2.0) / 2.0);
  std::vector<std::pair<double, double>> points;
  for (int i = 0; i < n; ++i) {
    const double x = coord(rng);
    points.emplace_back(x, coord(rng));
  }
  return tsp_data_from_points(std::move(points));
}

std::int64_t tsp_sat_target(std::int64_t optimal) {
  return std::max(optimal, static_cast<std::int64_t>(std::floor(1.02 * static_cast<double>(optimal))));
}

std::int64_t tsp_unsat_target(std::int64_t optimal) {
  return std::min(optimal - 1, static_cast<std::int64_t>(std::ceil(0.98 * static_cast<double>(optimal))));
}

namespace {

std::string route(int j) { return "r" + std::to_string(j); }
std::string leg(int j) { return "d" + std::to_string(j); }

// Variables, allDifferent, route[0] = 0 and the leg-sum bound; `legs` inserts
// the per-leg constraints before the sum.
template <class Legs>
Instance tsp_skeleton(const TspData& d, Legs legs) {
  const int n = static_cast<int>(d.dist.size());
  std::set<std::int64_t> lengths;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      if (i != k) lengths.insert(d.dist[i][k]);
  std::vector<std::int64_t> cities(n);
  std::iota(cities.begin(), cities.end(), 0);

  Instance inst;
  for (int j = 0; j < n; ++j) inst.vars.push_back({route(j), VarKind::integer, cities});
  for (int j = 0; j < n; ++j)
    inst.vars.push_back({leg(j), VarKind::integer, {lengths.begin(), lengths.end()}});

  AllDifferent all;
  for (int j = 0; j < n; ++j) all.scope.push_back(route(j));
  inst.constraints.push_back({"", all});
  inst.constraints.push_back({"", Intension{Expr::op(OpKind::eq, {Expr::var(route(0)), Expr::constant(0)})}});
  for (int j = 0; j < n; ++j) inst.constraints.push_back({"", legs(j, (j + 1) % n)});

  Sum total;
  for (int j = 0; j < n; ++j) {
    total.coeffs.push_back(1);
    total.vars.push_back(leg(j));
  }
  total.cmp = Comparator::le;
  total.rhs = Expr::constant(d.target);
  inst.constraints.push_back({"", total});
  inst.assign_missing_ids();
  return inst;
}

}  // namespace

Instance tsp_ext_model(const TspData& d) {
  const int n = static_cast<int>(d.dist.size());
  Instance inst = tsp_skeleton(d, [&](int j, int next) {
    Extension table;
    table.scope = {route(j), route(next), leg(j)};
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        if (i != k) table.tuples.push_back({i, k, d.dist[i][k]});
    return table;
  });
  inst.metadata = "tsp-ext";
  return inst;
}

Instance tsp_elem_model(const TspData& d) {
  const int n = static_cast<int>(d.dist.size());
  std::vector<Expr> flat;
  for (const auto& row : d.dist)
    for (auto x : row) flat.push_back(Expr::constant(x));
  Instance inst = tsp_skeleton(d, [&](int j, int next) {
    Element el;
    el.list = flat;
    el.index = Expr::op(OpKind::add, {Expr::op(OpKind::mul, {Expr::constant(n), Expr::var(route(j))}),
                                      Expr::var(route(next))});
    el.value = Expr::var(leg(j));
    return el;
  });
  inst.metadata = "tsp-elem";
  return inst;
}

InstancePair gen_tsp_pair(int n, bool element_model, Rng& rng) {
  if (n > kHeldKarpLimit)
    throw OracleLimitError("TSP labels need Held-Karp, limited to " + std::to_string(kHeldKarpLimit) + " cities");
  TspData d = random_tsp_data(n, rng);
  auto build = element_model ? tsp_elem_model : tsp_ext_model;
  d.target = tsp_sat_target(d.optimal);
  Instance sat = build(d);
  d.target = tsp_unsat_target(d.optimal);
  return {std::move(sat), build(d)};
}

// ---- Coloring

Instance coloring_model(const SimpleGraph& g, int k) {
  if (k < 1) throw std::invalid_argument("coloring needs at least one color");
  std::vector<std::int64_t> colors(k);
  std::iota(colors.begin(), colors.end(), 0);
  Instance inst;
  for (int v = 0; v < g.n; ++v) inst.vars.push_back({"v" + std::to_string(v), VarKind::integer, colors});
  for (const auto& [a, b] : g.edges)
    inst.constraints.push_back(
        {"", Intension{Expr::op(OpKind::ne, {Expr::var("v" + std::to_string(a)), Expr::var("v" + std::to_string(b))})}});
  inst.assign_missing_ids();
  inst.metadata = "col";
  return inst;
}

ColoringPair gen_coloring_graphs(int n, Rng& rng) {
  if (n < 4 || n > kChromaticLimit)
    throw std::invalid_argument("coloring generator supports 4.." + std::to_string(kChromaticLimit) + " vertices");
  std::vector<std::pair<int, int>> all;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) all.emplace_back(a, b);
  std::shuffle(all.begin(), all.end(), rng);

  SimpleGraph g{n, {}};
  int chi = 1;
  for (const auto& e : all) {
    SimpleGraph next = g;
    next.edges.push_back(e);
    if (!k_colorable(next, chi)) {
      if (chi >= 3) return {g, e, chi};
      ++chi;  // one edge raises the chromatic number by at most one
    }
    g = std::move(next);
  }
  // The complete graph on n >= 4 vertices passes a 3 -> 4 transition.
  throw std::logic_error("no chromatic transition found");
}

InstancePair gen_col_pair(int n, Rng& rng) {
  auto pair = gen_coloring_graphs(n, rng);
  SimpleGraph denser = pair.graph;
  denser.edges.push_back(pair.edge);
  return {coloring_model(pair.graph, pair.k), coloring_model(denser, pair.k)};
}

// ---- Knapsack

KnapsackData random_knapsack_data(int n_items, Rng& rng) {
  if (n_items < 3) throw std::invalid_argument("knapsack generator needs at least 3 items");
  std::uniform_int_distribution<std::int64_t> unit(1, 100);
  for (;;) {
    KnapsackData d;
    for (int i = 0; i < n_items; ++i) {
      d.weights.push_back(unit(rng));
      d.values.push_back(unit(rng));
    }
    d.capacity = std::accumulate(d.weights.begin(), d.weights.end(), std::int64_t{0}) / 2;
    d.optimal = oracle_knapsack(d.weights, d.values, d.capacity);
    if (d.optimal > 0) return d;
  }
}

std::int64_t knapsack_sat_target(std::int64_t optimal) {
  return std::min(optimal, static_cast<std::int64_t>(std::ceil(0.98 * static_cast<double>(optimal))));
}

std::int64_t knapsack_unsat_target(std::int64_t optimal) {
  return std::max(optimal + 1, static_cast<std::int64_t>(std::floor(1.02 * static_cast<double>(optimal))));
}

Instance knapsack_model(const KnapsackData& d, std::int64_t target) {
  Instance inst;
  Sum weight, value;
  for (std::size_t i = 0; i < d.weights.size(); ++i) {
    const std::string id = "x" + std::to_string(i);
    inst.vars.push_back({id, VarKind::boolean, {0, 1}});
    weight.vars.push_back(id);
    weight.coeffs.push_back(d.weights[i]);
    value.vars.push_back(id);
    value.coeffs.push_back(d.values[i]);
  }
  weight.cmp = Comparator::le;
  weight.rhs = Expr::constant(d.capacity);
  value.cmp = Comparator::ge;
  value.rhs = Expr::constant(target);
  inst.constraints.push_back({"", weight});
  inst.constraints.push_back({"", value});
  inst.assign_missing_ids();
  inst.metadata = "knap";
  return inst;
}

InstancePair gen_knapsack_pair(int n_items, Rng& rng) {
  const KnapsackData d = random_knapsack_data(n_items, rng);
  return {knapsack_model(d, knapsack_sat_target(d.optimal)), knapsack_model(d, knapsack_unsat_target(d.optimal))};
}

// ---- Datasets

std::pair<LabeledInstance, LabeledInstance> generate_pair(Problem problem, int size, std::uint64_t seed,
                                                          std::uint64_t pair_index) {
  Rng rng(derive_seed(seed, pair_index));
  InstancePair pair;
  std::string model;
  switch (problem) {
    case Problem::sat: pair = gen_sat_pair(size, rng), model = "clauses"; break;
    case Problem::tsp_ext: pair = gen_tsp_pair(size, false, rng), model = "table"; break;
    case Problem::tsp_elem: pair = gen_tsp_pair(size, true, rng), model = "element"; break;
    case Problem::col: pair = gen_col_pair(size, rng), model = "ne"; break;
    case Problem::knap: pair = gen_knapsack_pair(size, rng), model = "sum"; break;
  }
  const ExampleMeta meta{std::string(problem_name(problem)), size, seed, pair_index, model};
  return {LabeledInstance{std::move(pair.sat), true, meta}, LabeledInstance{std::move(pair.unsat), false, meta}};
}

}  // namespace cpg

namespace cpg {

LabeledExample encode_example(const LabeledInstance& li) { return {encode(li.instance), li.label, li.meta}; }

}  // namespace cpg
