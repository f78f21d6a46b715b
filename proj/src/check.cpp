#include "cpgraph/check.hpp"

#include <algorithm>
#include <cstdlib>

#include "cpgraph/oracles.hpp"

namespace cpg {

namespace {

std::optional<std::int64_t> compare(OpKind k, std::int64_t a, std::int64_t b) {
  switch (k) {
    case OpKind::lt: return a < b;
    case OpKind::le: return a <= b;
    case OpKind::gt: return a > b;
    case OpKind::ge: return a >= b;
    case OpKind::eq: return a == b;
    case OpKind::ne: return a != b;
    default: return std::nullopt;
  }
}

std::vector<std::string> scope_of(const Constraint& c) {
  std::vector<std::string> scope;
  auto add = [&](const std::vector<std::string>& ids) {
    for (const auto& id : ids)
      if (std::find(scope.begin(), scope.end(), id) == scope.end()) scope.push_back(id);
  };
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, Intension>) {
          add(free_variables(body.expr));
        } else if constexpr (std::is_same_v<T, Extension> || std::is_same_v<T, AllDifferent>) {
          add(body.scope);
        } else if constexpr (std::is_same_v<T, Element>) {
          for (const auto& e : body.list) add(free_variables(e));
          add(free_variables(body.index));
          add(free_variables(body.value));
        } else {
          add(body.vars);
          add(free_variables(body.rhs));
        }
      },
      c.body);
  return scope;
}

}  // namespace

std::optional<std::int64_t> evaluate(const Expr& e, const Assignment& a) {
  if (const auto* c = e.as_const()) return c->value;
  if (const auto* v = e.as_var()) return a.at(v->id);
  const auto& op = *e.as_op();
  std::vector<std::int64_t> x;
  for (const auto& child : op.children) {
    auto r = evaluate(child, a);
    if (!r) return std::nullopt;
    x.push_back(*r);
  }
  switch (op.kind) {
    case OpKind::add: {
      std::int64_t s = 0;
      for (auto v : x) s += v;
      return s;
    }
    case OpKind::mul: {
      std::int64_t s = 1;
      for (auto v : x) s *= v;
      return s;
    }
    case OpKind::sub: return x[0] - x[1];
    case OpKind::div:
      if (x[1] == 0) return std::nullopt;
      return x[0] / x[1];
    case OpKind::mod:
      if (x[1] == 0) return std::nullopt;
      return x[0] % x[1];
    case OpKind::neg: return -x[0];
    case OpKind::abs: return std::llabs(x[0]);
    case OpKind::dist: return std::llabs(x[0] - x[1]);
    case OpKind::and_: return std::all_of(x.begin(), x.end(), [](auto v) { return v != 0; });
    case OpKind::or_: return std::any_of(x.begin(), x.end(), [](auto v) { return v != 0; });
    case OpKind::xor_: return std::count_if(x.begin(), x.end(), [](auto v) { return v != 0; }) % 2;
    case OpKind::not_: return x[0] == 0;
    default: return compare(op.kind, x[0], x[1]);
  }
}

bool satisfies(const Constraint& c, const Assignment& a) {
  return std::visit(
      [&](const auto& body) -> bool {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, Intension>) {
          auto r = evaluate(body.expr, a);
          return r && *r != 0;
        } else if constexpr (std::is_same_v<T, Extension>) {
          bool found = false;
          for (const auto& t : body.tuples) {
            bool match = true;
            for (std::size_t i = 0; i < t.size() && match; ++i)
              match = !t[i] || *t[i] == a.at(body.scope[i]);
            if (match) {
              found = true;
              break;
            }
          }
          return body.kind == TableKind::negative ? !found : found;
        } else if constexpr (std::is_same_v<T, Element>) {
          auto idx = evaluate(body.index, a);
          auto val = evaluate(body.value, a);
          if (!idx || !val || *idx < 0 || *idx >= static_cast<std::int64_t>(body.list.size())) return false;
          auto entry = evaluate(body.list[*idx], a);
          return entry && *entry == *val;
        } else if constexpr (std::is_same_v<T, Sum>) {
          std::int64_t s = 0;
          for (std::size_t i = 0; i < body.vars.size(); ++i) s += body.coeffs[i] * a.at(body.vars[i]);
          auto rhs = evaluate(body.rhs, a);
          return rhs && *compare(to_op(body.cmp), s, *rhs) != 0;
        } else {
          for (std::size_t i = 0; i < body.scope.size(); ++i)
            for (std::size_t j = i + 1; j < body.scope.size(); ++j)
              if (a.at(body.scope[i]) == a.at(body.scope[j])) return false;
          return true;
        }
      },
      c.body);
}

std::optional<Assignment> brute_force_solve(const Instance& instance, std::uint64_t node_limit) {
  const std::size_t n = instance.vars.size();
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < n; ++i) position[instance.vars[i].id] = i;

  // ready[i]: constraints whose last scope variable is vars[i].
  std::vector<std::vector<const Constraint*>> ready(n);
  for (const auto& c : instance.constraints) {
    std::size_t last = 0;
    for (const auto& id : scope_of(c)) last = std::max(last, position.at(id));
    ready[last].push_back(&c);
  }

  Assignment a;
  std::uint64_t nodes = 0;
  auto search = [&](auto&& self, std::size_t depth) -> bool {
    if (depth == n) return true;
    const auto& var = instance.vars[depth];
    for (auto value : var.domain) {
      if (++nodes > node_limit) throw OracleLimitError("brute-force search exceeded its node limit");
      a[var.id] = value;
      bool ok = true;
      for (const auto* c : ready[depth])
        if (!satisfies(*c, a)) {
          ok = false;
          break;
        }
      if (ok && self(self, depth + 1)) return true;
    }
    a.erase(var.id);
    return false;
  };
  if (!search(search, 0)) return std::nullopt;
  return a;
}

}  // namespace cpg
