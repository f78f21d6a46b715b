#include "cpgraph/model.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>
#include <unordered_set>

namespace cpg {

namespace {

constexpr std::array<std::string_view, kOpKindCount> kOpNames = {
    "add", "sub", "mul", "div", "mod", "neg", "abs", "dist", "lt",
    "le",  "gt",  "ge",  "eq",  "ne",  "and", "or",  "not", "xor",
};

constexpr std::array<std::string_view, 6> kComparatorNames = {
    "lt", "le", "gt", "ge", "eq", "ne"};

void collect_vars(const Expr& e, std::vector<std::string>& out,
                  std::unordered_set<std::string>& seen) {
  if (const auto* v = e.as_var()) {
    if (seen.insert(v->id).second) out.push_back(v->id);
  } else if (const auto* op = e.as_op()) {
    for (const auto& child : op->children) collect_vars(child, out, seen);
  }
}

class Validator {
 public:
  explicit Validator(const Instance& instance) : instance_(instance) {}

  ValidationReport run() {
    if (instance_.vars.empty()) add("vars", "instance declares no variables");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < instance_.vars.size(); ++i)
      check_var(instance_.vars[i], "vars[" + std::to_string(i) + "]", ids);

    std::set<std::string> cids;
    for (std::size_t i = 0; i < instance_.constraints.size(); ++i) {
      const auto& c = instance_.constraints[i];
      const std::string path = "constraints[" + std::to_string(i) + "]";
      if (c.id.empty())
        add(path + ".id", "constraint id is empty");
      else if (!cids.insert(c.id).second)
        add(path + ".id", "duplicate constraint id '" + c.id + "'");
      std::visit([&](const auto& body) { check(body, path); }, c.body);
    }

    const auto& obj = instance_.objective;
    if ((obj.direction == Direction::satisfy) != !obj.expr.has_value())
      add("objective", "objective expression must be present iff direction is not satisfy");
    if (obj.expr) check_expr(*obj.expr, "objective.expr", false);
    return std::move(report_);
  }

 private:
  void add(std::string path, std::string message) {
    report_.violations.push_back({std::move(path), std::move(message)});
  }

  void check_var(const VarDecl& v, const std::string& path, std::set<std::string>& ids) {
    if (v.id.empty()) add(path + ".id", "variable id is empty");
    if (!ids.insert(v.id).second) add(path + ".id", "duplicate variable id '" + v.id + "'");
    if (v.domain.empty()) add(path + ".domain", "domain is empty");
    for (std::size_t k = 1; k < v.domain.size(); ++k) {
      if (v.domain[k] <= v.domain[k - 1]) {
        add(path + ".domain", "domain values not strictly increasing");
        break;
      }
    }
    if (v.kind == VarKind::boolean) {
      for (auto value : v.domain) {
        if (value != 0 && value != 1) {
          add(path + ".domain", "boolean variable with a value outside {0,1}");
          break;
        }
      }
    }
  }

  void check_ref(const std::string& id, const std::string& path) {
    if (instance_.find_var(id) == nullptr) add(path, "unresolved variable '" + id + "'");
  }

  void check_expr(const Expr& e, const std::string& path, bool root_of_intension) {
    if (const auto* v = e.as_var()) {
      check_ref(v->id, path);
      return;
    }
    const auto* op = e.as_op();
    if (op == nullptr) return;
    if (is_comparator(op->kind) && !root_of_intension)
      add(path, "comparison operator '" + std::string(op_name(op->kind)) +
                    "' below the root of an expression");
    const std::size_t n = op->children.size();
    if (is_unary(op->kind) && n != 1)
      add(path, std::string(op_name(op->kind)) + " expects 1 operand, got " + std::to_string(n));
    else if (is_binary(op->kind) && n != 2)
      add(path, std::string(op_name(op->kind)) + " expects 2 operands, got " + std::to_string(n));
    else if (!is_unary(op->kind) && !is_binary(op->kind) && n < 2)
      add(path, std::string(op_name(op->kind)) + " expects at least 2 operands, got " +
                    std::to_string(n));
    for (std::size_t k = 0; k < n; ++k)
      check_expr(op->children[k], path + ".children[" + std::to_string(k) + "]", false);
  }

  void check(const Intension& c, const std::string& path) {
    const auto& e = c.expr;
    if (e.as_const() != nullptr) {
      add(path + ".expr", "intension root is a constant");
      return;
    }
    if (const auto* op = e.as_op(); op != nullptr && !is_comparator(op->kind) && !is_logical(op->kind))
      add(path + ".expr", "intension root '" + std::string(op_name(op->kind)) + "' is not boolean");
    check_expr(e, path + ".expr", true);
  }

  void check(const Extension& c, const std::string& path) {
    if (c.scope.empty()) add(path + ".scope", "empty scope");
    for (std::size_t k = 0; k < c.scope.size(); ++k)
      check_ref(c.scope[k], path + ".scope[" + std::to_string(k) + "]");
    bool any_wildcard = false;
    for (std::size_t t = 0; t < c.tuples.size(); ++t) {
      const auto& tuple = c.tuples[t];
      const std::string tpath = path + ".tuples[" + std::to_string(t) + "]";
      if (tuple.size() != c.scope.size())
        add(tpath, "tuple arity " + std::to_string(tuple.size()) + " does not match scope size " +
                       std::to_string(c.scope.size()));
      const bool wildcard = std::any_of(tuple.begin(), tuple.end(),
                                        [](const TupleCell& cell) { return !cell.has_value(); });
      any_wildcard = any_wildcard || wildcard;
      if (wildcard && c.kind != TableKind::short_positive)
        add(tpath, "wildcard in a table that is not a short table");
    }
    if (c.kind == TableKind::short_positive && !any_wildcard)
      add(path, "short table without any wildcard");
  }

  void check(const Element& c, const std::string& path) {
    if (c.list.empty()) add(path + ".list", "empty list");
    for (std::size_t k = 0; k < c.list.size(); ++k) {
      const std::string lpath = path + ".list[" + std::to_string(k) + "]";
      if (c.list[k].as_op() != nullptr)
        add(lpath, "element list entries must be variables or constants");
      else
        check_expr(c.list[k], lpath, false);
    }
    check_expr(c.index, path + ".index", false);
    check_expr(c.value, path + ".value", false);
  }

  void check(const Sum& c, const std::string& path) {
    if (c.coeffs.size() != c.vars.size())
      add(path, "sum has " + std::to_string(c.coeffs.size()) + " coefficients for " +
                    std::to_string(c.vars.size()) + " variables");
    if (c.vars.empty()) add(path + ".vars", "empty sum");
    for (std::size_t k = 0; k < c.vars.size(); ++k)
      check_ref(c.vars[k], path + ".vars[" + std::to_string(k) + "]");
    if (c.rhs.as_op() != nullptr)
      add(path + ".rhs", "sum right-hand side must be a variable or a constant");
    else
      check_expr(c.rhs, path + ".rhs", false);
  }

  void check(const AllDifferent& c, const std::string& path) {
    if (c.scope.size() < 2) add(path + ".scope", "allDifferent needs at least 2 variables");
    for (std::size_t k = 0; k < c.scope.size(); ++k)
      check_ref(c.scope[k], path + ".scope[" + std::to_string(k) + "]");
  }

  const Instance& instance_;
  ValidationReport report_;
};

}  // namespace

std::string_view op_name(OpKind kind) { return kOpNames[static_cast<int>(kind)]; }

std::optional<OpKind> op_from_name(std::string_view name) {
  for (int k = 0; k < kOpKindCount; ++k)
    if (kOpNames[k] == name) return static_cast<OpKind>(k);
  return std::nullopt;
}

bool is_comparator(OpKind kind) {
  switch (kind) {
    case OpKind::lt: case OpKind::le: case OpKind::gt:
    case OpKind::ge: case OpKind::eq: case OpKind::ne:
      return true;
    default:
      return false;
  }
}

bool is_logical(OpKind kind) {
  return kind == OpKind::and_ || kind == OpKind::or_ || kind == OpKind::not_ ||
         kind == OpKind::xor_;
}

bool is_commutative(OpKind kind) {
  switch (kind) {
    case OpKind::add: case OpKind::mul: case OpKind::dist: case OpKind::and_:
    case OpKind::or_: case OpKind::xor_: case OpKind::eq: case OpKind::ne:
      return true;
    default:
      return false;
  }
}

bool is_unary(OpKind kind) {
  return kind == OpKind::neg || kind == OpKind::abs || kind == OpKind::not_;
}

bool is_binary(OpKind kind) {
  return is_comparator(kind) || kind == OpKind::sub || kind == OpKind::div ||
         kind == OpKind::mod || kind == OpKind::dist;
}

std::string to_string(const Expr& e) {
  if (const auto* c = e.as_const()) return std::to_string(c->value);
  if (const auto* v = e.as_var()) return v->id;
  const auto& op = *e.as_op();
  std::string out(op_name(op.kind));
  out += '(';
  for (std::size_t k = 0; k < op.children.size(); ++k) {
    if (k > 0) out += ',';
    out += to_string(op.children[k]);
  }
  out += ')';
  return out;
}

std::vector<std::string> free_variables(const Expr& e) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  collect_vars(e, out, seen);
  return out;
}

std::string_view comparator_name(Comparator c) { return kComparatorNames[static_cast<int>(c)]; }

std::optional<Comparator> comparator_from_name(std::string_view name) {
  for (int k = 0; k < 6; ++k)
    if (kComparatorNames[k] == name) return static_cast<Comparator>(k);
  return std::nullopt;
}

OpKind to_op(Comparator c) {
  return static_cast<OpKind>(static_cast<int>(OpKind::lt) + static_cast<int>(c));
}

ConstraintKind Constraint::kind() const {
  struct {
    ConstraintKind operator()(const Intension&) const { return ConstraintKind::intension; }
    ConstraintKind operator()(const Extension& e) const {
      switch (e.kind) {
        case TableKind::positive: return ConstraintKind::table_positive;
        case TableKind::negative: return ConstraintKind::table_negative;
        case TableKind::short_positive: return ConstraintKind::table_short;
      }
      return ConstraintKind::table_positive;
    }
    ConstraintKind operator()(const Element&) const { return ConstraintKind::element; }
    ConstraintKind operator()(const Sum&) const { return ConstraintKind::sum; }
    ConstraintKind operator()(const AllDifferent&) const { return ConstraintKind::all_different; }
  } visitor;
  return std::visit(visitor, body);
}

const VarDecl* Instance::find_var(std::string_view id) const {
  for (const auto& v : vars)
    if (v.id == id) return &v;
  return nullptr;
}

void Instance::assign_missing_ids() {
  for (std::size_t i = 0; i < constraints.size(); ++i)
    if (constraints[i].id.empty()) constraints[i].id = "c" + std::to_string(i);
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (const auto& v : violations) out << v.path << ": " << v.message << '\n';
  return out.str();
}

ValidationReport validate(const Instance& instance) { return Validator(instance).run(); }

}  // namespace cpg
