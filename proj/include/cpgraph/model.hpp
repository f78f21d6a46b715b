#pragma once

// In-memory representation of a constraint problem instance: variables with
// finite integer domains, constraints (intension trees and global constraints)
// and an optional objective.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cpg {

enum class VarKind { boolean, integer };

struct VarDecl {
  std::string id;
  VarKind kind = VarKind::integer;
  std::vector<std::int64_t> domain;  // strictly increasing

  bool operator==(const VarDecl&) const = default;
};

enum class OpKind {
  add, sub, mul, div, mod, neg, abs, dist,
  lt, le, gt, ge, eq, ne,
  and_, or_, not_, xor_,
};

inline constexpr int kOpKindCount = 18;

std::string_view op_name(OpKind kind);
std::optional<OpKind> op_from_name(std::string_view name);
bool is_comparator(OpKind kind);
bool is_logical(OpKind kind);
bool is_commutative(OpKind kind);
bool is_unary(OpKind kind);
// sub, div, mod, dist and the comparators take exactly two operands.
bool is_binary(OpKind kind);

struct Expr {
  struct Const {
    std::int64_t value = 0;
    bool operator==(const Const&) const = default;
  };
  struct VarRef {
    std::string id;
    bool operator==(const VarRef&) const = default;
  };
  struct Op {
    OpKind kind = OpKind::add;
    std::vector<Expr> children;
    bool operator==(const Op&) const = default;
  };

  std::variant<Const, VarRef, Op> node;

  Expr() : node(Const{}) {}
  Expr(Const c) : node(std::move(c)) {}
  Expr(VarRef v) : node(std::move(v)) {}
  Expr(Op o) : node(std::move(o)) {}

  static Expr constant(std::int64_t v) { return Expr(Const{v}); }
  static Expr var(std::string id) { return Expr(VarRef{std::move(id)}); }
  static Expr op(OpKind kind, std::vector<Expr> children) {
    return Expr(Op{kind, std::move(children)});
  }

  const Const* as_const() const { return std::get_if<Const>(&node); }
  const VarRef* as_var() const { return std::get_if<VarRef>(&node); }
  const Op* as_op() const { return std::get_if<Op>(&node); }

  bool operator==(const Expr&) const = default;
};

// Functional notation, e.g. le(mul(3,x1),mul(4,x2)).
std::string to_string(const Expr& e);

// Variable ids in first-occurrence order, without duplicates.
std::vector<std::string> free_variables(const Expr& e);

enum class Comparator { lt, le, gt, ge, eq, ne };

std::string_view comparator_name(Comparator c);
std::optional<Comparator> comparator_from_name(std::string_view name);
OpKind to_op(Comparator c);

struct Intension {
  Expr expr;
  bool operator==(const Intension&) const = default;
};

enum class TableKind { positive, negative, short_positive };

// nullopt marks a `*` wildcard; only allowed in short tables.
using TupleCell = std::optional<std::int64_t>;
using Tuple = std::vector<TupleCell>;

struct Extension {
  TableKind kind = TableKind::positive;
  std::vector<std::string> scope;
  std::vector<Tuple> tuples;
  bool operator==(const Extension&) const = default;
};

// list[index] == value, zero-based.
struct Element {
  std::vector<Expr> list;  // VarRef or Const entries
  Expr index;
  Expr value;
  bool operator==(const Element&) const = default;
};

// sum(coeffs[i] * vars[i]) <cmp> rhs
struct Sum {
  std::vector<std::int64_t> coeffs;
  std::vector<std::string> vars;
  Comparator cmp = Comparator::le;
  Expr rhs;
  bool operator==(const Sum&) const = default;
};

struct AllDifferent {
  std::vector<std::string> scope;
  bool operator==(const AllDifferent&) const = default;
};

enum class ConstraintKind {
  intension, table_positive, table_negative, table_short, element, sum,
  all_different,
};

struct Constraint {
  std::string id;
  std::variant<Intension, Extension, Element, Sum, AllDifferent> body{Intension{}};

  ConstraintKind kind() const;
  bool operator==(const Constraint&) const = default;
};

enum class Direction { minimize, maximize, satisfy };

struct Objective {
  Direction direction = Direction::satisfy;
  std::optional<Expr> expr;  // present iff direction != satisfy
  bool operator==(const Objective&) const = default;
};

struct Instance {
  std::vector<VarDecl> vars;
  std::vector<Constraint> constraints;
  Objective objective;
  std::string metadata;  // provenance tag, not part of structural equality

  const VarDecl* find_var(std::string_view id) const;

  // Assigns c0, c1, ... to constraints without an id.
  void assign_missing_ids();

  bool operator==(const Instance& other) const {
    return vars == other.vars && constraints == other.constraints &&
           objective == other.objective;
  }
};

struct Violation {
  std::string path;  // e.g. constraints[1].tuples[0]
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate(const Instance& instance);

}  // namespace cpg
