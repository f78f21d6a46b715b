#include "cpgraph/xcsp3.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>
#include <unordered_set>

namespace cpg {

namespace {

constexpr std::size_t kMaxDomainSize = 1'000'000;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '[' || c == ']' ||
         c == '.';
}

[[noreturn]] void syntax_error(const std::string& message, std::size_t begin, std::size_t end) {
  throw ParseError(ParseError::Kind::syntax, message, SourceSpan{begin, std::max(begin, end)});
}

std::optional<std::int64_t> to_int(std::string_view token) {
  std::int64_t value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
  return value;
}

// Recursive-descent parser for the functional expression syntax. Offsets in
// errors are relative to `base`.
class ExprParser {
 public:
  ExprParser(std::string_view s, std::size_t base) : s_(s), base_(base) {}

  Expr parse_all() {
    skip_space();
    if (pos_ == s_.size()) syntax_error("empty expression", base_, base_);
    Expr e = expr();
    skip_space();
    if (pos_ != s_.size())
      syntax_error("unexpected '" + std::string(1, s_[pos_]) + "' after expression", at(pos_), at(pos_ + 1));
    return e;
  }

 private:
  std::size_t at(std::size_t p) const { return base_ + std::min(p, s_.size()); }

  void skip_space() {
    while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
  }

  Expr expr() {
    skip_space();
    if (pos_ == s_.size()) syntax_error("unexpected end of expression", at(pos_), at(pos_));
    const std::size_t start = pos_;
    const char c = s_[pos_];
    if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c))) {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const auto value = to_int(s_.substr(start, pos_ - start));
      if (!value) syntax_error("malformed integer", at(start), at(pos_));
      return Expr::constant(*value);
    }
    if (!is_ident_start(c)) syntax_error("unexpected '" + std::string(1, c) + "'", at(start), at(start + 1));
    while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
    const std::string name(s_.substr(start, pos_ - start));
    skip_space();
    if (pos_ == s_.size() || s_[pos_] != '(') return Expr::var(name);

    const auto kind = op_from_name(name);
    if (!kind)
      throw ParseError(ParseError::Kind::unknown_operator, "unknown operator '" + name + "'",
                       SourceSpan{at(start), at(start + name.size())});
    ++pos_;
    std::vector<Expr> children;
    for (;;) {
      children.push_back(expr());
      skip_space();
      if (pos_ == s_.size()) syntax_error("unterminated call to '" + name + "'", at(start), at(pos_));
      if (s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (s_[pos_] == ')') {
        ++pos_;
        break;
      }
      syntax_error("expected ',' or ')'", at(pos_), at(pos_ + 1));
    }
    return Expr::op(*kind, std::move(children));
  }

  std::string_view s_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

struct Token {
  std::string_view text;
  std::size_t offset;  // document offset
};

class InstanceReader {
 public:
  explicit InstanceReader(std::string_view doc) : doc_(doc) {}

  Instance read() {
    xml::Element root;
    try {
      root = xml::parse(doc_);
    } catch (const xml::SyntaxError& e) {
      throw ParseError(ParseError::Kind::syntax, e.what(), e.span());
    }
    if (root.name != "instance") unsupported(root);

    bool optimization = false;
    const auto* type = root.attribute("type");
    if (type != nullptr) {
      if (type->value == "COP") optimization = true;
      else if (type->value != "CSP")
        throw ParseError(ParseError::Kind::unsupported, "unsupported instance type '" + type->value + "'",
                         type->span, "instance");
    }
    if (const auto* format = root.attribute("format"); format != nullptr && format->value != "XCSP3")
      throw ParseError(ParseError::Kind::unsupported, "unsupported format '" + format->value + "'",
                       format->span, "instance");

    for (const auto& section : root.children) {
      if (section.name == "variables") {
        for (const auto& v : section.children) read_var(v);
      } else if (section.name == "constraints") {
        for (const auto& c : section.children) read_constraint(c);
      } else if (section.name == "objectives") {
        read_objectives(section);
      } else {
        unsupported(section);
      }
    }

    if (type != nullptr && optimization && instance_.objective.direction == Direction::satisfy)
      throw ParseError(ParseError::Kind::invalid_instance, "COP instance without an objective", root.span);
    if (type != nullptr && !optimization && instance_.objective.direction != Direction::satisfy)
      throw ParseError(ParseError::Kind::invalid_instance, "CSP instance with an objective", root.span);

    instance_.assign_missing_ids();
    instance_.metadata = "xcsp3";
    const auto report = validate(instance_);
    if (!report.ok())
      throw ParseError(ParseError::Kind::invalid_instance, "invalid instance:\n" + report.summary(), root.span);
    return std::move(instance_);
  }

 private:
  [[noreturn]] static void unsupported(const xml::Element& e) {
    throw ParseError(ParseError::Kind::unsupported, "unsupported element <" + e.name + ">", e.span, e.name);
  }

  static std::vector<Token> tokens(const xml::Element& e) {
    std::vector<Token> out;
    const std::string_view text = e.text;
    std::size_t k = 0;
    while (k < text.size()) {
      while (k < text.size() && is_space(text[k])) ++k;
      const std::size_t start = k;
      while (k < text.size() && !is_space(text[k])) ++k;
      if (k > start) out.push_back({text.substr(start, k - start), e.text_offset + start});
    }
    return out;
  }

  void no_children(const xml::Element& e) const {
    if (!e.children.empty()) unsupported(e.children.front());
  }

  const xml::Element& required_child(const xml::Element& e, std::string_view name) const {
    const auto* c = e.child(name);
    if (c == nullptr)
      syntax_error("<" + e.name + "> lacks a <" + std::string(name) + "> child", e.span.begin, e.span.end);
    return *c;
  }

  static std::int64_t int_token(const Token& t) {
    const auto value = to_int(t.text);
    if (!value) syntax_error("expected an integer, got '" + std::string(t.text) + "'", t.offset, t.offset + t.text.size());
    return *value;
  }

  void read_var(const xml::Element& e) {
    if (e.name != "var") unsupported(e);
    no_children(e);
    const auto* id = e.attribute("id");
    if (id == nullptr || id->value.empty()) syntax_error("<var> without id", e.span.begin, e.span.end);
    if (instance_.find_var(id->value) != nullptr)
      throw ParseError(ParseError::Kind::invalid_instance, "duplicate variable '" + id->value + "'", id->span);
    bool explicit_integer = false;
    if (const auto* type = e.attribute("type")) {
      if (type->value != "integer")
        throw ParseError(ParseError::Kind::unsupported, "unsupported variable type '" + type->value + "'",
                         type->span, "var");
      explicit_integer = true;
    }

    std::vector<std::int64_t> domain;
    for (const auto& t : tokens(e)) {
      const auto dots = t.text.find("..");
      if (dots == std::string_view::npos) {
        domain.push_back(int_token(t));
        continue;
      }
      const auto lo = to_int(t.text.substr(0, dots));
      const auto hi = to_int(t.text.substr(dots + 2));
      if (!lo || !hi || *lo > *hi)
        syntax_error("malformed range '" + std::string(t.text) + "'", t.offset, t.offset + t.text.size());
      if (static_cast<std::uint64_t>(*hi - *lo) >= kMaxDomainSize)
        syntax_error("domain range too large", t.offset, t.offset + t.text.size());
      for (auto v = *lo; v <= *hi; ++v) domain.push_back(v);
    }
    std::sort(domain.begin(), domain.end());
    domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
    if (domain.empty()) syntax_error("empty domain for '" + id->value + "'", e.span.begin, e.span.end);

    VarDecl v;
    v.id = id->value;
    v.domain = std::move(domain);
    const bool zero_one = v.domain == std::vector<std::int64_t>{0, 1};
    v.kind = zero_one && !explicit_integer ? VarKind::boolean : VarKind::integer;
    instance_.vars.push_back(std::move(v));
  }

  Expr expr_of(const xml::Element& e) const {
    no_children(e);
    return ExprParser(e.text, e.text_offset).parse_all();
  }

  void check_refs(const std::vector<std::string>& ids, const xml::Element& e) const {
    for (const auto& id : ids)
      if (instance_.find_var(id) == nullptr)
        throw ParseError(ParseError::Kind::unresolved_variable, "unresolved variable '" + id + "'", e.span);
  }

  std::vector<std::string> var_list(const xml::Element& e) const {
    no_children(e);
    std::vector<std::string> ids;
    for (const auto& t : tokens(e)) {
      if (to_int(t.text)) syntax_error("expected a variable, got '" + std::string(t.text) + "'", t.offset, t.offset + t.text.size());
      ids.emplace_back(t.text);
    }
    check_refs(ids, e);
    return ids;
  }

  void read_constraint(const xml::Element& e) {
    Constraint c;
    if (const auto* id = e.attribute("id")) c.id = id->value;
    for (const auto& a : e.attributes)
      if (a.name != "id")
        throw ParseError(ParseError::Kind::unsupported, "unsupported attribute '" + a.name + "'", a.span, e.name);

    if (e.name == "intension") {
      const xml::Element& body = e.children.empty() ? e : required_child(e, "function");
      if (&body != &e && e.children.size() != 1) unsupported(e.children.back());
      Intension in{expr_of(body)};
      check_refs(free_variables(in.expr), e);
      c.body = std::move(in);
    } else if (e.name == "extension") {
      c.body = read_extension(e);
    } else if (e.name == "element") {
      c.body = read_element(e);
    } else if (e.name == "sum") {
      c.body = read_sum(e);
    } else if (e.name == "allDifferent") {
      const xml::Element& list = e.children.empty() ? e : required_child(e, "list");
      if (&list != &e && e.children.size() != 1) unsupported(e.children.back());
      c.body = AllDifferent{var_list(list)};
    } else {
      unsupported(e);
    }
    instance_.constraints.push_back(std::move(c));
  }

  Extension read_extension(const xml::Element& e) const {
    Extension ext;
    const xml::Element* table = nullptr;
    for (const auto& child : e.children) {
      if (child.name == "list") {
        ext.scope = var_list(child);
      } else if (child.name == "supports" || child.name == "conflicts") {
        if (table != nullptr) unsupported(child);
        table = &child;
      } else {
        unsupported(child);
      }
    }
    if (ext.scope.empty()) syntax_error("<extension> without <list>", e.span.begin, e.span.end);
    if (table == nullptr) syntax_error("<extension> without <supports> or <conflicts>", e.span.begin, e.span.end);
    no_children(*table);
    ext.kind = table->name == "supports" ? TableKind::positive : TableKind::negative;

    if (ext.scope.size() == 1) {
      for (const auto& t : tokens(*table)) {
        const auto dots = t.text.find("..");
        if (dots == std::string_view::npos) {
          ext.tuples.push_back({int_token(t)});
          continue;
        }
        const auto lo = to_int(t.text.substr(0, dots));
        const auto hi = to_int(t.text.substr(dots + 2));
        if (!lo || !hi || *lo > *hi || static_cast<std::uint64_t>(*hi - *lo) >= kMaxDomainSize)
          syntax_error("malformed range '" + std::string(t.text) + "'", t.offset, t.offset + t.text.size());
        for (auto v = *lo; v <= *hi; ++v) ext.tuples.push_back({v});
      }
    } else {
      ext.tuples = read_tuples(*table);
    }

    bool wildcard = false;
    for (const auto& tuple : ext.tuples)
      for (const auto& cell : tuple) wildcard = wildcard || !cell.has_value();
    if (wildcard) {
      if (ext.kind == TableKind::negative)
        throw ParseError(ParseError::Kind::unsupported, "short tables in <conflicts> are not supported",
                         table->span, "conflicts");
      ext.kind = TableKind::short_positive;
    }
    return ext;
  }

  static std::vector<Tuple> read_tuples(const xml::Element& table) {
    std::vector<Tuple> tuples;
    const std::string_view s = table.text;
    const std::size_t base = table.text_offset;
    std::size_t k = 0;
    auto skip = [&] {
      while (k < s.size() && is_space(s[k])) ++k;
    };
    for (;;) {
      skip();
      if (k == s.size()) break;
      if (s[k] != '(') syntax_error("expected '(' to open a tuple", base + k, base + k + 1);
      ++k;
      Tuple tuple;
      for (;;) {
        skip();
        const std::size_t start = k;
        while (k < s.size() && s[k] != ',' && s[k] != ')' && !is_space(s[k])) ++k;
        const auto cell = s.substr(start, k - start);
        if (cell == "*") {
          tuple.push_back(std::nullopt);
        } else {
          const auto value = to_int(cell);
          if (!value) syntax_error("malformed tuple value '" + std::string(cell) + "'", base + start, base + k);
          tuple.push_back(*value);
        }
        skip();
        if (k == s.size()) syntax_error("unterminated tuple", base + start, base + k);
        if (s[k] == ',') {
          ++k;
          continue;
        }
        if (s[k] == ')') {
          ++k;
          break;
        }
        syntax_error("expected ',' or ')' in tuple", base + k, base + k + 1);
      }
      tuples.push_back(std::move(tuple));
    }
    return tuples;
  }

  Element read_element(const xml::Element& e) const {
    Element el;
    bool has_list = false, has_index = false, has_value = false;
    for (const auto& child : e.children) {
      if (child.name == "list") {
        if (const auto* start = child.attribute("startIndex"); start != nullptr && start->value != "0")
          throw ParseError(ParseError::Kind::unsupported, "non-zero startIndex", start->span, "element");
        no_children(child);
        for (const auto& t : tokens(child)) {
          if (const auto value = to_int(t.text)) {
            el.list.push_back(Expr::constant(*value));
          } else {
            el.list.push_back(Expr::var(std::string(t.text)));
          }
        }
        std::vector<std::string> ids;
        for (const auto& entry : el.list)
          if (const auto* v = entry.as_var()) ids.push_back(v->id);
        check_refs(ids, child);
        has_list = true;
      } else if (child.name == "index") {
        el.index = expr_of(child);
        check_refs(free_variables(el.index), child);
        has_index = true;
      } else if (child.name == "value") {
        el.value = expr_of(child);
        check_refs(free_variables(el.value), child);
        has_value = true;
      } else {
        unsupported(child);
      }
    }
    if (!has_list || !has_index || !has_value)
      syntax_error("<element> needs <list>, <index> and <value>", e.span.begin, e.span.end);
    return el;
  }

  std::pair<Comparator, Expr> read_condition(const xml::Element& cond) const {
    no_children(cond);
    std::string_view s = cond.text;
    std::size_t b = 0, en = s.size();
    while (b < en && is_space(s[b])) ++b;
    while (en > b && is_space(s[en - 1])) --en;
    const std::size_t base = cond.text_offset;
    if (en - b < 2 || s[b] != '(' || s[en - 1] != ')')
      syntax_error("condition must look like (le,7)", base + b, base + en);
    const auto inner = s.substr(b + 1, en - b - 2);
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos) syntax_error("condition lacks ','", base + b, base + en);
    auto trim = [](std::string_view v) {
      while (!v.empty() && is_space(v.front())) v.remove_prefix(1);
      while (!v.empty() && is_space(v.back())) v.remove_suffix(1);
      return v;
    };
    const auto op = trim(inner.substr(0, comma));
    const auto cmp = comparator_from_name(op);
    if (!cmp)
      throw ParseError(ParseError::Kind::unsupported, "unsupported condition operator '" + std::string(op) + "'",
                       cond.span, "condition");
    const auto rhs_text = inner.substr(comma + 1);
    Expr rhs = ExprParser(rhs_text, base + b + 1 + comma + 1).parse_all();
    if (rhs.as_op() != nullptr)
      throw ParseError(ParseError::Kind::unsupported, "condition operand must be a variable or a constant",
                       cond.span, "condition");
    check_refs(free_variables(rhs), cond);
    return {*cmp, std::move(rhs)};
  }

  Sum read_sum(const xml::Element& e) const {
    Sum sum;
    bool has_coeffs = false, has_condition = false;
    for (const auto& child : e.children) {
      if (child.name == "list") {
        sum.vars = var_list(child);
      } else if (child.name == "coeffs") {
        no_children(child);
        for (const auto& t : tokens(child)) sum.coeffs.push_back(int_token(t));
        has_coeffs = true;
      } else if (child.name == "condition") {
        std::tie(sum.cmp, sum.rhs) = read_condition(child);
        has_condition = true;
      } else {
        unsupported(child);
      }
    }
    if (!has_condition) syntax_error("<sum> without <condition>", e.span.begin, e.span.end);
    if (!has_coeffs) sum.coeffs.assign(sum.vars.size(), 1);
    return sum;
  }

  void read_objectives(const xml::Element& section) {
    for (const auto& o : section.children) {
      if (o.name != "minimize" && o.name != "maximize") unsupported(o);
      if (instance_.objective.direction != Direction::satisfy)
        throw ParseError(ParseError::Kind::unsupported, "multiple objectives", o.span, o.name);
      Expr expr;
      const auto* type = o.attribute("type");
      if (type == nullptr || type->value == "expression") {
        expr = expr_of(o);
      } else if (type->value == "sum") {
        std::vector<std::string> vars;
        std::vector<std::int64_t> coeffs;
        for (const auto& child : o.children) {
          if (child.name == "list") vars = var_list(child);
          else if (child.name == "coeffs") {
            no_children(child);
            for (const auto& t : tokens(child)) coeffs.push_back(int_token(t));
          } else unsupported(child);
        }
        if (coeffs.empty()) coeffs.assign(vars.size(), 1);
        if (vars.empty() || coeffs.size() != vars.size())
          syntax_error("malformed sum objective", o.span.begin, o.span.end);
        std::vector<Expr> terms;
        for (std::size_t k = 0; k < vars.size(); ++k)
          terms.push_back(coeffs[k] == 1 ? Expr::var(vars[k])
                                         : Expr::op(OpKind::mul, {Expr::constant(coeffs[k]), Expr::var(vars[k])}));
        expr = terms.size() == 1 ? std::move(terms.front()) : Expr::op(OpKind::add, std::move(terms));
      } else {
        throw ParseError(ParseError::Kind::unsupported, "unsupported objective type '" + type->value + "'",
                         type->span, o.name);
      }
      check_refs(free_variables(expr), o);
      instance_.objective.direction = o.name == "minimize" ? Direction::minimize : Direction::maximize;
      instance_.objective.expr = std::move(expr);
    }
  }

  std::string_view doc_;
  Instance instance_;
};

void write_domain(std::ostringstream& out, const std::vector<std::int64_t>& domain) {
  std::size_t k = 0;
  bool first = true;
  while (k < domain.size()) {
    std::size_t run = k;
    while (run + 1 < domain.size() && domain[run + 1] == domain[run] + 1) ++run;
    if (!first) out << ' ';
    first = false;
    if (run - k >= 2) {
      out << domain[k] << ".." << domain[run];
      k = run + 1;
    } else {
      out << domain[k];
      ++k;
    }
  }
}

void write_ids(std::ostringstream& out, const std::vector<std::string>& ids) {
  for (std::size_t k = 0; k < ids.size(); ++k) out << (k ? " " : "") << xml::escape(ids[k]);
}

struct ConstraintWriter {
  std::ostringstream& out;
  const std::string& id;

  std::string open(std::string_view tag) const {
    return "    <" + std::string(tag) + " id=\"" + xml::escape(id) + "\">";
  }

  void operator()(const Intension& c) const {
    out << open("intension") << ' ' << xml::escape(to_string(c.expr)) << " </intension>\n";
  }

  void operator()(const Extension& c) const {
    out << open("extension") << "\n      <list> ";
    write_ids(out, c.scope);
    const char* tag = c.kind == TableKind::negative ? "conflicts" : "supports";
    out << " </list>\n      <" << tag << "> ";
    for (std::size_t t = 0; t < c.tuples.size(); ++t) {
      const auto& tuple = c.tuples[t];
      if (c.scope.size() == 1 && tuple.size() == 1 && tuple[0]) {
        out << (t ? " " : "") << *tuple[0];
        continue;
      }
      out << '(';
      for (std::size_t k = 0; k < tuple.size(); ++k) {
        if (k) out << ',';
        if (tuple[k]) out << *tuple[k];
        else out << '*';
      }
      out << ')';
    }
    out << " </" << tag << ">\n    </extension>\n";
  }

  void operator()(const Element& c) const {
    out << open("element") << "\n      <list> ";
    for (std::size_t k = 0; k < c.list.size(); ++k) out << (k ? " " : "") << xml::escape(to_string(c.list[k]));
    out << " </list>\n      <index> " << xml::escape(to_string(c.index)) << " </index>\n      <value> "
        << xml::escape(to_string(c.value)) << " </value>\n    </element>\n";
  }

  void operator()(const Sum& c) const {
    out << open("sum") << "\n      <list> ";
    write_ids(out, c.vars);
    out << " </list>\n      <coeffs> ";
    for (std::size_t k = 0; k < c.coeffs.size(); ++k) out << (k ? " " : "") << c.coeffs[k];
    out << " </coeffs>\n      <condition> (" << comparator_name(c.cmp) << ',' << xml::escape(to_string(c.rhs))
        << ") </condition>\n    </sum>\n";
  }

  void operator()(const AllDifferent& c) const {
    out << open("allDifferent") << ' ';
    write_ids(out, c.scope);
    out << " </allDifferent>\n";
  }
};

}  // namespace

Expr parse_functional_expr(std::string_view s) { return ExprParser(s, 0).parse_all(); }

Instance parse_instance(std::string_view document) { return InstanceReader(document).read(); }

std::string serialize_instance(const Instance& instance) {
  std::ostringstream out;
  const bool cop = instance.objective.direction != Direction::satisfy;
  out << "<instance format=\"XCSP3\" type=\"" << (cop ? "COP" : "CSP") << "\">\n";
  out << "  <variables>\n";
  for (const auto& v : instance.vars) {
    out << "    <var id=\"" << xml::escape(v.id) << '"';
    if (v.kind == VarKind::integer && v.domain == std::vector<std::int64_t>{0, 1}) out << " type=\"integer\"";
    out << "> ";
    write_domain(out, v.domain);
    out << " </var>\n";
  }
  out << "  </variables>\n";
  if (!instance.constraints.empty()) {
    out << "  <constraints>\n";
    for (const auto& c : instance.constraints) std::visit(ConstraintWriter{out, c.id}, c.body);
    out << "  </constraints>\n";
  }
  if (cop) {
    const char* tag = instance.objective.direction == Direction::minimize ? "minimize" : "maximize";
    out << "  <objectives>\n    <" << tag << "> " << xml::escape(to_string(*instance.objective.expr)) << " </"
        << tag << ">\n  </objectives>\n";
  }
  out << "</instance>\n";
  return out.str();
}

}  // namespace cpg
