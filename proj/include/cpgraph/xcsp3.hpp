#pragma once

// Reader and writer for the XCSP3-core subset: <var> with integer domains,
// <intension>, <extension> (supports/conflicts, `*` short tables), <element>,
// <sum>, <allDifferent>, and <minimize>/<maximize> objectives.

#include <stdexcept>
#include <string>
#include <string_view>

#include "cpgraph/model.hpp"
#include "cpgraph/xml.hpp"

namespace cpg {

class ParseError : public std::runtime_error {
 public:
  enum class Kind { syntax, unknown_operator, unsupported, unresolved_variable, invalid_instance };

  ParseError(Kind kind, const std::string& message, SourceSpan span, std::string tag = {})
      : std::runtime_error(message), kind_(kind), span_(span), tag_(std::move(tag)) {}

  Kind kind() const { return kind_; }
  SourceSpan span() const { return span_; }
  // Offending XCSP3 tag for unsupported-constraint errors.
  const std::string& tag() const { return tag_; }

 private:
  Kind kind_;
  SourceSpan span_;
  std::string tag_;
};

// Functional syntax, e.g. le(mul(3,x1),mul(4,x2)). Spans are offsets into s.
Expr parse_functional_expr(std::string_view s);

Instance parse_instance(std::string_view document);

// Deterministic; parse_instance(serialize_instance(i)) == i for valid i.
std::string serialize_instance(const Instance& instance);

}  // namespace cpg
