#pragma once

// Reference semantics for instances, used only to cross-check generator labels
// on tiny instances.

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <string>
#include <vector>

#include "cpgraph/model.hpp"

namespace cpg {

using Assignment = std::unordered_map<std::string, std::int64_t>;

// Integer value of e; booleans are 0/1. nullopt on division or modulo by zero.
std::optional<std::int64_t> evaluate(const Expr& e, const Assignment& a);

bool satisfies(const Constraint& c, const Assignment& a);

// Depth-first search in declaration order, checking each constraint as soon as
// its scope is assigned. Throws OracleLimitError after `node_limit` nodes.
std::optional<Assignment> brute_force_solve(const Instance& instance, std::uint64_t node_limit = 50'000'000);

}  // namespace cpg
