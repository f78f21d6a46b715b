#pragma once

// CPG1 binary graph format (all integers little-endian):
//
//   "CPG1"  u32 format_version  u32 schema_version  u32 counts[5]
//   per type in VAR, VAL, CST, OPE, MOD order:
//     u32 dim  f64 features[count * dim]
//   u32 edge_count   (u32 a, u32 b) * edge_count
//   u32 provenance_count   (u32 byte_length, UTF-8 bytes) * provenance_count

#include <stdexcept>
#include <string>
#include <string_view>

#include "cpgraph/encoder.hpp"

namespace cpg {

inline constexpr std::uint32_t kGraphFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  enum class Kind { version_mismatch, truncated, malformed };
  FormatError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string serialize_graph(const EncodedGraph& g);
EncodedGraph deserialize_graph(std::string_view bytes);

// Short display label of a vertex: variable id, value, constraint id with
// kind, operator token (lhs, rhs, ×3, t1, cell, ...) or M.
std::string vertex_label(const EncodedGraph& g, VertexId v);

// Human-readable dump: a header line, one line per vertex, then edges grouped
// by type pair, each group introduced by a header line.
std::string inspect(const EncodedGraph& g);

// Whole-file helpers; throw std::runtime_error on I/O failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace cpg
