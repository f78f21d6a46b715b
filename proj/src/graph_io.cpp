#include "cpgraph/graph_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace cpg {

namespace {

constexpr std::string_view kMagic = "CPG1";

constexpr std::array<std::string_view, kCstKindCount> kCstNames = {
    "lt", "le", "gt", "ge", "eq", "ne", "table+", "table-", "tableShort", "element", "sum", "allDifferent"};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_ += static_cast<char>((v >> (8 * k)) & 0xFF);
  }
  void f64(double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int k = 0; k < 8; ++k) out_ += static_cast<char>((bits >> (8 * k)) & 0xFF);
  }
  void bytes(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n)
      throw FormatError(FormatError::Kind::truncated, std::string("truncated graph data while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + k])) << (8 * k);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::string strip_prefix(const std::string& provenance) {
  const auto colon = provenance.find(':');
  return colon == std::string::npos ? provenance : provenance.substr(colon + 1);
}

}  // namespace

std::string serialize_graph(const EncodedGraph& g) {
  Writer w;
  w.bytes(kMagic);
  w.u32(kGraphFormatVersion);
  w.u32(kFeatureSchemaVersion);
  for (auto c : g.counts) w.u32(c);
  for (int t = 0; t < kVertexTypeCount; ++t) {
    w.u32(static_cast<std::uint32_t>(feature_dim(kVertexTypes[t])));
    for (double x : g.features[t]) w.f64(x);
  }
  w.u32(static_cast<std::uint32_t>(g.edges.size()));
  for (const auto& [a, b] : g.edges) {
    w.u32(a);
    w.u32(b);
  }
  w.u32(static_cast<std::uint32_t>(g.provenance.size()));
  for (const auto& p : g.provenance) {
    w.u32(static_cast<std::uint32_t>(p.size()));
    w.bytes(p);
  }
  return w.take();
}

EncodedGraph deserialize_graph(std::string_view bytes) {
  if (bytes.size() < kMagic.size() && kMagic.substr(0, bytes.size()) == bytes)
    throw FormatError(FormatError::Kind::truncated, "input ends inside the CPG1 magic");
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
    throw FormatError(FormatError::Kind::version_mismatch, "not a CPG1 graph (bad magic)");
  Reader r(bytes.substr(kMagic.size()));
  const auto version = r.u32("format version");
  if (version != kGraphFormatVersion)
    throw FormatError(FormatError::Kind::version_mismatch, "unsupported graph format version " + std::to_string(version));
  const auto schema = r.u32("schema version");
  if (schema != kFeatureSchemaVersion)
    throw FormatError(FormatError::Kind::version_mismatch, "unsupported feature schema version " + std::to_string(schema));

  EncodedGraph g;
  std::uint64_t total = 0;
  for (auto& c : g.counts) {
    c = r.u32("vertex counts");
    total += c;
  }
  if (total > (1u << 30)) throw FormatError(FormatError::Kind::malformed, "implausible vertex count");
  for (int t = 0; t < kVertexTypeCount; ++t) {
    const auto dim = r.u32("feature dimension");
    if (dim != static_cast<std::uint32_t>(feature_dim(kVertexTypes[t])))
      throw FormatError(FormatError::Kind::version_mismatch, "feature dimension mismatch for " +
                                                                 std::string(type_name(kVertexTypes[t])));
    const std::size_t n = static_cast<std::size_t>(g.counts[t]) * dim;
    r.need(n * 8, "features");
    g.features[t].resize(n);
    for (auto& x : g.features[t]) x = r.f64("features");
  }
  const auto edges = r.u32("edge count");
  r.need(static_cast<std::size_t>(edges) * 8, "edges");
  g.edges.resize(edges);
  for (auto& [a, b] : g.edges) {
    a = r.u32("edges");
    b = r.u32("edges");
    if (a >= b || b >= total) throw FormatError(FormatError::Kind::malformed, "malformed edge");
  }
  const auto names = r.u32("provenance count");
  if (names != total) throw FormatError(FormatError::Kind::malformed, "provenance count does not match vertex count");
  g.provenance.resize(names);
  for (auto& p : g.provenance) {
    const auto len = r.u32("provenance length");
    p = std::string(r.bytes(len, "provenance"));
  }
  if (!r.done()) throw FormatError(FormatError::Kind::malformed, "trailing bytes after graph");
  return g;
}

std::string vertex_label(const EncodedGraph& g, VertexId v) {
  const VertexType t = g.type_of(v);
  const std::string& p = g.provenance[v];
  switch (t) {
    case VertexType::var:
    case VertexType::val:
      return strip_prefix(p);
    case VertexType::cst: {
      const auto f = g.feature_row(v);
      int kind = 0;
      while (kind < kCstKindCount && f[kind] != 1.0) ++kind;
      return strip_prefix(p) + ":" + std::string(kind < kCstKindCount ? kCstNames[kind] : "?");
    }
    case VertexType::ope: {
      const auto slash = p.rfind('/');
      return slash == std::string::npos ? strip_prefix(p) : p.substr(slash + 1);
    }
    case VertexType::mod:
      return "M";
  }
  return p;
}

std::string inspect(const EncodedGraph& g) {
  std::ostringstream out;
  const auto n = g.num_vertices();
  out << "graph: " << n << " vertices, " << g.edges.size() << " edges";
  for (auto t : kVertexTypes) out << ' ' << type_name(t) << '=' << g.counts[static_cast<int>(t)];
  out << '\n';
  for (VertexId v = 0; v < n; ++v)
    out << "  v" << v << ' ' << type_name(g.type_of(v)) << ' ' << vertex_label(g, v) << "  [" << g.provenance[v]
        << "]\n";

  std::map<std::pair<VertexType, VertexType>, std::vector<Edge>> groups;
  for (const auto& e : g.edges) groups[{g.type_of(e.first), g.type_of(e.second)}].push_back(e);
  for (const auto& [types, edges] : groups) {
    out << "edges " << type_name(types.first) << '-' << type_name(types.second) << " (" << edges.size() << "):\n";
    for (const auto& [a, b] : edges)
      out << "  v" << a << ' ' << vertex_label(g, a) << " -- v" << b << ' ' << vertex_label(g, b) << '\n';
  }
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace cpg
