#include "cpgraph/canon.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <unordered_set>

namespace cpg {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t combine(std::uint64_t seed, std::uint64_t value) { return mix(seed ^ mix(value)); }

std::int64_t quantize(double x) {
  return static_cast<std::int64_t>(std::llround(x * 1e6));
}

std::vector<std::int64_t> vertex_signature(const EncodedGraph& g, VertexId v) {
  std::vector<std::int64_t> sig;
  sig.push_back(static_cast<std::int64_t>(g.type_of(v)));
  for (double x : g.feature_row(v)) sig.push_back(quantize(x));
  return sig;
}

std::vector<std::vector<VertexId>> adjacency(const EncodedGraph& g) {
  std::vector<std::vector<VertexId>> adj(g.num_vertices());
  for (const auto& [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

std::size_t distinct(const std::vector<std::uint64_t>& colors) {
  return std::unordered_set<std::uint64_t>(colors.begin(), colors.end()).size();
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("SHA-256 initialisation failed");
  }
  void u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int k = 0; k < 8; ++k) buf[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xFF);
    EVP_DigestUpdate(ctx_.get(), buf, sizeof buf);
  }
  Digest finish() {
    Digest d{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), d.data(), &len);
    return d;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string to_hex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto byte : d) {
    s += kHex[byte >> 4];
    s += kHex[byte & 0xF];
  }
  return s;
}

Digest canonical_hash(const EncodedGraph& g) {
  const std::uint32_t n = g.num_vertices();
  const auto adj = adjacency(g);
  std::vector<std::uint64_t> color(n);
  for (VertexId v = 0; v < n; ++v) {
    std::uint64_t h = 0x5EED;
    for (auto x : vertex_signature(g, v)) h = combine(h, static_cast<std::uint64_t>(x));
    color[v] = h;
  }

  // Refine until the number of color classes stops growing; the partition is
  // then stable and further rounds only rename classes.
  std::size_t classes = distinct(color);
  std::uint32_t rounds = 0;
  std::vector<std::uint64_t> next(n), scratch;
  while (rounds < std::max<std::uint32_t>(n, 1)) {
    for (VertexId v = 0; v < n; ++v) {
      scratch.clear();
      for (auto u : adj[v]) scratch.push_back(color[u]);
      std::sort(scratch.begin(), scratch.end());
      std::uint64_t h = combine(0xC0102, color[v]);
      for (auto c : scratch) h = combine(h, c);
      next[v] = h;
    }
    color.swap(next);
    ++rounds;
    const std::size_t now = distinct(color);
    if (now == classes) break;
    classes = now;
  }

  std::vector<std::uint64_t> sorted = color;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<std::uint64_t, std::uint64_t>> edge_colors;
  edge_colors.reserve(g.edges.size());
  for (const auto& [a, b] : g.edges)
    edge_colors.emplace_back(std::min(color[a], color[b]), std::max(color[a], color[b]));
  std::sort(edge_colors.begin(), edge_colors.end());

  Sha256 sha;
  for (auto c : g.counts) sha.u64(c);
  sha.u64(g.edges.size());
  sha.u64(rounds);
  for (auto c : sorted) sha.u64(c);
  for (const auto& [a, b] : edge_colors) {
    sha.u64(a);
    sha.u64(b);
  }
  return sha.finish();
}

bool isomorphic(const EncodedGraph& a, const EncodedGraph& b) {
  const std::uint32_t n = a.num_vertices();
  if (n > kIsomorphismVertexLimit || b.num_vertices() > kIsomorphismVertexLimit)
    throw std::length_error("isomorphism test limited to " + std::to_string(kIsomorphismVertexLimit) + " vertices");
  if (a.counts != b.counts || a.edges.size() != b.edges.size()) return false;

  std::vector<std::vector<bool>> adj_a(n, std::vector<bool>(n)), adj_b(n, std::vector<bool>(n));
  std::vector<int> deg_a(n), deg_b(n);
  for (const auto& [x, y] : a.edges) {
    adj_a[x][y] = adj_a[y][x] = true;
    ++deg_a[x];
    ++deg_a[y];
  }
  for (const auto& [x, y] : b.edges) {
    adj_b[x][y] = adj_b[y][x] = true;
    ++deg_b[x];
    ++deg_b[y];
  }

  std::vector<std::vector<VertexId>> candidates(n);
  for (VertexId v = 0; v < n; ++v) {
    const auto sig = vertex_signature(a, v);
    for (VertexId w = 0; w < n; ++w)
      if (deg_a[v] == deg_b[w] && sig == vertex_signature(b, w)) candidates[v].push_back(w);
    if (candidates[v].empty()) return false;
  }

  std::vector<VertexId> order(n);
  for (VertexId v = 0; v < n; ++v) order[v] = v;
  std::sort(order.begin(), order.end(),
            [&](VertexId x, VertexId y) { return candidates[x].size() < candidates[y].size(); });

  constexpr VertexId kUnmapped = ~VertexId{0};
  std::vector<VertexId> map(n, kUnmapped);
  std::vector<bool> used(n, false);

  auto search = [&](auto&& self, std::size_t depth) -> bool {
    if (depth == n) return true;
    const VertexId v = order[depth];
    for (VertexId w : candidates[v]) {
      if (used[w]) continue;
      bool consistent = true;
      for (std::size_t k = 0; k < depth && consistent; ++k) {
        const VertexId u = order[k];
        consistent = adj_a[v][u] == adj_b[w][map[u]];
      }
      if (!consistent) continue;
      map[v] = w;
      used[w] = true;
      if (self(self, depth + 1)) return true;
      used[w] = false;
      map[v] = kUnmapped;
    }
    return false;
  };
  return search(search, 0);
}

}  // namespace cpg
