// Vertex-at-a-time evaluation with explicit loops. Slow; used by tests to
// cross-check the batched forward pass.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cpgraph/gnn.hpp"

namespace cpg {

namespace {

using Vec = std::vector<double>;

// y = x * W + b for a single row x.
Vec affine(const Vec& x, const Matrix& w, const Matrix& b) {
  Vec y(static_cast<std::size_t>(w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    double s = b(0, j);
    for (Eigen::Index i = 0; i < w.rows(); ++i) s += x[static_cast<std::size_t>(i)] * w(i, j);
    y[static_cast<std::size_t>(j)] = s;
  }
  return y;
}

Vec mlp(const nn::Mlp& m, Vec x) {
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    x = affine(x, m.layers[k].w, m.layers[k].b);
    if (k + 1 < m.layers.size())
      for (auto& v : x) v = v > 0.0 ? v : 0.0;
  }
  return x;
}

Vec layernorm(const nn::LayerNorm& ln, const Vec& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  Vec y(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    y[j] = (x[j] - mean) / std::sqrt(var + ln.eps) * ln.gain(0, static_cast<Eigen::Index>(j)) +
           ln.bias(0, static_cast<Eigen::Index>(j));
  return y;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void lstm(const nn::LstmCell& cell, const Vec& x, Vec& h, Vec& c) {
  const std::size_t p = h.size();
  Vec z = affine(x, cell.wx, cell.b);
  for (std::size_t j = 0; j < 4 * p; ++j)
    for (std::size_t i = 0; i < p; ++i) z[j] += h[i] * cell.wh(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  for (std::size_t j = 0; j < p; ++j) {
    const double ig = sig(z[j]), fg = sig(z[p + j]), gg = std::tanh(z[2 * p + j]), og = sig(z[3 * p + j]);
    c[j] = fg * c[j] + ig * gg;
    h[j] = og * std::tanh(c[j]);
  }
}

}  // namespace

double forward_reference(const EncodedGraph& g, const GnnParams& params) {
  const std::size_t p = static_cast<std::size_t>(params.p);
  const std::uint32_t n = g.num_vertices();
  for (int t = 0; t < kVertexTypeCount; ++t)
    if (params.proj[t].w.rows() != feature_dim(kVertexTypes[t]))
      throw std::invalid_argument("parameters do not match the feature schema");

  std::vector<std::vector<VertexId>> nbrs(n);
  for (const auto& [a, b] : g.edges) {
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }
  auto type = [&](VertexId v) { return static_cast<int>(g.type_of(v)); };

  std::vector<Vec> h(n), c(n, Vec(p, 0.0));
  for (VertexId v = 0; v < n; ++v) {
    const int t = type(v);
    const int dim = feature_dim(kVertexTypes[t]);
    const double* f = g.features[t].data() + static_cast<std::size_t>(g.local_index(v)) * dim;
    h[v] = affine(Vec(f, f + dim), params.proj[t].w, params.proj[t].b);
  }

  for (int it = 0; it < params.iterations; ++it) {
    std::vector<Vec> h_next = h, c_next = c;
    for (VertexId v = 0; v < n; ++v) {
      const int t1 = type(v);
      Vec mu;
      for (int t2 = 0; t2 < kVertexTypeCount; ++t2) {
        Vec agg(p, 0.0);
        for (VertexId u : nbrs[v])
          if (type(u) == t2)
            for (std::size_t j = 0; j < p; ++j) agg[j] += h[u][j];
        const Vec m = mlp(params.msg[t1][t2], agg);
        mu.insert(mu.end(), m.begin(), m.end());
      }
      lstm(params.lstm[t1], layernorm(params.norm[t1], mu), h_next[v], c_next[v]);
    }
    h = std::move(h_next);
    c = std::move(c_next);
  }

  double total = 0.0;
  for (VertexId v = 0; v < n; ++v) total += mlp(params.out[type(v)], h[v])[0];
  return std::clamp(sig(total / (kVertexTypeCount * static_cast<double>(n))), nn::kProbClamp, 1.0 - nn::kProbClamp);
}

}  // namespace cpg
