#include "cpgraph/gnn.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cpgraph/graph_io.hpp"

namespace cpg {

namespace {

void collect(nn::Mlp& m, const std::string& prefix, std::vector<std::pair<std::string, Matrix*>>& out) {
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    out.emplace_back(prefix + ".l" + std::to_string(k) + ".w", &m.layers[k].w);
    out.emplace_back(prefix + ".l" + std::to_string(k) + ".b", &m.layers[k].b);
  }
}

std::string tname(int t) { return std::string(type_name(kVertexTypes[t])); }

void check_schema(const GraphTensors& g, const GnnParams& params) {
  for (int t = 0; t < kVertexTypeCount; ++t)
    if (g.features[t].cols() != params.proj[t].w.rows())
      throw std::invalid_argument("feature width of " + tname(t) + " is " + std::to_string(g.features[t].cols()) +
                                  ", parameters expect " + std::to_string(params.proj[t].w.rows()));
}

}  // namespace

std::vector<std::pair<std::string, Matrix*>> GnnParams::named() {
  std::vector<std::pair<std::string, Matrix*>> res;
  for (int t = 0; t < kVertexTypeCount; ++t) {
    res.emplace_back("proj." + tname(t) + ".w", &proj[t].w);
    res.emplace_back("proj." + tname(t) + ".b", &proj[t].b);
  }
  for (int t1 = 0; t1 < kVertexTypeCount; ++t1)
    for (int t2 = 0; t2 < kVertexTypeCount; ++t2) collect(msg[t1][t2], "msg." + tname(t1) + "." + tname(t2), res);
  for (int t = 0; t < kVertexTypeCount; ++t) {
    res.emplace_back("norm." + tname(t) + ".gain", &norm[t].gain);
    res.emplace_back("norm." + tname(t) + ".bias", &norm[t].bias);
  }
  for (int t = 0; t < kVertexTypeCount; ++t) {
    res.emplace_back("lstm." + tname(t) + ".wx", &lstm[t].wx);
    res.emplace_back("lstm." + tname(t) + ".wh", &lstm[t].wh);
    res.emplace_back("lstm." + tname(t) + ".b", &lstm[t].b);
  }
  for (int t = 0; t < kVertexTypeCount; ++t) collect(out[t], "out." + tname(t), res);
  return res;
}

std::vector<std::pair<std::string, const Matrix*>> GnnParams::named() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : const_cast<GnnParams*>(this)->named()) out.emplace_back(name, m);
  return out;
}

std::size_t GnnParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : named()) n += static_cast<std::size_t>(m->size());
  return n;
}

GnnParams init_params(int p, int iterations, std::uint64_t seed) {
  if (p < 2) throw std::invalid_argument("hidden size must be at least 2");
  if (iterations < 0) throw std::invalid_argument("iteration count must be non-negative");
  std::mt19937_64 rng(seed);
  GnnParams params;
  params.p = p;
  params.iterations = iterations;
  for (int t = 0; t < kVertexTypeCount; ++t) params.proj[t] = nn::make_linear(feature_dim(kVertexTypes[t]), p, rng);
  for (int t1 = 0; t1 < kVertexTypeCount; ++t1)
    for (int t2 = 0; t2 < kVertexTypeCount; ++t2) params.msg[t1][t2] = nn::make_mlp({p, p, p}, rng);
  for (int t = 0; t < kVertexTypeCount; ++t) params.norm[t] = nn::make_layernorm(kVertexTypeCount * p);
  for (int t = 0; t < kVertexTypeCount; ++t) params.lstm[t] = nn::make_lstm(kVertexTypeCount * p, p, rng);
  for (int t = 0; t < kVertexTypeCount; ++t) params.out[t] = nn::make_mlp({p, p, 1}, rng);
  return params;
}

std::uint32_t GraphTensors::num_vertices() const {
  std::uint32_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

GraphTensors prepare(const EncodedGraph& g) {
  GraphTensors out;
  out.counts = g.counts;
  for (int t = 0; t < kVertexTypeCount; ++t) {
    const int dim = feature_dim(kVertexTypes[t]);
    out.features[t] = Eigen::Map<const Matrix>(g.features[t].data(), g.counts[t], dim);
  }
  std::array<std::array<std::vector<Eigen::Triplet<double>>, kVertexTypeCount>, kVertexTypeCount> trips;
  for (const auto& [a, b] : g.edges) {
    const int ta = static_cast<int>(g.type_of(a)), tb = static_cast<int>(g.type_of(b));
    const int la = static_cast<int>(g.local_index(a)), lb = static_cast<int>(g.local_index(b));
    trips[ta][tb].emplace_back(la, lb, 1.0);
    trips[tb][ta].emplace_back(lb, la, 1.0);
  }
  for (int t1 = 0; t1 < kVertexTypeCount; ++t1)
    for (int t2 = 0; t2 < kVertexTypeCount; ++t2) {
      auto& m = out.adj[t1][t2];
      m.resize(g.counts[t1], g.counts[t2]);
      m.setFromTriplets(trips[t1][t2].begin(), trips[t1][t2].end());
      m.makeCompressed();
    }
  return out;
}

double forward(const GraphTensors& g, const GnnParams& params) {
  check_schema(g, params);
  const int p = params.p;
  std::array<Matrix, kVertexTypeCount> h, c;
  for (int t = 0; t < kVertexTypeCount; ++t) {
    h[t] = g.features[t] * params.proj[t].w;
    h[t].rowwise() += params.proj[t].b.row(0);
    c[t] = Matrix::Zero(g.counts[t], p);
  }
  for (int it = 0; it < params.iterations; ++it) {
    std::array<Matrix, kVertexTypeCount> h_next, c_next;
    for (int t1 = 0; t1 < kVertexTypeCount; ++t1) {
      if (g.counts[t1] == 0) continue;
      Matrix mu(g.counts[t1], kVertexTypeCount * p);
      for (int t2 = 0; t2 < kVertexTypeCount; ++t2) {
        if (g.adj[t1][t2].nonZeros() == 0) {
          // Every row aggregates nothing; the message is one constant row.
          mu.middleCols(t2 * p, p).rowwise() = nn::mlp_forward(params.msg[t1][t2], Matrix::Zero(1, p)).row(0);
        } else {
          mu.middleCols(t2 * p, p) = nn::mlp_forward(params.msg[t1][t2], g.adj[t1][t2] * h[t2]);
        }
      }
      std::tie(h_next[t1], c_next[t1]) =
          nn::lstm_step(params.lstm[t1], nn::layernorm_forward(params.norm[t1], mu), h[t1], c[t1]);
    }
    for (int t = 0; t < kVertexTypeCount; ++t)
      if (g.counts[t] > 0) {
        h[t] = std::move(h_next[t]);
        c[t] = std::move(c_next[t]);
      }
  }
  double total = 0.0;
  for (int t = 0; t < kVertexTypeCount; ++t)
    if (g.counts[t] > 0) total += nn::mlp_forward(params.out[t], h[t]).sum();
  return nn::clamp_prob(nn::sigmoid(total / (kVertexTypeCount * static_cast<double>(g.num_vertices()))));
}

GradResult loss_and_grad(const GraphTensors& g, const GnnParams& params, double label) {
  check_schema(g, params);
  const int p = params.p;
  nn::Tape tape;
  std::array<nn::Tape::Var, kVertexTypeCount> h, c;
  for (int t = 0; t < kVertexTypeCount; ++t) {
    if (g.counts[t] == 0) continue;
    h[t] = tape.linear(tape.constant(g.features[t]), tape.param(params.proj[t].w), tape.param(params.proj[t].b));
    c[t] = tape.constant(Matrix::Zero(g.counts[t], p));
  }
  for (int it = 0; it < params.iterations; ++it) {
    std::array<nn::Tape::Var, kVertexTypeCount> h_next, c_next;
    for (int t1 = 0; t1 < kVertexTypeCount; ++t1) {
      if (g.counts[t1] == 0) continue;
      std::vector<nn::Tape::Var> parts;
      for (int t2 = 0; t2 < kVertexTypeCount; ++t2) {
        if (g.adj[t1][t2].nonZeros() == 0) {
          const auto row = nn::mlp_apply(tape, params.msg[t1][t2], tape.constant(Matrix::Zero(1, p)));
          parts.push_back(tape.broadcast_rows(row, g.counts[t1]));
        } else {
          parts.push_back(nn::mlp_apply(tape, params.msg[t1][t2], tape.spmm(g.adj[t1][t2], h[t2])));
        }
      }
      const auto mu = nn::layernorm_apply(tape, params.norm[t1], tape.concat_cols(parts));
      std::tie(h_next[t1], c_next[t1]) = nn::lstm_apply(tape, params.lstm[t1], mu, h[t1], c[t1]);
    }
    for (int t = 0; t < kVertexTypeCount; ++t)
      if (g.counts[t] > 0) {
        h[t] = h_next[t];
        c[t] = c_next[t];
      }
  }
  std::vector<nn::Tape::Var> sums;
  for (int t = 0; t < kVertexTypeCount; ++t)
    if (g.counts[t] > 0) sums.push_back(tape.sum(nn::mlp_apply(tape, params.out[t], h[t])));
  auto total = sums[0];
  for (std::size_t k = 1; k < sums.size(); ++k) total = tape.add(total, sums[k]);
  const auto prob =
      tape.sigmoid(tape.scale(total, 1.0 / (kVertexTypeCount * static_cast<double>(g.num_vertices()))));
  const auto loss = tape.bce(prob, label);

  GradResult r;
  r.prob = tape.scalar(prob);
  r.loss = tape.scalar(loss);
  tape.backward(loss);
  for (const auto& [name, m] : params.named()) r.grads.push_back(tape.grad_of(*m));
  return r;
}

}  // namespace cpg

// ---- Checkpoints
//
//   "CPGM"  u32 version  u32 p  u32 iterations  u32 schema  u32 tensor_count
//   per tensor: u32 name_len  name  u32 rows  u32 cols  f64 data[rows * cols]
// Integers and doubles are little-endian.

namespace cpg {

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'P', 'G', 'M'};

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(FormatError::Kind::truncated, "checkpoint is truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const GnnParams& params) {
  std::string out(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.p));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.iterations));
  put<std::uint32_t>(out, params.schema_version);
  const auto tensors = params.named();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m->rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m->cols()));
    out.append(reinterpret_cast<const char*>(m->data()), sizeof(double) * static_cast<std::size_t>(m->size()));
  }
  return out;
}

GnnParams deserialize_checkpoint(std::string_view bytes) {
  using Kind = FormatError::Kind;
  if (bytes.size() < 4) throw FormatError(Kind::truncated, "checkpoint is truncated");
  if (bytes.substr(0, 4) != std::string_view(kCheckpointMagic, 4))
    throw FormatError(Kind::malformed, "not a checkpoint (bad magic)");
  Reader in(bytes.substr(4));
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError(Kind::version_mismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                  std::to_string(kCheckpointVersion));
  const auto p = in.get<std::uint32_t>();
  const auto iterations = in.get<std::uint32_t>();
  const auto schema = in.get<std::uint32_t>();
  if (schema != kFeatureSchemaVersion)
    throw FormatError(Kind::version_mismatch, "checkpoint feature schema " + std::to_string(schema) + ", expected " +
                                                  std::to_string(kFeatureSchemaVersion));
  if (p < 2 || p > 4096 || iterations > 4096) throw FormatError(Kind::malformed, "implausible model dimensions");

  GnnParams params = init_params(static_cast<int>(p), static_cast<int>(iterations), 0);
  auto tensors = params.named();
  if (in.get<std::uint32_t>() != tensors.size()) throw FormatError(Kind::malformed, "tensor count mismatch");
  for (auto& [name, m] : tensors) {
    const auto len = in.get<std::uint32_t>();
    if (in.take(len) != name) throw FormatError(Kind::malformed, "expected tensor " + name);
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    if (rows != m->rows() || cols != m->cols()) throw FormatError(Kind::malformed, "shape mismatch for " + name);
    const auto raw = in.take(sizeof(double) * static_cast<std::size_t>(m->size()));
    std::memcpy(m->data(), raw.data(), raw.size());
  }
  if (!in.done()) throw FormatError(Kind::malformed, "trailing bytes after checkpoint");
  return params;
}

void save_checkpoint(const GnnParams& params, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  const auto bytes = serialize_checkpoint(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

GnnParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace cpg
