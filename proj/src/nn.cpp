#include "cpgraph/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpg::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamp_prob(double prob) { return std::clamp(prob, kProbClamp, 1.0 - kProbClamp); }

double bce(double prob, double label) {
  const double p = clamp_prob(prob);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

// ---- Tape

Tape::Var Tape::push(Matrix value, bool needs_grad, bool leaf) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.leaf = leaf;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols())
    n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <class E>
void Tape::accumulate(Var v, const E& expr) {
  if (!needs(v)) return;
  Node& n = nodes_[v.id];
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols())
    n.grad = expr;
  else
    n.grad += expr;
}

Tape::Var Tape::param(const Matrix& p) {
  if (auto it = param_index_.find(&p); it != param_index_.end()) return Var{it->second};
  const Var v = push(p, true, true);
  param_index_.emplace(&p, v.id);
  return v;
}

Tape::Var Tape::input(Matrix m) { return push(std::move(m), true, true); }

Tape::Var Tape::constant(Matrix m) { return push(std::move(m), false, true); }

Tape::Var Tape::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), "matmul shape mismatch");
  const Var out = push(value(a) * value(b), needs(a) || needs(b));
  nodes_[out.id].backward = [this, a, b, out] {
    const Matrix& g = nodes_[out.id].grad;
    accumulate(a, g * value(b).transpose());
    accumulate(b, value(a).transpose() * g);
  };
  return out;
}

Tape::Var Tape::linear(Var x, Var w, Var b, Activation act) {
  require(value(x).cols() == value(w).rows(), "linear input width mismatch");
  require(value(b).rows() == 1 && value(b).cols() == value(w).cols(), "linear bias shape mismatch");
  Matrix y = value(x) * value(w);
  y.rowwise() += value(b).row(0);
  if (act == Activation::relu) y = y.cwiseMax(0.0);
  const Var out = push(std::move(y), needs(x) || needs(w) || needs(b));
  nodes_[out.id].backward = [this, x, w, b, out, act] {
    Matrix& g = nodes_[out.id].grad;
    if (act == Activation::relu) g = (nodes_[out.id].value.array() > 0.0).select(g, 0.0);
    accumulate(x, g * value(w).transpose());
    accumulate(w, value(x).transpose() * g);
    accumulate(b, g.colwise().sum());
  };
  return out;
}

Tape::Var Tape::add(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add shape mismatch");
  const Var out = push(value(a) + value(b), needs(a) || needs(b));
  nodes_[out.id].backward = [this, a, b, out] {
    accumulate(a, nodes_[out.id].grad);
    accumulate(b, nodes_[out.id].grad);
  };
  return out;
}

Tape::Var Tape::mul(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "mul shape mismatch");
  const Var out = push(value(a).cwiseProduct(value(b)), needs(a) || needs(b));
  nodes_[out.id].backward = [this, a, b, out] {
    const Matrix& g = nodes_[out.id].grad;
    accumulate(a, g.cwiseProduct(value(b)));
    accumulate(b, g.cwiseProduct(value(a)));
  };
  return out;
}

Tape::Var Tape::scale(Var a, double s) {
  const Var out = push(value(a) * s, needs(a));
  nodes_[out.id].backward = [this, a, out, s] { accumulate(a, nodes_[out.id].grad * s); };
  return out;
}

Tape::Var Tape::relu(Var a) {
  const Var out = push(value(a).cwiseMax(0.0), needs(a));
  nodes_[out.id].backward = [this, a, out] {
    accumulate(a, (nodes_[out.id].value.array() > 0.0).select(nodes_[out.id].grad, 0.0));
  };
  return out;
}

Tape::Var Tape::sigmoid(Var a) {
  const Var out = push(value(a).unaryExpr([](double x) { return nn::sigmoid(x); }), needs(a));
  nodes_[out.id].backward = [this, a, out] {
    const auto& s = nodes_[out.id].value.array();
    accumulate(a, (nodes_[out.id].grad.array() * s * (1.0 - s)).matrix());
  };
  return out;
}

Tape::Var Tape::tanh(Var a) {
  const Var out = push(value(a).array().tanh().matrix(), needs(a));
  nodes_[out.id].backward = [this, a, out] {
    const auto& t = nodes_[out.id].value.array();
    accumulate(a, (nodes_[out.id].grad.array() * (1.0 - t.square())).matrix());
  };
  return out;
}

Tape::Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat of nothing");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool any = false;
  for (auto p : parts) {
    require(value(p).rows() == rows, "concat row mismatch");
    cols += value(p).cols();
    any = any || needs(p);
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (auto p : parts) {
    y.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  const Var out = push(std::move(y), any);
  nodes_[out.id].backward = [this, parts, out] {
    Eigen::Index at = 0;
    for (auto p : parts) {
      const Eigen::Index w = value(p).cols();
      accumulate(p, nodes_[out.id].grad.middleCols(at, w));
      at += w;
    }
  };
  return out;
}

Tape::Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= value(a).cols(), "slice out of range");
  const Var out = push(value(a).middleCols(start, count), needs(a));
  nodes_[out.id].backward = [this, a, out, start, count] {
    if (!needs(a)) return;
    grad_buffer(a).middleCols(start, count) += nodes_[out.id].grad;
  };
  return out;
}

Tape::Var Tape::broadcast_rows(Var row, Eigen::Index n) {
  require(value(row).rows() == 1, "broadcast_rows expects a single row");
  const Var out = push(value(row).replicate(n, 1), needs(row));
  nodes_[out.id].backward = [this, row, out] { accumulate(row, nodes_[out.id].grad.colwise().sum()); };
  return out;
}

Tape::Var Tape::spmm(const SparseMatrix& m, Var h) {
  require(m.cols() == value(h).rows(), "spmm shape mismatch");
  const Var out = push(m * value(h), needs(h));
  nodes_[out.id].backward = [this, &m, h, out] { accumulate(h, m.transpose() * nodes_[out.id].grad); };
  return out;
}

Tape::Var Tape::layernorm(Var x, Var gain, Var bias, double eps) {
  const Matrix& in = value(x);
  const Eigen::Index d = in.cols();
  require(d >= 2, "layernorm needs at least two features");
  require(value(gain).rows() == 1 && value(gain).cols() == d, "layernorm gain shape mismatch");
  require(value(bias).rows() == 1 && value(bias).cols() == d, "layernorm bias shape mismatch");
  auto xhat = std::make_shared<Matrix>(in.rows(), d);
  auto rstd = std::make_shared<Eigen::VectorXd>(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().mean();
    (*rstd)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (in.row(r).array() - mean) * (*rstd)(r);
  }
  Matrix y = xhat->array().rowwise() * value(gain).row(0).array();
  y.rowwise() += value(bias).row(0);
  const Var out = push(std::move(y), needs(x) || needs(gain) || needs(bias));
  nodes_[out.id].backward = [this, x, gain, bias, out, xhat, rstd] {
    const Matrix& g = nodes_[out.id].grad;
    accumulate(gain, g.cwiseProduct(*xhat).colwise().sum());
    accumulate(bias, g.colwise().sum());
    if (!needs(x)) return;
    Matrix dxhat = g.array().rowwise() * value(gain).row(0).array();
    const Eigen::VectorXd mean_d = dxhat.rowwise().mean();
    const Eigen::VectorXd mean_dx = dxhat.cwiseProduct(*xhat).rowwise().mean();
    for (Eigen::Index r = 0; r < dxhat.rows(); ++r)
      dxhat.row(r) = (*rstd)(r) * (dxhat.row(r).array() - mean_d(r) - xhat->row(r).array() * mean_dx(r)).matrix();
    accumulate(x, dxhat);
  };
  return out;
}

Tape::Var Tape::sum(Var a) {
  Matrix s(1, 1);
  s(0, 0) = value(a).sum();
  const Var out = push(std::move(s), needs(a));
  nodes_[out.id].backward = [this, a, out] {
    const double g = nodes_[out.id].grad(0, 0);
    accumulate(a, Matrix::Constant(value(a).rows(), value(a).cols(), g));
  };
  return out;
}

Tape::Var Tape::bce(Var prob, double label) {
  require(value(prob).rows() == 1 && value(prob).cols() == 1, "bce expects a 1 x 1 probability");
  const double p = scalar(prob);
  Matrix l(1, 1);
  l(0, 0) = nn::bce(p, label);
  const Var out = push(std::move(l), needs(prob));
  nodes_[out.id].backward = [this, prob, out, p, label] {
    // The clamp is flat outside its range.
    if (p < kProbClamp || p > 1.0 - kProbClamp) return;
    Matrix g(1, 1);
    g(0, 0) = nodes_[out.id].grad(0, 0) * (p - label) / (p * (1.0 - p));
    accumulate(prob, g);
  };
  return out;
}

std::pair<Tape::Var, Tape::Var> Tape::lstm(Var x, Var h, Var c, Var wx, Var wh, Var b) {
  const Eigen::Index p = value(wh).rows();
  require(value(wx).cols() == 4 * p && value(wh).cols() == 4 * p && value(b).cols() == 4 * p,
          "lstm gate width mismatch");
  require(value(x).cols() == value(wx).rows(), "lstm input width mismatch");
  require(value(h).cols() == p && value(c).cols() == p, "lstm state width mismatch");

  // Pre-activations of all gates.
  Matrix pre = value(x) * value(wx) + value(h) * value(wh);
  pre.rowwise() += value(b).row(0);
  const Var gates = push(std::move(pre), needs(x) || needs(h) || needs(wx) || needs(wh) || needs(b));
  nodes_[gates.id].backward = [this, x, h, wx, wh, b, gates] {
    const Matrix& g = nodes_[gates.id].grad;
    accumulate(x, g * value(wx).transpose());
    accumulate(wx, value(x).transpose() * g);
    accumulate(h, g * value(wh).transpose());
    accumulate(wh, value(h).transpose() * g);
    accumulate(b, g.colwise().sum());
  };

  auto act = std::make_shared<Matrix>(value(gates).rows(), 4 * p);
  const Matrix& z = value(gates);
  act->leftCols(2 * p) = z.leftCols(2 * p).unaryExpr([](double v) { return nn::sigmoid(v); });
  act->middleCols(2 * p, p) = z.middleCols(2 * p, p).array().tanh().matrix();
  act->rightCols(p) = z.rightCols(p).unaryExpr([](double v) { return nn::sigmoid(v); });

  Matrix c_next = act->middleCols(p, p).cwiseProduct(value(c)) + act->leftCols(p).cwiseProduct(act->middleCols(2 * p, p));
  const Var cell = push(std::move(c_next), needs(gates) || needs(c));
  nodes_[cell.id].backward = [this, c, gates, cell, act, p] {
    const Matrix& dc = nodes_[cell.id].grad;
    accumulate(c, dc.cwiseProduct(act->middleCols(p, p)));
    if (!needs(gates)) return;
    Matrix& dz = grad_buffer(gates);
    const auto i = act->leftCols(p).array();
    const auto f = act->middleCols(p, p).array();
    const auto gg = act->middleCols(2 * p, p).array();
    dz.leftCols(p).array() += dc.array() * gg * i * (1.0 - i);
    dz.middleCols(p, p).array() += dc.array() * value(c).array() * f * (1.0 - f);
    dz.middleCols(2 * p, p).array() += dc.array() * i * (1.0 - gg.square());
  };

  auto tc = std::make_shared<Matrix>(value(cell).array().tanh().matrix());
  const Var hidden = push(act->rightCols(p).cwiseProduct(*tc), needs(cell));
  nodes_[hidden.id].backward = [this, gates, cell, hidden, act, tc, p] {
    const Matrix& dh = nodes_[hidden.id].grad;
    const auto o = act->rightCols(p).array();
    accumulate(cell, (dh.array() * o * (1.0 - tc->array().square())).matrix());
    if (!needs(gates)) return;
    grad_buffer(gates).rightCols(p).array() += dh.array() * tc->array() * o * (1.0 - o);
  };
  return {hidden, cell};
}

void Tape::backward(Var loss) {
  require(loss.id >= 0 && loss.id < static_cast<int>(nodes_.size()), "backward from unknown node");
  require(value(loss).rows() == 1 && value(loss).cols() == 1, "backward needs a scalar");
  require(needs(loss), "loss does not depend on any tracked leaf");
  nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.leaf) continue;
    if (n.backward && n.grad.size() > 0) n.backward();
    Node& again = nodes_[i];
    again.backward = nullptr;
    again.value.resize(0, 0);
    again.grad.resize(0, 0);
  }
}

Matrix Tape::grad(Var leaf) const {
  const Node& n = nodes_[leaf.id];
  if (n.grad.rows() == n.value.rows() && n.grad.cols() == n.value.cols()) return n.grad;
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

Matrix Tape::grad_of(const Matrix& p) const {
  auto it = param_index_.find(&p);
  if (it == param_index_.end()) return Matrix::Zero(p.rows(), p.cols());
  return grad(Var{it->second});
}

// ---- Layers

Linear make_linear(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Linear l{Matrix(in, out), Matrix::Zero(1, out)};
  for (Eigen::Index r = 0; r < in; ++r)
    for (Eigen::Index c = 0; c < out; ++c) l.w(r, c) = u(rng);
  return l;
}

Mlp make_mlp(const std::vector<Eigen::Index>& dims, std::mt19937_64& rng) {
  require(dims.size() >= 2, "an MLP needs input and output dims");
  Mlp m;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) m.layers.push_back(make_linear(dims[k], dims[k + 1], rng));
  return m;
}

LstmCell make_lstm(Eigen::Index in, Eigen::Index hidden, std::mt19937_64& rng) {
  // Each gate block is initialized as its own in x p (resp. p x p) matrix.
  LstmCell cell{Matrix(in, 4 * hidden), Matrix(hidden, 4 * hidden), Matrix::Zero(1, 4 * hidden)};
  for (int gate = 0; gate < 4; ++gate) {
    cell.wx.middleCols(gate * hidden, hidden) = make_linear(in, hidden, rng).w;
    cell.wh.middleCols(gate * hidden, hidden) = make_linear(hidden, hidden, rng).w;
  }
  return cell;
}

LayerNorm make_layernorm(Eigen::Index dim) { return {Matrix::Ones(1, dim), Matrix::Zero(1, dim)}; }

Matrix mlp_forward(const Mlp& mlp, const Matrix& x) {
  Matrix y = x;
  for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
    const auto& l = mlp.layers[k];
    require(y.cols() == l.w.rows(), "mlp input width mismatch");
    Matrix z = y * l.w;
    z.rowwise() += l.b.row(0);
    y = k + 1 < mlp.layers.size() ? Matrix(z.cwiseMax(0.0)) : std::move(z);
  }
  return y;
}

std::pair<Matrix, Matrix> lstm_step(const LstmCell& cell, const Matrix& x, const Matrix& h, const Matrix& c) {
  const Eigen::Index p = cell.hidden();
  require(x.cols() == cell.wx.rows(), "lstm input width mismatch");
  require(h.cols() == p && c.cols() == p, "lstm state width mismatch");
  Matrix z = x * cell.wx + h * cell.wh;
  z.rowwise() += cell.b.row(0);
  auto sig = [](double v) { return nn::sigmoid(v); };
  const Matrix i = z.leftCols(p).unaryExpr(sig);
  const Matrix f = z.middleCols(p, p).unaryExpr(sig);
  const Matrix g = z.middleCols(2 * p, p).array().tanh().matrix();
  const Matrix o = z.rightCols(p).unaryExpr(sig);
  Matrix c_next = f.cwiseProduct(c) + i.cwiseProduct(g);
  Matrix h_next = o.cwiseProduct(Matrix(c_next.array().tanh().matrix()));
  return {std::move(h_next), std::move(c_next)};
}

Matrix layernorm_forward(const LayerNorm& ln, const Matrix& x) {
  require(x.cols() >= 2, "layernorm needs at least two features");
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    y.row(r) = ((x.row(r).array() - mean) / std::sqrt(var + ln.eps)) * ln.gain.row(0).array() + ln.bias.row(0).array();
  }
  return y;
}

Tape::Var mlp_apply(Tape& t, const Mlp& mlp, Tape::Var x) {
  for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
    const auto& l = mlp.layers[k];
    x = t.linear(x, t.param(l.w), t.param(l.b), k + 1 < mlp.layers.size() ? Activation::relu : Activation::none);
  }
  return x;
}

std::pair<Tape::Var, Tape::Var> lstm_apply(Tape& t, const LstmCell& cell, Tape::Var x, Tape::Var h, Tape::Var c) {
  return t.lstm(x, h, c, t.param(cell.wx), t.param(cell.wh), t.param(cell.b));
}

Tape::Var layernorm_apply(Tape& t, const LayerNorm& ln, Tape::Var x) {
  return t.layernorm(x, t.param(ln.gain), t.param(ln.bias), ln.eps);
}

// ---- Optimizer

Adam::Adam(std::vector<Matrix*> params, Config cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto* p : params_) {
    m_.push_back(Matrix::Zero(p->rows(), p->cols()));
    v_.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
}

void Adam::step(const std::vector<Matrix>& grads, double lr, double weight_decay) {
  require(grads.size() == params_.size(), "gradient count does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    require(grads[k].rows() == params_[k]->rows() && grads[k].cols() == params_[k]->cols(),
            "gradient shape does not match parameter");
    m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * grads[k];
    v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * grads[k].cwiseProduct(grads[k]);
    const auto update = (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + cfg_.eps);
    params_[k]->array() -= lr * (update + weight_decay * params_[k]->array());
  }
}

double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0)
    for (auto& g : grads) g *= max_norm / norm;
  return norm;
}

}  // namespace cpg::nn
