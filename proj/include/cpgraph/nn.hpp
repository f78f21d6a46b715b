#pragma once

// Small reverse-mode differentiation engine over row-major double matrices.
// Rows are samples (graph vertices), columns are features; a linear layer
// computes x * W + b with b a 1 x out row.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cpg::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Activation { none, relu };

class Tape {
 public:
  struct Var {
    int id = -1;
  };

  // Leaf bound to parameter storage. Repeated calls with the same matrix
  // return the same leaf, so gradients from every use accumulate.
  Var param(const Matrix& p);
  // Leaf whose gradient is tracked (for checks with respect to inputs).
  Var input(Matrix m);
  Var constant(Matrix m);

  Var matmul(Var a, Var b);
  Var linear(Var x, Var w, Var b, Activation act = Activation::none);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  // n copies of a 1 x d row.
  Var broadcast_rows(Var row, Eigen::Index n);
  // a * h for a fixed sparse a; `a` must outlive the tape.
  Var spmm(const SparseMatrix& a, Var h);
  // Row-wise (x - mean) / sqrt(var + eps) * gain + bias.
  Var layernorm(Var x, Var gain, Var bias, double eps = 1e-5);
  Var sum(Var a);  // 1 x 1
  // Binary cross-entropy of a 1 x 1 probability, clamped to [1e-7, 1 - 1e-7].
  Var bce(Var prob, double label);

  // Gate order i, f, g, o; wx: in x 4p, wh: p x 4p, b: 1 x 4p. Returns (h', c').
  std::pair<Var, Var> lstm(Var x, Var h, Var c, Var wx, Var wh, Var b);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value(0, 0); }

  // Reverse sweep from a 1 x 1 node. Intermediate values and gradients are
  // released as the sweep passes them; leaf gradients are kept.
  void backward(Var loss);

  // Gradient of a leaf; zero matrix of the leaf's shape if it was not reached.
  Matrix grad(Var leaf) const;
  // Gradient of a parameter bound with param(); zero if never used.
  Matrix grad_of(const Matrix& p) const;
  bool uses(const Matrix& p) const { return param_index_.count(&p) != 0; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> backward;
    bool leaf = false;
    bool needs_grad = false;
  };

  Var push(Matrix value, bool needs_grad, bool leaf = false);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  Matrix& grad_buffer(Var v);  // zero-initialized on first use
  template <class E>
  void accumulate(Var v, const E& expr);

  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, int> param_index_;
};

// ---- Layers with parameters stored as plain matrices.

struct Linear {
  Matrix w;  // in x out
  Matrix b;  // 1 x out
};

// Hidden layers use ReLU, the last layer is linear.
struct Mlp {
  std::vector<Linear> layers;
};

struct LstmCell {
  Matrix wx;  // in x 4p
  Matrix wh;  // p x 4p
  Matrix b;   // 1 x 4p
  Eigen::Index hidden() const { return wh.rows(); }
};

struct LayerNorm {
  Matrix gain;  // 1 x d
  Matrix bias;  // 1 x d
  double eps = 1e-5;
};

Linear make_linear(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng);  // Glorot-uniform, zero bias
Mlp make_mlp(const std::vector<Eigen::Index>& dims, std::mt19937_64& rng);
LstmCell make_lstm(Eigen::Index in, Eigen::Index hidden, std::mt19937_64& rng);
LayerNorm make_layernorm(Eigen::Index dim);

// Direct evaluation, row-wise on a batch.
Matrix mlp_forward(const Mlp& mlp, const Matrix& x);
std::pair<Matrix, Matrix> lstm_step(const LstmCell& cell, const Matrix& x, const Matrix& h, const Matrix& c);
Matrix layernorm_forward(const LayerNorm& ln, const Matrix& x);

// The same layers recorded on a tape.
Tape::Var mlp_apply(Tape& t, const Mlp& mlp, Tape::Var x);
std::pair<Tape::Var, Tape::Var> lstm_apply(Tape& t, const LstmCell& cell, Tape::Var x, Tape::Var h, Tape::Var c);
Tape::Var layernorm_apply(Tape& t, const LayerNorm& ln, Tape::Var x);

inline constexpr double kProbClamp = 1e-7;

double sigmoid(double x);
double bce(double prob, double label);
// Probability clamped to [kProbClamp, 1 - kProbClamp].
double clamp_prob(double prob);

// ---- Optimizer

// Adam with bias correction and decoupled weight decay.
class Adam {
 public:
  struct Config {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(std::vector<Matrix*> params) : Adam(std::move(params), Config{}) {}
  Adam(std::vector<Matrix*> params, Config cfg);

  void step(const std::vector<Matrix>& grads, double lr, double weight_decay);
  long steps() const { return t_; }

  // Moments, for checkpointing or inspection.
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  std::vector<Matrix*> params_;
  Config cfg_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

// Scales `grads` in place so their joint L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_global_norm(std::vector<Matrix>& grads, double max_norm);

}  // namespace cpg::nn
