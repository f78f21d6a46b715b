#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "cpgraph/nn.hpp"

using namespace cpg::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)}); }

// Central differences of a scalar function of `x`, compared element by element
// with the tape gradient. Returns the worst relative error.
double check_input_grad(Matrix x, const std::function<Tape::Var(Tape&, Tape::Var)>& f) {
  Tape tape;
  const auto in = tape.input(x);
  tape.backward(f(tape, in));
  const Matrix analytic = tape.grad(in);

  auto eval = [&](const Matrix& m) {
    Tape t;
    return t.scalar(f(t, t.input(m)));
  };
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = eval(x);
    x.data()[i] = saved - h;
    const double down = eval(x);
    x.data()[i] = saved;
    const double numeric = (up - down) / (2 * h);
    if (std::abs(numeric) < 1e-7 && std::abs(analytic.data()[i]) < 1e-7) continue;
    worst = std::max(worst, rel_err(numeric, analytic.data()[i]));
  }
  return worst;
}

// Same against a parameter matrix, perturbed in place.
double check_param_grad(Matrix& p, const std::function<Tape::Var(Tape&)>& f) {
  Tape tape;
  tape.backward(f(tape));
  const Matrix analytic = tape.grad_of(p);
  auto eval = [&] {
    Tape t;
    return t.scalar(f(t));
  };
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double saved = p.data()[i];
    p.data()[i] = saved + h;
    const double up = eval();
    p.data()[i] = saved - h;
    const double down = eval();
    p.data()[i] = saved;
    const double numeric = (up - down) / (2 * h);
    if (std::abs(numeric) < 1e-7 && std::abs(analytic.data()[i]) < 1e-7) continue;
    worst = std::max(worst, rel_err(numeric, analytic.data()[i]));
  }
  return worst;
}

// Weighted sum so every output element carries a distinct gradient.
Tape::Var project(Tape& t, Tape::Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Matrix& v = t.value(y);
  return t.sum(t.mul(y, t.constant(random_matrix(v.rows(), v.cols(), rng))));
}

}  // namespace

TEST(Mlp, ZeroWeightsGiveLastBias) {
  std::mt19937_64 rng(1);
  Mlp m = make_mlp({3, 4, 2}, rng);
  for (auto& l : m.layers) l.w.setZero();
  m.layers[1].b << 0.25, -1.5;
  const Matrix y = mlp_forward(m, random_matrix(5, 3, rng));
  for (Eigen::Index r = 0; r < 5; ++r) {
    EXPECT_DOUBLE_EQ(y(r, 0), 0.25);
    EXPECT_DOUBLE_EQ(y(r, 1), -1.5);
  }
}

TEST(Mlp, IdentityLayer) {
  Mlp m{{Linear{Matrix::Identity(3, 3), Matrix::Zero(1, 3)}}};
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(4, 3, rng);
  EXPECT_EQ(mlp_forward(m, x), x);  // single layer is linear, negatives survive
}

TEST(Mlp, TwoLayerMatchesHandArithmetic) {
  std::mt19937_64 rng(42);
  Mlp m = make_mlp({3, 5, 2}, rng);
  m.layers[0].b = random_matrix(1, 5, rng);
  m.layers[1].b = random_matrix(1, 2, rng);
  const Matrix x = random_matrix(6, 3, rng);
  const Matrix y = mlp_forward(m, x);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double hidden[5];
    for (int j = 0; j < 5; ++j) {
      double s = m.layers[0].b(0, j);
      for (int i = 0; i < 3; ++i) s += x(r, i) * m.layers[0].w(i, j);
      hidden[j] = s > 0 ? s : 0;
    }
    for (int k = 0; k < 2; ++k) {
      double s = m.layers[1].b(0, k);
      for (int j = 0; j < 5; ++j) s += hidden[j] * m.layers[1].w(j, k);
      EXPECT_NEAR(y(r, k), s, 1e-12);
    }
  }
}

TEST(Init, GlorotBoundsAndZeroBias) {
  std::mt19937_64 rng(3);
  const Linear l = make_linear(20, 30, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  EXPECT_LE(l.w.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(l.w.cwiseAbs().maxCoeff(), 0.8 * bound);
  EXPECT_TRUE(l.b.isZero());
  const LayerNorm ln = make_layernorm(7);
  EXPECT_TRUE(ln.gain.isOnes());
  EXPECT_TRUE(ln.bias.isZero());
}

TEST(Lstm, AllZero) {
  LstmCell cell{Matrix::Zero(3, 8), Matrix::Zero(2, 8), Matrix::Zero(1, 8)};
  auto [h, c] = lstm_step(cell, Matrix::Zero(1, 3), Matrix::Zero(1, 2), Matrix::Zero(1, 2));
  EXPECT_TRUE(h.isZero());
  EXPECT_TRUE(c.isZero());

  // Gates all 0.5, candidate 0: c' = c / 2, h' = tanh(c') / 2.
  std::tie(h, c) = lstm_step(cell, Matrix::Zero(1, 3), Matrix::Zero(1, 2), Matrix::Ones(1, 2));
  EXPECT_DOUBLE_EQ(c(0, 0), 0.5);
  EXPECT_NEAR(h(0, 1), 0.5 * std::tanh(0.5), 1e-15);
}

TEST(Lstm, SaturatedForgetGateKeepsCell) {
  std::mt19937_64 rng(4);
  LstmCell cell = make_lstm(3, 2, rng);
  cell.b.setZero();
  cell.b.block(0, 0, 1, 2).setConstant(-30.0);  // input gate closed
  cell.b.block(0, 2, 1, 2).setConstant(30.0);   // forget gate open
  const Matrix c0 = (Matrix(1, 2) << 0.7, -1.2).finished();
  const auto [h, c] = lstm_step(cell, random_matrix(1, 3, rng, 0.1), random_matrix(1, 2, rng, 0.1), c0);
  EXPECT_NEAR(c(0, 0), 0.7, 1e-9);
  EXPECT_NEAR(c(0, 1), -1.2, 1e-9);
}

TEST(LayerNormTest, ConstantRowMapsToBias) {
  LayerNorm ln = make_layernorm(4);
  ln.bias << 1, 2, 3, 4;
  const Matrix y = layernorm_forward(ln, Matrix::Constant(2, 4, 5.0));
  EXPECT_TRUE(y.row(0).isApprox(ln.bias.row(0)));
}

TEST(LayerNormTest, PlusMinusOne) {
  const LayerNorm ln = make_layernorm(2);
  const Matrix y = layernorm_forward(ln, (Matrix(1, 2) << 1, -1).finished());
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y(0, 0), expected, 1e-12);
  EXPECT_NEAR(y(0, 1), -expected, 1e-12);
}

TEST(TapeForward, MatchesDirectEvaluation) {
  std::mt19937_64 rng(5);
  const Mlp m = make_mlp({4, 6, 3}, rng);
  const LstmCell cell = make_lstm(3, 2, rng);
  const LayerNorm ln = make_layernorm(3);
  const Matrix x = random_matrix(7, 4, rng), h = random_matrix(7, 2, rng), c = random_matrix(7, 2, rng);

  Tape t;
  const auto y = mlp_apply(t, m, t.constant(x));
  const auto n = layernorm_apply(t, ln, y);
  const auto [h1, c1] = lstm_apply(t, cell, n, t.constant(h), t.constant(c));

  const Matrix y_ref = mlp_forward(m, x);
  const Matrix n_ref = layernorm_forward(ln, y_ref);
  const auto [h_ref, c_ref] = lstm_step(cell, n_ref, h, c);
  EXPECT_LT((t.value(y) - y_ref).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((t.value(h1) - h_ref).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((t.value(c1) - c_ref).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gradients, ElementwiseOps) {
  std::mt19937_64 rng(6);
  const Matrix x = random_matrix(3, 4, rng);
  const Matrix w = random_matrix(4, 2, rng);
  EXPECT_LT(check_input_grad(x, [](Tape& t, Tape::Var v) { return project(t, t.sigmoid(v), 1); }), 1e-6);
  EXPECT_LT(check_input_grad(x, [](Tape& t, Tape::Var v) { return project(t, t.tanh(v), 2); }), 1e-6);
  EXPECT_LT(check_input_grad(x, [](Tape& t, Tape::Var v) { return project(t, t.mul(v, v), 3); }), 1e-6);
  EXPECT_LT(check_input_grad(x, [](Tape& t, Tape::Var v) { return project(t, t.add(v, t.scale(v, -2.5)), 4); }), 1e-6);
  EXPECT_LT(check_input_grad(x, [&](Tape& t, Tape::Var v) { return project(t, t.matmul(v, t.constant(w)), 5); }), 1e-6);
}

TEST(Gradients, StructuralOps) {
  std::mt19937_64 rng(7);
  const Matrix x = random_matrix(4, 6, rng);
  EXPECT_LT(check_input_grad(x,
                             [](Tape& t, Tape::Var v) {
                               const auto a = t.slice_cols(v, 1, 3);
                               const auto b = t.slice_cols(v, 4, 2);
                               return project(t, t.concat_cols({b, a, b}), 8);
                             }),
            1e-6);

  SparseMatrix a(3, 4);
  a.insert(0, 1) = 1;
  a.insert(0, 3) = 1;
  a.insert(2, 0) = 1;
  a.makeCompressed();
  EXPECT_LT(check_input_grad(x, [&](Tape& t, Tape::Var v) { return project(t, t.spmm(a, v), 9); }), 1e-6);
}

TEST(Gradients, LinearWithRelu) {
  std::mt19937_64 rng(8);
  Linear l = make_linear(5, 3, rng);
  l.b = random_matrix(1, 3, rng, 0.3);
  const Matrix x = random_matrix(6, 5, rng);
  auto f = [&](Tape& t) {
    return project(t, t.linear(t.constant(x), t.param(l.w), t.param(l.b), Activation::relu), 10);
  };
  EXPECT_LT(check_param_grad(l.w, f), 1e-4);
  EXPECT_LT(check_param_grad(l.b, f), 1e-4);
  EXPECT_LT(check_input_grad(x,
                             [&](Tape& t, Tape::Var v) {
                               return project(t, t.linear(v, t.constant(l.w), t.constant(l.b), Activation::relu), 10);
                             }),
            1e-4);
}

TEST(Gradients, LayerNorm) {
  std::mt19937_64 rng(9);
  LayerNorm ln = make_layernorm(5);
  ln.gain = random_matrix(1, 5, rng);
  ln.bias = random_matrix(1, 5, rng);
  const Matrix x = random_matrix(4, 5, rng, 2.0);
  EXPECT_LT(check_input_grad(x, [&](Tape& t, Tape::Var v) { return project(t, layernorm_apply(t, ln, v), 11); }), 1e-4);
  auto f = [&](Tape& t) { return project(t, layernorm_apply(t, ln, t.constant(x)), 11); };
  EXPECT_LT(check_param_grad(ln.gain, f), 1e-4);
  EXPECT_LT(check_param_grad(ln.bias, f), 1e-4);
}

TEST(Gradients, Lstm) {
  std::mt19937_64 rng(10);
  LstmCell cell = make_lstm(4, 3, rng);
  cell.b = random_matrix(1, 12, rng, 0.5);
  const Matrix x = random_matrix(5, 4, rng), h = random_matrix(5, 3, rng), c = random_matrix(5, 3, rng);

  // Both outputs contribute so the cell path and the hidden path are exercised.
  auto both = [](Tape& t, std::pair<Tape::Var, Tape::Var> hc) {
    return t.add(project(t, hc.first, 12), project(t, hc.second, 13));
  };
  EXPECT_LT(check_input_grad(x,
                             [&](Tape& t, Tape::Var v) {
                               return both(t, lstm_apply(t, cell, v, t.constant(h), t.constant(c)));
                             }),
            1e-4);
  EXPECT_LT(check_input_grad(h,
                             [&](Tape& t, Tape::Var v) {
                               return both(t, lstm_apply(t, cell, t.constant(x), v, t.constant(c)));
                             }),
            1e-4);
  EXPECT_LT(check_input_grad(c,
                             [&](Tape& t, Tape::Var v) {
                               return both(t, lstm_apply(t, cell, t.constant(x), t.constant(h), v));
                             }),
            1e-4);
  auto f = [&](Tape& t) { return both(t, lstm_apply(t, cell, t.constant(x), t.constant(h), t.constant(c))); };
  EXPECT_LT(check_param_grad(cell.wx, f), 1e-4);
  EXPECT_LT(check_param_grad(cell.wh, f), 1e-4);
  EXPECT_LT(check_param_grad(cell.b, f), 1e-4);
}

// Two recurrent steps through shared parameters into a BCE loss, over many seeds.
TEST(Gradients, RecurrentCompositeAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    Mlp m = make_mlp({3, 3, 3}, rng);
    LayerNorm ln = make_layernorm(3);
    LstmCell cell = make_lstm(3, 3, rng);
    Mlp head = make_mlp({3, 2, 1}, rng);
    for (auto& l : m.layers) l.b = random_matrix(1, l.b.cols(), rng, 0.2);
    const Matrix x = random_matrix(4, 3, rng);
    const double label = static_cast<double>(seed % 2);

    auto f = [&](Tape& t) {
      auto h = t.constant(x);
      auto c = t.constant(Matrix::Zero(4, 3));
      for (int step = 0; step < 2; ++step) std::tie(h, c) = lstm_apply(t, cell, layernorm_apply(t, ln, mlp_apply(t, m, h)), h, c);
      const auto s = t.scale(t.sum(mlp_apply(t, head, h)), 0.25);
      return t.bce(t.sigmoid(s), label);
    };
    for (Matrix* p : {&m.layers[0].w, &m.layers[1].b, &ln.gain, &cell.wx, &cell.wh, &cell.b, &head.layers[0].w})
      EXPECT_LT(check_param_grad(*p, f), 1e-4) << "seed " << seed;
  }
}

TEST(Tape, UnusedParameterHasZeroGrad) {
  const Matrix used = Matrix::Ones(1, 2), unused = Matrix::Ones(3, 3);
  Tape t;
  t.backward(t.sum(t.mul(t.param(used), t.param(used))));
  EXPECT_FALSE(t.uses(unused));
  EXPECT_TRUE(t.grad_of(unused).isZero());
  EXPECT_EQ(t.grad_of(unused).rows(), 3);
  EXPECT_TRUE(t.grad_of(used).isApprox(Matrix::Constant(1, 2, 2.0)));  // both uses accumulate
}

TEST(Bce, ValuesAndClamp) {
  EXPECT_NEAR(bce(0.5, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce(0.9, 0.0), -std::log(0.1), 1e-12);
  EXPECT_NEAR(bce(1.0, 0.0), -std::log(1e-7), 1e-6);
  EXPECT_TRUE(std::isfinite(bce(0.0, 1.0)));
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  Matrix w = (Matrix(1, 3) << 1.0, -2.0, 0.5).finished();
  Adam opt({&w});
  opt.step({(Matrix(1, 3) << 0.3, -7.0, 1e-3).finished()}, 0.01, 0.0);
  // m_hat / sqrt(v_hat) = sign(g) after one step, up to eps.
  EXPECT_NEAR(w(0, 0), 0.99, 1e-6);
  EXPECT_NEAR(w(0, 1), -1.99, 1e-6);
  EXPECT_NEAR(w(0, 2), 0.49, 1e-4);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(AdamTest, ZeroGradientOnlyDecays) {
  Matrix w = Matrix::Constant(2, 2, 4.0);
  Adam opt({&w});
  opt.step({Matrix::Zero(2, 2)}, 0.1, 0.0);
  EXPECT_TRUE(w.isApprox(Matrix::Constant(2, 2, 4.0)));
  opt.step({Matrix::Zero(2, 2)}, 0.01, 0.1);
  EXPECT_NEAR(w(1, 1), 4.0 * (1 - 0.01 * 0.1), 1e-15);
}

TEST(AdamTest, MinimizesQuadratic) {
  Matrix w = Matrix::Zero(1, 1);
  Adam opt({&w});
  for (int i = 0; i < 100; ++i) opt.step({Matrix::Constant(1, 1, 2.0 * (w(0, 0) - 3.0))}, 0.1, 0.0);
  EXPECT_NEAR(w(0, 0), 3.0, 0.1);
}

TEST(Clip, ScalesOnlyAboveThreshold) {
  std::vector<Matrix> g = {Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 4.0)};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 10.0), 5.0);
  EXPECT_DOUBLE_EQ(g[1](0, 0), 4.0);
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0](0, 0), 0.6, 1e-15);
  EXPECT_NEAR(g[1](0, 0), 0.8, 1e-15);
}
