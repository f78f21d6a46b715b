#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <set>

#include "cpgraph/generators.hpp"
#include "cpgraph/gnn.hpp"
#include "cpgraph/graph_io.hpp"
#include "support.hpp"

using namespace cpg;

namespace {

constexpr int VAR = 0, VAL = 1, MOD = 4;

// One VAR joined to one VAL and to the MOD vertex.
EncodedGraph three_vertex_graph() {
  EncodedGraph g;
  g.counts = {1, 1, 0, 0, 1};
  g.features[VAR] = {1.0, 0.0, 0.5};
  g.features[VAL] = {0.5, 0.0, 0.0, 0.0, 0.0};
  g.features[MOD] = {0.0, 1.0, 0.0};
  g.edges = {{0, 1}, {0, 2}};
  g.provenance = {"x", "1", "M"};
  return g;
}

Matrix eye(int n) { return Matrix::Identity(n, n); }

// Weights for the hand trace below; p = 2, I = 1.
GnnParams hand_params() {
  GnnParams w = init_params(2, 1, 0);
  for (int t = 0; t < kVertexTypeCount; ++t) {
    w.proj[t].w.setZero();
    w.proj[t].w(0, 0) = 1.0;
    w.proj[t].w(1, 1) = 1.0;
    w.proj[t].b.setZero();
    for (int t2 = 0; t2 < kVertexTypeCount; ++t2)
      for (auto& l : w.msg[t][t2].layers) l = {eye(2), Matrix::Zero(1, 2)};
    for (int j = 0; j < 10; ++j)
      for (int k = 0; k < 8; ++k) {
        const int r = (j + k) % 3;
        w.lstm[t].wx(j, k) = r == 0 ? 0.5 : r == 1 ? -0.25 : 0.0;
      }
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 8; ++k) w.lstm[t].wh(j, k) = 0.1 * (k - 3.5) * (j == 0 ? 1 : -1);
    w.lstm[t].b << 0, 0, 1, 1, 0, 0, 0, 0;
    w.out[t].layers[0] = {-eye(2), Matrix::Zero(1, 2)};
    w.out[t].layers[1] = {(Matrix(2, 1) << 1, -1).finished(), Matrix::Constant(1, 1, 0.1)};
  }
  return w;
}

std::vector<EncodedGraph> corpus(std::uint64_t seed, int per_problem) {
  std::vector<EncodedGraph> out;
  const std::pair<Problem, int> specs[] = {
      {Problem::sat, 3}, {Problem::tsp_ext, 4}, {Problem::tsp_elem, 4}, {Problem::col, 5}, {Problem::knap, 4}};
  for (const auto& [problem, size] : specs)
    for (int k = 0; k < per_problem; ++k) {
      const auto [sat, unsat] = generate_pair(problem, size, seed, static_cast<std::uint64_t>(k));
      out.push_back(encode(sat.instance));
      out.push_back(encode(unsat.instance));
    }
  return out;
}

}  // namespace

TEST(GnnParamsTest, SameSeedSameParams) {
  const auto a = init_params(8, 2, 11), b = init_params(8, 2, 11), c = init_params(8, 2, 12);
  EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
  EXPECT_NE(serialize_checkpoint(a), serialize_checkpoint(c));
}

TEST(GnnParamsTest, Structure) {
  const auto w = init_params(8, 3, 1);
  for (int t1 = 0; t1 < kVertexTypeCount; ++t1) {
    EXPECT_EQ(w.proj[t1].w.rows(), feature_dim(kVertexTypes[t1]));
    EXPECT_EQ(w.lstm[t1].wx.rows(), 40);
    EXPECT_EQ(w.lstm[t1].hidden(), 8);
    EXPECT_EQ(w.norm[t1].gain.cols(), 40);
    EXPECT_EQ(w.out[t1].layers.back().w.cols(), 1);
    for (int t2 = 0; t2 < kVertexTypeCount; ++t2) {
      EXPECT_EQ(w.msg[t1][t2].layers.front().w.rows(), 8);
      EXPECT_EQ(w.msg[t1][t2].layers.back().w.cols(), 8);
    }
  }
  EXPECT_THROW(init_params(1, 2, 0), std::invalid_argument);
}

TEST(GnnParamsTest, ParameterCountClosedForm) {
  const std::size_t p = 8;
  const std::size_t feat = 3 + 5 + 19 + 20 + 3;
  const std::size_t expected = (feat * p + 5 * p)                          // projections
                               + 25 * 2 * (p * p + p)                      // message MLPs
                               + 5 * 2 * (5 * p)                           // layer norms
                               + 5 * (5 * p * 4 * p + p * 4 * p + 4 * p)   // LSTMs
                               + 5 * ((p * p + p) + (p + 1));              // output MLPs
  EXPECT_EQ(init_params(8, 1, 0).parameter_count(), expected);
  EXPECT_EQ(expected, 12685u);
}

TEST(GnnParamsTest, NamesAreUniqueAndStable) {
  auto w = init_params(4, 1, 0);
  const auto named = w.named();
  std::set<std::string> names;
  for (const auto& [n, m] : named) names.insert(n);
  EXPECT_EQ(names.size(), named.size());
  EXPECT_EQ(named.front().first, "proj.VAR.w");
  EXPECT_EQ(named.back().first, "out.MOD.l1.b");
}

TEST(Forward, ZeroOutputMlpGivesHalf) {
  const auto g = prepare(encode(cpg::testing::two_var_instance({1, 2}, {2, 3})));
  for (int iterations : {0, 3}) {
    auto w = init_params(8, iterations, 5);
    for (auto& m : w.out)
      for (auto& l : m.layers) {
        l.w.setZero();
        l.b.setZero();
      }
    EXPECT_DOUBLE_EQ(forward(g, w), 0.5);
  }
}

TEST(Forward, NoIterationsReadsProjectedFeatures) {
  const EncodedGraph eg = three_vertex_graph();
  const auto w = init_params(4, 0, 3);
  double total = 0.0;
  for (int t : {VAR, VAL, MOD}) {
    Matrix f = Eigen::Map<const Matrix>(eg.features[t].data(), 1, feature_dim(kVertexTypes[t]));
    Matrix h = f * w.proj[t].w + w.proj[t].b;
    total += nn::mlp_forward(w.out[t], h)(0, 0);
  }
  EXPECT_NEAR(forward(prepare(eg), w), 1.0 / (1.0 + std::exp(-total / 15.0)), 1e-15);
}

// p = 2, I = 1. Projections copy the first two features, message MLPs are
// identities, LayerNorm is plain, the readout is relu(-h) . (1, -1) + 0.1.
//
//   h0:  x = (1, 0)   v = (0.5, 0)   M = (0, 1)
//   mu:  x = [0 0 | 0.5 0 | 0 0 | 0 0 | 0 1]
//        v = M = [1 0 | 0 0 | 0 0 | 0 0 | 0 0]
//   LN(mu_x) = (-0.468498432641 x8 except 1.093163009496 at 3, 2.654824451633 at 10)
//   LN(mu_v) = (2.999833347221, -0.333314816358 x9)
//   gates z_x = (0.626038401336, -0.484249216321 | 0.108210814985, 1.926038401336 |
//                -0.184249216321, -0.591789185015 | 1.226038401336, 0.115750783679)
//   h1:  x = (-0.09135251236268824, -0.10566930975470032)
//        v = (-0.4053355424152514, -0.012929162036757062)
//        M = (-0.4181386707140427, -0.024972422223351998)
//   nu = (0.08568320260798792, 0.4924063803784944, 0.4931662484906907)
//   y  = sigmoid(sum(nu) / 15) = 0.51784667907542614
TEST(Forward, HandComputedTrace) {
  const auto g = prepare(three_vertex_graph());
  const auto w = hand_params();
  EXPECT_NEAR(forward(g, w), 0.51784667907542614, 1e-14);
  EXPECT_NEAR(forward_reference(three_vertex_graph(), w), 0.51784667907542614, 1e-14);

  // The hidden state of the VAR vertex after one step.
  Matrix mu = Matrix::Zero(1, 10);
  mu(0, 2) = 0.5;
  mu(0, 9) = 1.0;
  const auto [h, c] =
      nn::lstm_step(w.lstm[VAR], nn::layernorm_forward(w.norm[VAR], mu), (Matrix(1, 2) << 1, 0).finished(), Matrix::Zero(1, 2));
  EXPECT_NEAR(h(0, 0), -0.09135251236268824, 1e-14);
  EXPECT_NEAR(h(0, 1), -0.10566930975470032, 1e-14);
  EXPECT_NEAR(c(0, 0), -0.11871472834665033, 1e-14);
}

TEST(Forward, MatchesPerVertexReference) {
  const auto w = init_params(6, 3, 21);
  for (const auto& eg : corpus(4, 2)) {
    const auto g = prepare(eg);
    const double fast = forward(g, w);
    EXPECT_NEAR(fast, forward_reference(eg, w), 1e-12);
    EXPECT_NEAR(loss_and_grad(g, w, 1.0).prob, fast, 1e-12);
  }
}

TEST(Forward, PermutationInvariance) {
  const auto w = init_params(8, 4, 8);
  std::mt19937_64 rng(99);
  const auto graphs = corpus(17, 5);
  ASSERT_EQ(graphs.size(), 50u);
  double worst = 0.0;
  for (const auto& eg : graphs) {
    const auto perm = random_type_preserving_permutation(eg, rng);
    worst = std::max(worst, std::abs(forward(prepare(eg), w) - forward(prepare(permute_vertices(eg, perm)), w)));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Forward, EmptyNeighbourhoodsAndRange) {
  Instance inst;
  inst.vars.push_back({"x", VarKind::integer, {4}});
  const auto eg = encode(inst);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto w = init_params(4, 2, seed);
    const double y = forward(prepare(eg), w);
    EXPECT_GT(y, 0.0);
    EXPECT_LT(y, 1.0);
    EXPECT_NEAR(y, forward_reference(eg, w), 1e-12);
  }
}

TEST(Forward, SaturatedOutputStaysInsideUnitInterval) {
  auto w = init_params(4, 1, 0);
  for (auto& m : w.out) m.layers.back().b.setConstant(1e6);
  const double y = forward(prepare(three_vertex_graph()), w);
  EXPECT_LT(y, 1.0);
  EXPECT_GT(y, 0.999);
}

TEST(Forward, SchemaMismatchThrows) {
  auto g = prepare(three_vertex_graph());
  g.features[VAR] = Matrix::Zero(1, 4);
  EXPECT_THROW(forward(g, init_params(4, 1, 0)), std::invalid_argument);
}

// Central differences over every parameter of a p = 2, I = 2 model.
TEST(Gradient, EndToEndMatchesFiniteDifferences) {
  const auto g = prepare(three_vertex_graph());
  auto w = init_params(2, 2, 7);
  std::mt19937_64 rng(70);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& [name, m] : w.named())
    if (name.find(".b") != std::string::npos || name.find("gain") != std::string::npos)
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += u(rng);

  for (double label : {0.0, 1.0}) {
    const auto analytic = loss_and_grad(g, w, label);
    const auto named = w.named();
    ASSERT_EQ(analytic.grads.size(), named.size());
    const double h = 1e-5;
    double worst = 0.0;
    std::string worst_name;
    std::size_t checked = 0;
    for (std::size_t k = 0; k < named.size(); ++k) {
      Matrix& m = *named[k].second;
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double saved = m.data()[i];
        m.data()[i] = saved + h;
        const double up = nn::bce(forward(g, w), label);
        m.data()[i] = saved - h;
        const double down = nn::bce(forward(g, w), label);
        m.data()[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double a = analytic.grads[k].data()[i];
        if (std::abs(numeric) < 1e-9 && std::abs(a) < 1e-9) continue;
        const double err = std::abs(numeric - a) / std::max(std::abs(numeric), std::abs(a));
        ++checked;
        if (err > worst) {
          worst = err;
          worst_name = named[k].first;
        }
      }
    }
    EXPECT_LT(worst, 1e-4) << "worst at " << worst_name;
    // Types absent from the graph (CST, OPE) legitimately carry no gradient.
    EXPECT_GT(checked, 400u);
  }
}

TEST(Gradient, LossMatchesForward) {
  const auto w = init_params(4, 2, 1);
  const auto g = prepare(three_vertex_graph());
  const auto r = loss_and_grad(g, w, 1.0);
  EXPECT_NEAR(r.loss, -std::log(forward(g, w)), 1e-13);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const auto w = init_params(8, 3, 2);
  const auto path = (std::filesystem::temp_directory_path() / "cpgraph_ckpt_test.bin").string();
  save_checkpoint(w, path);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.p, 8);
  EXPECT_EQ(back.iterations, 3);
  for (const auto& eg : corpus(3, 1)) {
    const auto g = prepare(eg);
    const double a = forward(g, w), b = forward(g, back);
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(w));
}

TEST(Checkpoint, RejectsDamage) {
  const std::string bytes = serialize_checkpoint(init_params(4, 1, 0));
  auto kind_of = [](const std::string& b) {
    try {
      deserialize_checkpoint(b);
    } catch (const FormatError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  std::string wrong_version = bytes;
  wrong_version[4] = 9;
  EXPECT_EQ(kind_of(wrong_version), static_cast<int>(FormatError::Kind::version_mismatch));
  std::string wrong_schema = bytes;
  wrong_schema[16] = 7;
  EXPECT_EQ(kind_of(wrong_schema), static_cast<int>(FormatError::Kind::version_mismatch));
  EXPECT_EQ(kind_of(bytes.substr(0, bytes.size() - 3)), static_cast<int>(FormatError::Kind::truncated));
  EXPECT_EQ(kind_of("XXXX" + bytes.substr(4)), static_cast<int>(FormatError::Kind::malformed));
  EXPECT_EQ(kind_of(bytes + "z"), static_cast<int>(FormatError::Kind::malformed));
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/ckpt.bin"), std::runtime_error);
}
