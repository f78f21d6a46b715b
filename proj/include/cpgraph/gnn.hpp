#pragma once

// Typed recurrent message passing over an encoded graph.
//
//   h0_t      = F_t P_t + b_t                          (per-type projection)
//   mu_{t1,v} = concat over t2 of MLPin_{t1,t2}( sum of h_{t2,u}, u ~ v )
//   (h, c)_t  = LSTM_t( LayerNorm_t(mu_t), (h, c)_t )  repeated I times
//   y         = sigmoid( sum_t sum_v MLPout_t(h_{t,v}) / (5 |V|) )

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpgraph/encoder.hpp"
#include "cpgraph/nn.hpp"

namespace cpg {

using nn::Matrix;
using nn::SparseMatrix;

struct GnnParams {
  int p = 0;
  int iterations = 0;
  std::uint32_t schema_version = kFeatureSchemaVersion;

  std::array<nn::Linear, kVertexTypeCount> proj;                           // feature dim -> p
  std::array<std::array<nn::Mlp, kVertexTypeCount>, kVertexTypeCount> msg;  // [t1][t2], p -> p -> p
  std::array<nn::LayerNorm, kVertexTypeCount> norm;                        // over 5p
  std::array<nn::LstmCell, kVertexTypeCount> lstm;                         // 5p -> p
  std::array<nn::Mlp, kVertexTypeCount> out;                               // p -> p -> 1

  // Every trainable matrix with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> named();
  std::vector<std::pair<std::string, const Matrix*>> named() const;
  std::size_t parameter_count() const;
};

// Glorot-uniform weights, zero biases, unit LayerNorm gains.
GnnParams init_params(int p, int iterations, std::uint64_t seed);

// Per-type feature matrices and the 25 typed adjacency blocks of a graph.
struct GraphTensors {
  std::array<std::uint32_t, kVertexTypeCount> counts{};
  std::array<Matrix, kVertexTypeCount> features;
  std::array<std::array<SparseMatrix, kVertexTypeCount>, kVertexTypeCount> adj;  // counts[t1] x counts[t2]

  std::uint32_t num_vertices() const;
};

GraphTensors prepare(const EncodedGraph& g);

// Probability that the instance is satisfiable. Throws std::invalid_argument
// when the graph's feature dims do not match the parameters' schema.
double forward(const GraphTensors& g, const GnnParams& params);

// Straightforward per-vertex loops over plain vectors; kept as an independent
// check of the batched implementation.
double forward_reference(const EncodedGraph& g, const GnnParams& params);

struct GradResult {
  double prob = 0.5;
  double loss = 0.0;
  std::vector<Matrix> grads;  // aligned with GnnParams::named()
};

// Binary cross-entropy against `label` and its gradient for every parameter.
GradResult loss_and_grad(const GraphTensors& g, const GnnParams& params, double label);

// ---- Checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const GnnParams& params);
GnnParams deserialize_checkpoint(std::string_view bytes);  // FormatError on mismatch
void save_checkpoint(const GnnParams& params, const std::string& path);
GnnParams load_checkpoint(const std::string& path);

}  // namespace cpg
