#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cpgraph/generators.hpp"
#include "cpgraph/gnn.hpp"

namespace cpg {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-8;
  int batch_size = 32;
  int max_epochs = 50;
  int plateau_patience = 3;     // epochs without val-loss improvement before decaying
  double plateau_factor = 0.5;
  double min_lr = 1e-7;
  double clip_norm = 10.0;
  std::uint64_t seed = 0;
  int p = 64;
  int iterations = 16;
  double val_fraction = 0.2;
  double time_budget_seconds = 0.0;  // 0 = unlimited; checked before every batch
  int threads = 1;                   // >1 evaluates batch members concurrently

  void validate() const;  // std::invalid_argument
};

struct Sample {
  GraphTensors tensors;
  double label = 0.0;
  std::string pair_key;  // both members of a generated pair share it
};

std::string pair_key(const ExampleMeta& meta);
std::vector<Sample> make_samples(const std::vector<LabeledExample>& examples);

struct Split {
  std::vector<std::size_t> train, val;
};

// Assigns whole pairs to one side. With val_fraction > 0 at least one pair
// is held out when there are two or more pairs.
Split split_by_pair(const std::vector<Sample>& samples, double val_fraction, std::uint64_t seed);

struct Metrics {
  std::size_t total = 0;
  std::size_t true_pos = 0, true_neg = 0, false_pos = 0, false_neg = 0;  // positive = satisfiable
  double accuracy = 0.0;
  double mean_loss = 0.0;
  double mean_prob_sat = 0.0;    // over label-1 examples
  double mean_prob_unsat = 0.0;  // over label-0 examples
};

std::vector<double> predict(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx,
                            const GnnParams& params, int threads = 1);
Metrics evaluate(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx, const GnnParams& params,
                 int threads = 1);
Metrics evaluate(const std::vector<Sample>& samples, const GnnParams& params, int threads = 1);

// Mean gradient over a batch. Per-sample gradients are reduced in batch order,
// so the result does not depend on the thread count.
struct BatchGradient {
  std::vector<Matrix> grads;
  double loss_sum = 0.0;
};
BatchGradient batch_gradient(const std::vector<Sample>& samples, const std::vector<std::size_t>& batch,
                             const GnnParams& params, int threads = 1);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
  double seconds = 0.0;  // wall clock since training started
};

struct TrainResult {
  GnnParams best;
  GnnParams last;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  bool stopped_by_budget = false;
  Split split;
};

// Mini-batch Adam with plateau decay; keeps the parameters of the epoch with
// the highest validation accuracy (earliest on ties).
TrainResult train(const std::vector<Sample>& samples, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});
// Continues from given parameters; p and I come from them rather than cfg.
TrainResult train(const std::vector<Sample>& samples, const TrainConfig& cfg, GnnParams init,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace cpg
