#include "cpgraph/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <stdexcept>

namespace cpg {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid training config: " + what); };
  if (!(lr >= 0.0)) fail("lr must be non-negative");
  if (!(weight_decay >= 0.0)) fail("weight decay must be non-negative");
  if (batch_size < 1) fail("batch size must be positive");
  if (max_epochs < 1) fail("max epochs must be positive");
  if (plateau_patience < 1) fail("plateau patience must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) fail("plateau factor must lie in (0, 1]");
  if (!(clip_norm > 0.0)) fail("clip norm must be positive");
  if (p < 2) fail("hidden size must be at least 2");
  if (iterations < 0) fail("iterations must be non-negative");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) fail("validation fraction must lie in [0, 1)");
  if (!(time_budget_seconds >= 0.0)) fail("time budget must be non-negative");
  if (threads < 1) fail("thread count must be positive");
}

std::string pair_key(const ExampleMeta& meta) {
  return meta.problem + "/" + std::to_string(meta.seed) + "/" + std::to_string(meta.pair);
}

std::vector<Sample> make_samples(const std::vector<LabeledExample>& examples) {
  std::vector<Sample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back({prepare(ex.graph), ex.label ? 1.0 : 0.0, pair_key(ex.meta)});
  return out;
}

Split split_by_pair(const std::vector<Sample>& samples, double val_fraction, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i].pair_key].push_back(i);
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [key, members] : groups) order.push_back(&members);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(order.size())));
  if (val_fraction > 0.0 && order.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, order.size() - 1);

  Split s;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& side = k < n_val ? s.val : s.train;
    side.insert(side.end(), order[k]->begin(), order[k]->end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

std::vector<double> predict(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx,
                            const GnnParams& params, int threads) {
  std::vector<double> probs(idx.size());
  const long n = static_cast<long>(idx.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (long k = 0; k < n; ++k) probs[static_cast<std::size_t>(k)] = forward(samples[idx[static_cast<std::size_t>(k)]].tensors, params);
  return probs;
}

Metrics evaluate(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx, const GnnParams& params,
                 int threads) {
  const auto probs = predict(samples, idx, params, threads);
  Metrics m;
  m.total = idx.size();
  std::size_t n_sat = 0, n_unsat = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double y = samples[idx[k]].label;
    const bool said_sat = probs[k] > 0.5;
    m.mean_loss += nn::bce(probs[k], y);
    if (y > 0.5) {
      ++n_sat;
      m.mean_prob_sat += probs[k];
      ++(said_sat ? m.true_pos : m.false_neg);
    } else {
      ++n_unsat;
      m.mean_prob_unsat += probs[k];
      ++(said_sat ? m.false_pos : m.true_neg);
    }
  }
  if (m.total > 0) {
    m.accuracy = static_cast<double>(m.true_pos + m.true_neg) / static_cast<double>(m.total);
    m.mean_loss /= static_cast<double>(m.total);
  }
  if (n_sat > 0) m.mean_prob_sat /= static_cast<double>(n_sat);
  if (n_unsat > 0) m.mean_prob_unsat /= static_cast<double>(n_unsat);
  return m;
}

Metrics evaluate(const std::vector<Sample>& samples, const GnnParams& params, int threads) {
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return evaluate(samples, all, params, threads);
}

BatchGradient batch_gradient(const std::vector<Sample>& samples, const std::vector<std::size_t>& batch,
                             const GnnParams& params, int threads) {
  BatchGradient out;
  if (batch.empty()) return out;
  auto add = [&](GradResult&& r) {
    out.loss_sum += r.loss;
    if (out.grads.empty()) {
      out.grads = std::move(r.grads);
    } else {
      for (std::size_t k = 0; k < out.grads.size(); ++k) out.grads[k] += r.grads[k];
    }
  };
  if (threads <= 1) {
    for (auto i : batch) add(loss_and_grad(samples[i].tensors, params, samples[i].label));
  } else {
    std::vector<GradResult> parts(batch.size());
    const long n = static_cast<long>(batch.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long k = 0; k < n; ++k) {
      const auto& s = samples[batch[static_cast<std::size_t>(k)]];
      parts[static_cast<std::size_t>(k)] = loss_and_grad(s.tensors, params, s.label);
    }
    for (auto& r : parts) add(std::move(r));
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : out.grads) g *= inv;
  return out;
}

namespace {

std::vector<Matrix*> param_ptrs(GnnParams& params) {
  std::vector<Matrix*> out;
  for (auto& [name, m] : params.named()) out.push_back(m);
  return out;
}

}  // namespace

TrainResult train(const std::vector<Sample>& samples, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  return train(samples, cfg, init_params(cfg.p, cfg.iterations, cfg.seed), on_epoch);
}

TrainResult train(const std::vector<Sample>& samples, const TrainConfig& cfg, GnnParams init,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  TrainResult res;
  res.split = split_by_pair(samples, cfg.val_fraction, cfg.seed ^ 0x5eedULL);
  if (res.split.train.empty()) throw std::invalid_argument("no training examples after the split");
  // Without a held-out side, selection falls back to the training set.
  const auto& select_on = res.split.val.empty() ? res.split.train : res.split.val;

  GnnParams params = std::move(init);
  nn::Adam opt(param_ptrs(params));
  std::mt19937_64 rng(cfg.seed ^ 0xba7c4ULL);
  double lr = cfg.lr;
  double best_val_loss = INFINITY;
  int stale = 0;
  std::vector<std::size_t> order = res.split.train;
  res.best = params;
  res.best_val_acc = -1.0;
  auto out_of_time = [&] { return cfg.time_budget_seconds > 0 && elapsed() >= cfg.time_budget_seconds; };

  for (int epoch = 1; epoch <= cfg.max_epochs && !res.stopped_by_budget; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
      // The budget covers optimisation only; a cut epoch is still validated and recorded.
      if (out_of_time()) {
        res.stopped_by_budget = true;
        break;
      }
      const std::size_t end = std::min(order.size(), off + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<std::size_t> batch(order.begin() + static_cast<long>(off), order.begin() + static_cast<long>(end));
      auto bg = batch_gradient(samples, batch, params, cfg.threads);
      loss_sum += bg.loss_sum;
      seen += batch.size();
      nn::clip_global_norm(bg.grads, cfg.clip_norm);
      opt.step(bg.grads, lr, cfg.weight_decay);
    }

    if (seen == 0) break;
    const Metrics val = evaluate(samples, select_on, params, cfg.threads);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.val_loss = val.mean_loss;
    rec.val_acc = val.accuracy;
    rec.lr = lr;
    rec.seconds = elapsed();
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (val.accuracy > res.best_val_acc) {
      res.best_val_acc = val.accuracy;
      res.best_epoch = epoch;
      res.best = params;
    }
    if (res.history.size() == 1 || val.mean_loss < best_val_loss - 1e-4 * std::abs(best_val_loss)) {
      best_val_loss = val.mean_loss;
      stale = 0;
    } else if (++stale >= cfg.plateau_patience) {
      lr = std::max(std::min(lr, cfg.min_lr), lr * cfg.plateau_factor);
      stale = 0;
    }
  }
  if (res.history.empty()) res.best_val_acc = 0.0;
  res.last = std::move(params);
  return res;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,val_acc,lr\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%.6f,%.6g\n", r.epoch, r.train_loss, r.val_loss, r.val_acc, r.lr);
    out += line;
  }
  return out;
}

}  // namespace cpg
