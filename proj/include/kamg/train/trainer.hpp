#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kamg/errors.hpp"
#include "kamg/eval/evaluate.hpp"
#include "kamg/model/kamg.hpp"
#include "kamg/numerics/adam.hpp"
#include "kamg/numerics/rng.hpp"

namespace kamg::train {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 0.001;
  double dropout = 0.2;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  std::size_t max_len = 2500;
  std::size_t dev_k = 10;
  double clip_norm = 0.0;  // 0 disables global-norm gradient clipping

  void validate() const {
    if (batch_size < 1) throw InputError("train config: batch_size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("train config: dropout must be in [0, 1)");
    if (patience < 1) throw InputError("train config: patience must be >= 1");
    if (max_len < 1) throw InputError("train config: max_len must be >= 1");
    if (dev_k < 1) throw InputError("train config: dev_k must be >= 1");
    if (!(learning_rate > 0.0)) throw InputError("train config: learning_rate must be > 0");
  }
};

/// Token ids and gold label ids of one split.
struct SplitData {
  std::vector<std::vector<std::size_t>> tokens;
  std::vector<std::vector<std::size_t>> labels;

  std::size_t size() const noexcept { return tokens.size(); }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
  double seconds = 0.0;
  double graph_grad_norm = 0.0;  // accumulated L2 norm of GCN/fusion gradients
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // index into epochs; meaningless when empty
  double initial_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  model::ModelParams best;
  TrainHistory history;
};

/// Shuffled index batches; the last batch may be short.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t num_docs, std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw InputError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(num_docs);
  for (std::size_t i = 0; i < num_docs; ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < num_docs; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(num_docs, i + batch_size)));
  }
  return batches;
}

inline std::vector<std::size_t> truncate(const std::vector<std::size_t>& toks, std::size_t max_len) {
  if (toks.size() <= max_len) return toks;
  return {toks.begin(), toks.begin() + static_cast<std::ptrdiff_t>(max_len)};
}

/// Overall R@K on a split with frozen parameters.
inline double recall_overall(const model::ModelParams& params, const model::LabelInputs& inputs, const SplitData& split,
                             const text::EmbeddingTable& emb, std::size_t k, std::size_t max_len) {
  std::vector<std::vector<std::size_t>> toks;
  for (const auto& t : split.tokens) toks.push_back(truncate(t, max_len));
  std::vector<const std::vector<std::size_t>*> ptrs;
  for (const auto& t : toks) ptrs.push_back(&t);
  const Matrix scores = model::predict(params, inputs, ptrs, emb);
  eval::BucketAssignment all_frequent{std::vector<eval::Bucket>(inputs.num_labels(), eval::Bucket::frequent), 1};
  const auto report = eval::evaluate_scores(scores, split.labels, all_frequent, {{k}, eval::CandidateMode::within_bucket});
  const double r = report.value(eval::Group::overall, eval::Metric::recall, k);
  return std::isnan(r) ? 0.0 : r;
}

inline bool is_graph_param(const std::string& name) { return name.starts_with("gcn.") || name.starts_with("fuse."); }

/// Mini-batch Adam on the mean BCE over all labels (unseen ones as
/// negatives); keeps the parameters of the best dev epoch and stops after
/// `patience` epochs without improvement.
inline TrainResult train(const SplitData& train_split, const SplitData& dev_split, const std::vector<bool>& unseen,
                         const model::LabelInputs& inputs, const text::EmbeddingTable& emb, const model::ModelConfig& mc,
                         const TrainConfig& tc, std::ostream* log = nullptr) {
  tc.validate();
  mc.validate();
  if (unseen.size() != inputs.num_labels()) throw DimensionError("train: unseen mask size != label count");
  for (std::size_t d = 0; d < train_split.size(); ++d)
    for (std::size_t l : train_split.labels[d]) {
      if (l >= unseen.size()) throw InputError("train: label id out of range");
      if (unseen[l]) {
        throw ContractError("train: training document " + std::to_string(d) + " carries unseen label " + std::to_string(l));
      }
    }
  if (tc.epochs > 0 && (train_split.size() == 0 || dev_split.size() == 0)) {
    throw InputError("train: train and dev splits must be nonempty");
  }

  Rng root(tc.seed);
  Rng init_rng = root.fork(1);
  Rng shuffle_rng = root.fork(2);
  Rng dropout_rng = root.fork(3);

  model::ModelParams params = model::init_params(mc, init_rng);
  TrainResult result{params, {}};
  if (tc.epochs == 0) return result;

  std::vector<std::vector<std::size_t>> toks;
  for (const auto& t : train_split.tokens) toks.push_back(truncate(t, tc.max_len));

  AdamState adam = AdamState::for_params(params.values, AdamConfig{tc.learning_rate, 0.9, 0.999, 1e-8});
  double best_metric = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches = make_batches(train_split.size(), tc.batch_size, shuffle_rng);
    double loss_sum = 0.0;
    std::vector<double> graph_sq(params.values.size(), 0.0);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<const std::vector<std::size_t>*> docs, gold;
      for (std::size_t i : batches[b]) {
        docs.push_back(&toks[i]);
        gold.push_back(&train_split.labels[i]);
      }
      Tape tape;
      const ParamVars pv = tape.parameters(params.values);
      Var loss = model::batch_loss(tape, pv, mc, inputs, docs, gold, emb, {tc.dropout, &dropout_rng});
      const double lv = value(loss)[0];
      if (!std::isfinite(lv)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      if (epoch == 0 && b == 0) result.history.initial_loss = lv;
      ParameterSet grads = tape.backward(loss);
      for (std::size_t p = 0; p < grads.size(); ++p)
        for (double g : grads.value(p).data()) graph_sq[p] += g * g;
      if (tc.clip_norm > 0.0) {
        double sq = 0.0;
        for (std::size_t p = 0; p < grads.size(); ++p)
          for (double g : grads.value(p).data()) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > tc.clip_norm) {
          for (std::size_t p = 0; p < grads.size(); ++p)
            for (double& g : grads.value(p).data()) g *= tc.clip_norm / norm;
        }
      }
      adam_step(adam, params.values, grads);
      loss_sum += lv * static_cast<double>(docs.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_split.size());
    rec.dev_metric = recall_overall(params, inputs, dev_split, emb, tc.dev_k, tc.max_len);
    for (std::size_t p = 0; p < params.values.size(); ++p)
      if (is_graph_param(params.values.name(p))) rec.graph_grad_norm += graph_sq[p];
    rec.graph_grad_norm = std::sqrt(rec.graph_grad_norm);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(rec);
    if (log) {
      *log << nlohmann::json{{"epoch", rec.epoch}, {"loss", rec.train_loss}, {"dev_metric", rec.dev_metric},
                             {"seconds", rec.seconds}}
                  .dump()
           << '\n';
    }

    if (rec.dev_metric > best_metric) {
      best_metric = rec.dev_metric;
      result.best = params;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  return result;
}

}  // namespace kamg::train
