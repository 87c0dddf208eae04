#pragma once

// Train-then-evaluate on prepared data, and the synthetic preset used by the
// acceptance runner and `kamg ablate --synthetic`.

#include <chrono>
#include <cstdint>
#include <ostream>
#include <vector>

#include "kamg/data/pipeline.hpp"
#include "kamg/data/synthetic.hpp"
#include "kamg/eval/evaluate.hpp"
#include "kamg/model/kamg.hpp"
#include "kamg/train/trainer.hpp"

namespace kamg {

struct RunResult {
  train::TrainResult trained;
  eval::MetricsReport report;
  double seconds = 0.0;
};

inline std::vector<const std::vector<std::size_t>*> doc_pointers(const train::SplitData& split) {
  std::vector<const std::vector<std::size_t>*> out;
  for (const auto& t : split.tokens) out.push_back(&t);
  return out;
}

inline eval::MetricsReport evaluate_split(const model::ModelParams& params, const data::PreparedData& prep,
                                          const train::SplitData& split, const eval::EvalOptions& opts,
                                          std::size_t max_len) {
  std::vector<std::vector<std::size_t>> toks;
  for (const auto& t : split.tokens) toks.push_back(train::truncate(t, max_len));
  std::vector<const std::vector<std::size_t>*> ptrs;
  for (const auto& t : toks) ptrs.push_back(&t);
  const Matrix scores = model::predict(params, prep.label_inputs(params.config), ptrs, prep.embeddings);
  return eval::evaluate_scores(scores, split.labels, prep.buckets, opts);
}

inline RunResult train_and_evaluate(const data::PreparedData& prep, const model::ModelConfig& mc,
                                    const train::TrainConfig& tc, const eval::EvalOptions& opts,
                                    std::ostream* log = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.trained = train::train(prep.train, prep.dev, prep.unseen, prep.label_inputs(mc), prep.embeddings, mc, tc, log);
  r.report = evaluate_split(r.trained.best, prep, prep.test, opts, tc.max_len);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Builds the vocabulary and embedding table for an in-memory synthetic
/// dataset and prepares it exactly as the file-based path would.
inline data::PreparedData prepare_synthetic(const data::SyntheticDataset& ds, const data::GraphOptions& gopts,
                                            std::size_t few_threshold, std::uint64_t seed) {
  const text::Vocab vocab = data::corpus_vocab(ds.corpus);
  Rng rng(seed);
  return data::prepare(ds.corpus, ds.taxonomy, text::table_from_vectors(ds.words, ds.word_vectors, vocab, rng), gopts,
                       few_threshold);
}

/// Desk-scale setting: 50 labels split 10 frequent / 5 few / 35 zero, so the
/// within-bucket random R@5 on the zero bucket is 5/35.
struct SyntheticPreset {
  data::SyntheticSpec synth;
  model::ModelConfig model;
  train::TrainConfig train;
  data::GraphOptions graphs;
  std::size_t few_threshold = 5;
  std::size_t k = 5;
};

inline SyntheticPreset synthetic_preset(std::uint64_t seed) {
  SyntheticPreset p;
  p.synth.frequent_labels = 10;
  p.synth.few_labels = 5;
  p.synth.zero_labels = 35;
  p.synth.related_overlap = 0.375;
  p.synth.seed = seed;

  p.model.embed_dim = p.synth.embed_dim;
  p.model.filters = 32;
  p.model.kernel_width = 3;
  p.model.gcn_hidden = 32;
  p.model.gcn_out = 32;
  p.model.fused_dim = 32;

  p.train.epochs = 10;
  p.train.seed = seed;
  p.train.dev_k = p.k;
  return p;
}

}  // namespace kamg
