#pragma once

// Turns a corpus, a taxonomy and a word-vector file into everything the
// model and the evaluator consume: vocabulary, embedding table, label
// vectors, the three label graphs, bucket assignment and encoded splits.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "kamg/data/corpus.hpp"
#include "kamg/eval/metrics.hpp"
#include "kamg/graphs/label_graph.hpp"
#include "kamg/model/kamg.hpp"
#include "kamg/text/embeddings.hpp"
#include "kamg/text/tfidf.hpp"
#include "kamg/text/vocab.hpp"
#include "kamg/train/trainer.hpp"

namespace kamg::data {

struct GraphOptions {
  std::size_t knn = 10;         // similarity neighbours per label
  double min_cosine = 0.3;      // similarity floor
};

struct PreparedData {
  text::Vocab vocab;
  text::EmbeddingTable embeddings;
  text::IdfTable idf;
  Matrix label_vectors;                 // L x d, row l = v_l
  std::vector<bool> label_no_coverage;  // description had no pretrained token
  std::map<graphs::GraphKind, graphs::LabelGraph> graphs;
  std::vector<std::size_t> train_freq;
  eval::BucketAssignment buckets;
  std::vector<bool> unseen;
  train::SplitData train, dev, test;

  /// Fingerprints of g, s, c (in that order) for checkpoint validation.
  std::vector<std::uint64_t> graph_hashes() const {
    std::vector<std::uint64_t> out;
    for (const auto& [kind, g] : graphs) out.push_back(g.fingerprint());
    return out;
  }

  model::LabelInputs label_inputs(const model::ModelConfig& c) const {
    return {label_vectors, model::prepare_branches(c, graphs)};
  }
};

inline train::SplitData encode_split(const Corpus& corpus, Split s, const text::Vocab& vocab) {
  train::SplitData out;
  for (const Document* d : corpus.split(s)) {
    out.tokens.push_back(vocab.encode(d->tokens));
    out.labels.push_back(d->labels);
  }
  return out;
}

/// Vocabulary over training documents and label descriptions.
inline text::Vocab corpus_vocab(const Corpus& corpus, std::size_t min_count = 1) {
  std::vector<text::TokenList> lists;
  for (const auto& d : corpus.documents)
    if (d.split == Split::train) lists.push_back(d.tokens);
  for (const auto& l : corpus.catalog.labels()) lists.push_back(l.description_tokens);
  return text::build_vocab(lists, min_count);
}

inline PreparedData prepare(const Corpus& corpus, const std::vector<graphs::TaxonomyEdge>& taxonomy,
                            text::EmbeddingTable embeddings, const GraphOptions& gopts, std::size_t few_threshold) {
  const std::size_t num_labels = corpus.catalog.size();
  if (num_labels == 0) throw InputError("prepare: empty label catalog");
  PreparedData p;
  p.vocab = embeddings.vocab;
  p.embeddings = std::move(embeddings);
  p.idf = text::compute_idf(corpus.catalog.descriptions());
  p.label_vectors = Matrix(num_labels, p.embeddings.dim);
  p.label_no_coverage.resize(num_labels);
  std::vector<Vector> vecs;
  for (std::size_t l = 0; l < num_labels; ++l) {
    auto le = text::label_embedding(corpus.catalog[l].description_tokens, p.embeddings, p.idf);
    std::copy(le.vec.begin(), le.vec.end(), p.label_vectors.row_span(l).begin());
    p.label_no_coverage[l] = le.no_coverage;
    vecs.push_back(std::move(le.vec));
  }

  p.train_freq = corpus.train_label_freq();
  p.buckets = eval::assign_buckets(p.train_freq, few_threshold);
  p.unseen.resize(num_labels);
  for (std::size_t l = 0; l < num_labels; ++l) p.unseen[l] = p.train_freq[l] == 0;

  std::vector<std::vector<std::size_t>> train_sets;
  for (const auto& d : corpus.documents)
    if (d.split == Split::train) train_sets.push_back(d.labels);

  p.graphs[graphs::GraphKind::hierarchy] = graphs::build_hierarchy_graph(taxonomy, corpus.catalog);
  p.graphs[graphs::GraphKind::similarity] = graphs::build_similarity_graph(vecs, gopts.knn, gopts.min_cosine);
  p.graphs[graphs::GraphKind::cooccurrence] = graphs::build_cooccurrence_graph(train_sets, num_labels, p.unseen);

  p.train = encode_split(corpus, Split::train, p.vocab);
  p.dev = encode_split(corpus, Split::dev, p.vocab);
  p.test = encode_split(corpus, Split::test, p.vocab);
  return p;
}

}  // namespace kamg::data
