#pragma once

// Synthetic multi-label corpora with a known zero-shot structure.
//
// Every label owns a set of topic words and its description lists them.
// A zero-bucket label borrows a fraction of its words from its taxonomy
// parent (a seen label), so both the hierarchy and the description
// similarity carry information about it. Word vectors are a per-label
// centroid plus small noise, so words of one topic cluster.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "kamg/data/corpus.hpp"
#include "kamg/errors.hpp"
#include "kamg/graphs/label_graph.hpp"
#include "kamg/numerics/rng.hpp"
#include "kamg/text/embeddings.hpp"

namespace kamg::data {

struct SyntheticSpec {
  std::size_t frequent_labels = 30;
  std::size_t few_labels = 10;
  std::size_t zero_labels = 10;
  std::size_t words_per_topic = 8;
  double parent_overlap = 0.5;     // share of a zero label's words taken from its parent
  double related_overlap = 0.25;   // share taken from a seen label outside the parent's taxonomy group
  double group_affinity = 0.7;     // chance that a document's extra labels come from its first label's group
  std::size_t noise_vocab = 200;
  double noise_rate = 0.3;         // expected share of noise tokens in a document
  std::size_t tokens_per_label = 10;
  std::size_t max_labels_per_doc = 3;
  std::size_t train_docs = 2000;
  std::size_t dev_docs = 200;
  std::size_t test_docs = 400;
  double zero_doc_rate = 0.5;      // share of dev/test documents that carry a zero label
  std::size_t few_max_freq = 5;    // few labels get 1..few_max_freq training documents
  std::size_t group_size = 5;      // frequent labels under one internal taxonomy node
  std::size_t embed_dim = 32;
  double embed_noise = 0.3;
  std::uint64_t seed = 1;

  void validate() const {
    if (frequent_labels + few_labels + zero_labels == 0) throw InputError("synthetic: no labels");
    if (zero_labels > 0 && frequent_labels == 0) {
      throw InputError("synthetic: zero-shot labels need a seen neighbour, but there are no frequent labels");
    }
    if (few_labels > 0 && frequent_labels == 0) throw InputError("synthetic: few labels need a frequent parent");
    if (!(parent_overlap >= 0.0 && related_overlap >= 0.0 && parent_overlap + related_overlap <= 1.0)) {
      throw InputError("synthetic: parent_overlap and related_overlap must be >= 0 with sum <= 1");
    }
    if (!(group_affinity >= 0.0 && group_affinity <= 1.0)) throw InputError("synthetic: group_affinity must be in [0,1]");
    if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw InputError("synthetic: noise_rate must be in [0,1)");
    if (noise_rate > 0.0 && noise_vocab == 0) throw InputError("synthetic: noise_rate > 0 needs a noise vocabulary");
    if (words_per_topic == 0 || tokens_per_label == 0) throw InputError("synthetic: topic sizes must be >= 1");
    if (max_labels_per_doc == 0) throw InputError("synthetic: max_labels_per_doc must be >= 1");
    if (embed_dim == 0) throw InputError("synthetic: embed_dim must be >= 1");
    if (few_max_freq == 0) throw InputError("synthetic: few_max_freq must be >= 1");
    if (group_size == 0) throw InputError("synthetic: group_size must be >= 1");
    if (few_labels > 0 && train_docs == 0) throw InputError("synthetic: few labels need training documents");
  }

  std::size_t num_labels() const { return frequent_labels + few_labels + zero_labels; }
};

struct SyntheticDataset {
  Corpus corpus;
  std::vector<graphs::TaxonomyEdge> taxonomy;
  std::vector<std::string> words;
  Matrix word_vectors;
  std::vector<std::vector<std::string>> topic_words;  // per label
  std::vector<std::size_t> parent;                    // taxonomy parent label of few/zero labels (self otherwise)
  std::vector<std::size_t> related;                   // description-only relative of zero labels (self otherwise)
};

namespace detail {

inline std::string code_for(char prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%03zu", prefix, i);
  return buf;
}

inline Vector random_unit(std::size_t dim, Rng& rng) {
  Vector v(dim);
  double n = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    n = norm2(v);
  } while (n == 0.0);
  for (double& x : v) x /= n;
  return v;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t nf = spec.frequent_labels, nw = spec.few_labels, nz = spec.zero_labels;
  const std::size_t num_labels = spec.num_labels();
  SyntheticDataset ds;
  ds.parent.resize(num_labels);
  ds.related.resize(num_labels);

  // labels: frequent F###, few W###, zero Z###
  std::vector<std::string> codes;
  for (std::size_t i = 0; i < nf; ++i) codes.push_back(detail::code_for('F', i));
  for (std::size_t i = 0; i < nw; ++i) codes.push_back(detail::code_for('W', i));
  for (std::size_t i = 0; i < nz; ++i) codes.push_back(detail::code_for('Z', i));
  for (std::size_t l = 0; l < num_labels; ++l) ds.parent[l] = ds.related[l] = l;
  for (std::size_t i = 0; i < nw; ++i) ds.parent[nf + i] = (i * 7 + 3) % nf;
  const std::size_t num_groups = (nf + spec.group_size - 1) / spec.group_size;
  for (std::size_t i = 0; i < nz; ++i) {
    const std::size_t l = nf + nw + i;
    ds.parent[l] = (i * 3) % nf;
    ds.related[l] = ds.parent[l];
    if (num_groups > 1) {
      while (ds.related[l] / spec.group_size == ds.parent[l] / spec.group_size) ds.related[l] = rng.below(nf);
    }
  }

  // taxonomy: frequent labels grouped under internal nodes, few and zero
  // labels hang off a frequent parent
  for (std::size_t i = 0; i < nf; ++i) {
    ds.taxonomy.push_back({codes[i], "G" + std::to_string(i / spec.group_size)});
  }
  for (std::size_t l = nf; l < num_labels; ++l) ds.taxonomy.push_back({codes[l], codes[ds.parent[l]]});

  // topic words and word vectors
  std::vector<Vector> centroid(num_labels);
  for (auto& c : centroid) c = detail::random_unit(spec.embed_dim, rng);
  ds.topic_words.resize(num_labels);
  std::vector<Vector> vecs;
  auto add_word = [&](const std::string& w, const Vector& center) {
    Vector v(spec.embed_dim);
    const double s = spec.embed_noise / std::sqrt(static_cast<double>(spec.embed_dim));
    for (std::size_t j = 0; j < spec.embed_dim; ++j) v[j] = center[j] + s * rng.normal();
    ds.words.push_back(w);
    vecs.push_back(std::move(v));
  };
  const auto words_of = [&](double share) {
    return static_cast<std::size_t>(std::lround(share * static_cast<double>(spec.words_per_topic)));
  };
  const std::size_t from_parent = words_of(spec.parent_overlap);
  const std::size_t from_related = words_of(spec.related_overlap);
  for (std::size_t l = 0; l < num_labels; ++l) {
    const bool zero = l >= nf + nw;
    std::size_t w = 0;
    if (zero) {
      const auto& pw = ds.topic_words[ds.parent[l]];
      for (std::size_t k = 0; k < from_parent && k < pw.size(); ++k, ++w) ds.topic_words[l].push_back(pw[k]);
      if (ds.related[l] != ds.parent[l]) {
        // the related label's last words, so they differ from what siblings borrow from the parent
        const auto& rw = ds.topic_words[ds.related[l]];
        for (std::size_t k = 0; k < from_related && k < rw.size() && w < spec.words_per_topic; ++k, ++w) {
          ds.topic_words[l].push_back(rw[rw.size() - 1 - k]);
        }
      }
    }
    for (std::size_t k = 0; w < spec.words_per_topic; ++w, ++k) {
      const std::string word = "t" + std::to_string(l) + "x" + std::to_string(k);
      ds.topic_words[l].push_back(word);
      add_word(word, centroid[l]);
    }
  }
  for (std::size_t i = 0; i < spec.noise_vocab; ++i) add_word("n" + std::to_string(i), detail::random_unit(spec.embed_dim, rng));
  ds.word_vectors = Matrix(vecs.size(), spec.embed_dim);
  for (std::size_t i = 0; i < vecs.size(); ++i) std::copy(vecs[i].begin(), vecs[i].end(), ds.word_vectors.row_span(i).begin());

  for (std::size_t l = 0; l < num_labels; ++l) ds.corpus.catalog.add(codes[l], join_tokens(ds.topic_words[l]));

  // label assignment
  std::vector<double> freq_weight(nf);
  double total_weight = 0.0;
  for (std::size_t i = 0; i < nf; ++i) total_weight += freq_weight[i] = 1.0 / std::sqrt(1.0 + static_cast<double>(i));
  auto draw_frequent = [&]() {
    double u = rng.uniform() * total_weight;
    for (std::size_t i = 0; i < nf; ++i) {
      if (u < freq_weight[i]) return i;
      u -= freq_weight[i];
    }
    return nf - 1;
  };
  // labels after the first come from the first label's taxonomy group
  // with probability group_affinity, which gives co-occurrence structure
  auto draw_labels = [&](std::size_t count, std::vector<std::size_t>& out) {
    count = std::min(count, nf);
    while (out.size() < count) {
      std::size_t l = draw_frequent();
      if (!out.empty() && rng.bernoulli(spec.group_affinity)) {
        const std::size_t g = out.front() / spec.group_size;
        const std::size_t lo = g * spec.group_size, hi = std::min(nf, lo + spec.group_size);
        l = lo + rng.below(hi - lo);
        bool room = false;
        for (std::size_t c = lo; c < hi; ++c) room = room || std::find(out.begin(), out.end(), c) == out.end();
        if (!room) l = draw_frequent();
      }
      if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
    }
  };

  const std::size_t per_doc_cap = std::min(spec.max_labels_per_doc, std::max<std::size_t>(nf, 1));
  std::vector<std::vector<std::size_t>> train_labels(spec.train_docs);
  if (nf > 0)
    for (auto& ls : train_labels) draw_labels(1 + rng.below(per_doc_cap), ls);
  for (std::size_t i = 0; i < nw; ++i) {
    const std::size_t f = 1 + rng.below(std::min(spec.few_max_freq, spec.train_docs));
    for (std::size_t k = 0; k < f; ++k) {
      auto& ls = train_labels[rng.below(spec.train_docs)];
      if (std::find(ls.begin(), ls.end(), nf + i) == ls.end()) ls.push_back(nf + i);
    }
  }
  auto eval_labels = [&]() {
    std::vector<std::size_t> ls;
    if (nz > 0 && rng.bernoulli(spec.zero_doc_rate)) ls.push_back(nf + nw + rng.below(nz));
    const std::size_t extra = nf > 0 ? rng.below(per_doc_cap) + (ls.empty() ? 1 : 0) : 0;
    std::vector<std::size_t> seen;
    draw_labels(std::min(extra, nf), seen);
    for (std::size_t l : seen) ls.push_back(l);
    if (nw > 0 && rng.bernoulli(0.1)) {
      const std::size_t l = nf + rng.below(nw);
      if (std::find(ls.begin(), ls.end(), l) == ls.end()) ls.push_back(l);
    }
    if (ls.empty()) ls.push_back(nf + nw + rng.below(nz));
    return ls;
  };

  auto make_doc = [&](const std::vector<std::size_t>& labels, Split split, std::size_t idx) {
    Document d;
    d.id = std::string(to_string(split)) + "-" + std::to_string(idx);
    d.split = split;
    for (std::size_t l : labels)
      for (std::size_t k = 0; k < spec.tokens_per_label; ++k) {
        const auto& tw = ds.topic_words[l];
        d.tokens.push_back(tw[rng.below(tw.size())]);
      }
    if (spec.noise_rate > 0.0) {
      const auto n_noise = static_cast<std::size_t>(
          std::lround(static_cast<double>(d.tokens.size()) * spec.noise_rate / (1.0 - spec.noise_rate)));
      for (std::size_t k = 0; k < n_noise; ++k) d.tokens.push_back("n" + std::to_string(rng.below(spec.noise_vocab)));
    }
    rng.shuffle(std::span<std::string>(d.tokens));
    d.labels = labels;
    std::sort(d.labels.begin(), d.labels.end());
    return d;
  };

  for (std::size_t i = 0; i < spec.train_docs; ++i) {
    if (train_labels[i].empty()) train_labels[i].push_back(nf > 0 ? draw_frequent() : 0);
    ds.corpus.documents.push_back(make_doc(train_labels[i], Split::train, i));
  }
  for (std::size_t i = 0; i < spec.dev_docs; ++i) ds.corpus.documents.push_back(make_doc(eval_labels(), Split::dev, i));
  for (std::size_t i = 0; i < spec.test_docs; ++i) ds.corpus.documents.push_back(make_doc(eval_labels(), Split::test, i));

  for (const auto& d : ds.corpus.documents) {
    if (d.split != Split::train) continue;
    for (std::size_t l : d.labels) {
      if (l >= nf + nw) throw ContractError("synthetic: zero-shot label in a training document");
    }
  }
  return ds;
}

/// File names written by write_synthetic inside the output directory.
struct SyntheticFiles {
  static constexpr const char* corpus = "corpus.jsonl";
  static constexpr const char* labels = "labels.jsonl";
  static constexpr const char* taxonomy = "taxonomy.tsv";
  static constexpr const char* embeddings = "embeddings.txt";
};

inline void write_synthetic(const std::string& dir, const SyntheticDataset& ds) {
  write_corpus(dir + "/" + SyntheticFiles::corpus, ds.corpus);
  write_labels(dir + "/" + SyntheticFiles::labels, ds.corpus.catalog);
  std::ofstream tax(dir + "/" + SyntheticFiles::taxonomy, std::ios::binary);
  if (!tax) throw InputError("cannot write taxonomy in " + dir);
  graphs::write_taxonomy(tax, ds.taxonomy);
  text::write_embeddings(dir + "/" + SyntheticFiles::embeddings, ds.words, ds.word_vectors);
}

}  // namespace kamg::data
