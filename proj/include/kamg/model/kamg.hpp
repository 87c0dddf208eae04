#pragma once

// ACNN-KAMG: CNN document encoder with label-wise attention, per-graph
// two-layer GCNs over label embeddings, linear fusion of the GCN outputs,
// and a sigmoid score per (document, label).

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "kamg/errors.hpp"
#include "kamg/graphs/label_graph.hpp"
#include "kamg/model/config.hpp"
#include "kamg/numerics/matrix.hpp"
#include "kamg/numerics/parameters.hpp"
#include "kamg/numerics/rng.hpp"
#include "kamg/numerics/tape.hpp"
#include "kamg/text/embeddings.hpp"

namespace kamg::model {

namespace names {
inline const std::string kFilters = "cnn.filters";
inline const std::string kConvBias = "cnn.bias";
inline const std::string kW0 = "attn.W0";
inline const std::string kB0 = "attn.b0";
inline const std::string kW3 = "fuse.W3";
inline const std::string kW4 = "proj.W4";
inline const std::string kB4 = "proj.b4";
inline std::string w1(char branch) { return std::string("gcn.") + branch + ".W1"; }
inline std::string w2(char branch) { return std::string("gcn.") + branch + ".W2"; }
}  // namespace names

/// Branch letters in parameter order: g/s/c for post-GCN fusion, m for the
/// merged graph, none without graphs.
inline std::vector<char> branch_letters(const ModelConfig& c) {
  std::vector<char> out;
  if (c.fusion == FusionMode::post_gcn) {
    for (GraphKind k : c.graphs) out.push_back(graphs::kind_letter(k));
  } else if (c.fusion == FusionMode::pre_gcn_merge) {
    out.push_back('m');
  }
  return out;
}

/// Every trainable matrix of the network, with the config that shapes them.
struct ModelParams {
  ModelConfig config;
  ParameterSet values;
};

/// Glorot-uniform weights, zero biases, in a fixed creation order.
inline ModelParams init_params(const ModelConfig& c, Rng& rng) {
  c.validate();
  ModelParams p{c, {}};
  auto& v = p.values;
  v.add(names::kFilters, glorot_uniform_init(c.kernel_width * c.embed_dim, c.filters, rng));
  v.add(names::kConvBias, Matrix(1, c.filters));
  v.add(names::kW0, glorot_uniform_init(c.filters, c.embed_dim, rng));
  v.add(names::kB0, Matrix(1, c.embed_dim));
  for (char b : branch_letters(c)) {
    v.add(names::w1(b), glorot_uniform_init(c.embed_dim, c.gcn_hidden, rng));
    v.add(names::w2(b), glorot_uniform_init(c.gcn_hidden, c.gcn_out, rng));
  }
  if (c.fusion != FusionMode::none) {
    v.add(names::kW3, glorot_uniform_init(c.branch_count() * c.gcn_out, c.fused_dim, rng));
  }
  v.add(names::kW4, glorot_uniform_init(c.classifier_dim(), c.filters, rng));
  v.add(names::kB4, Matrix(1, c.classifier_dim()));
  return p;
}

/// Frozen, label-side inputs: the label embedding matrix V (L x d, catalog
/// order) and the normalized adjacency of every GCN branch.
struct LabelInputs {
  Matrix label_vectors;
  std::vector<graphs::NormalizedGraph> branches;

  std::size_t num_labels() const noexcept { return label_vectors.rows(); }
};

/// Normalized branch adjacencies for a config from the raw label graphs.
inline std::vector<graphs::NormalizedGraph> prepare_branches(const ModelConfig& c,
                                                            const std::map<GraphKind, graphs::LabelGraph>& graphs_by_kind) {
  auto get = [&](GraphKind k) -> const graphs::LabelGraph& {
    const auto it = graphs_by_kind.find(k);
    if (it == graphs_by_kind.end()) throw InputError(std::string("missing label graph: ") + graphs::kind_name(k));
    return it->second;
  };
  std::vector<graphs::NormalizedGraph> out;
  if (c.fusion == FusionMode::post_gcn) {
    for (GraphKind k : c.graphs) out.push_back(graphs::normalize(get(k)));
  } else if (c.fusion == FusionMode::pre_gcn_merge) {
    graphs::LabelGraph merged = get(c.graphs.front());
    if (c.graphs.size() == 1) {
      merged = graphs::merge_graphs(merged, merged);
    } else {
      for (std::size_t i = 1; i < c.graphs.size(); ++i) merged = graphs::merge_graphs(merged, get(c.graphs[i]));
    }
    out.push_back(graphs::normalize(merged));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tape-level building blocks
// ---------------------------------------------------------------------------

/// H2 = ReLU(A ReLU(A V W1) W2) for one normalized adjacency A.
inline Var gcn_branch(Var adj, Var v, Var w1, Var w2) {
  Var h1 = ad::relu(ad::matmul(ad::matmul(adj, v), w1));
  return ad::relu(ad::matmul(ad::matmul(adj, h1), w2));
}

/// Classifier matrix whose row l is [v_l, v~_l]; with fusion none it is V.
inline Var label_classifiers(Tape& tape, const ParamVars& pv, const ModelConfig& c, const LabelInputs& in, Var v) {
  if (c.fusion == FusionMode::none) return v;
  const auto letters = branch_letters(c);
  if (in.branches.size() != letters.size()) {
    throw DimensionError("label_classifiers: expected " + std::to_string(letters.size()) + " graph branches, got " +
                         std::to_string(in.branches.size()));
  }
  std::vector<Var> outs;
  for (std::size_t b = 0; b < letters.size(); ++b) {
    if (in.branches[b].size() != in.num_labels()) throw DimensionError("label_classifiers: graph size != label count");
    Var adj = tape.constant(in.branches[b].matrix);
    outs.push_back(gcn_branch(adj, v, pv.at(names::w1(letters[b])), pv.at(names::w2(letters[b]))));
  }
  Var stacked = outs.size() == 1 ? outs.front() : ad::concat_cols(outs);
  Var fused = ad::matmul(stacked, pv.at(names::kW3));
  return ad::concat_cols({v, fused});
}

/// Embedded tokens (n x d) with optional inverted dropout.
inline Matrix embed_tokens(const std::vector<std::size_t>& token_ids, const text::EmbeddingTable& emb) {
  if (token_ids.empty()) throw InputError("encode_document: empty document");
  Matrix x(token_ids.size(), emb.dim);
  for (std::size_t t = 0; t < token_ids.size(); ++t) {
    if (token_ids[t] >= emb.rows.rows()) throw InputError("encode_document: token id out of range");
    const auto r = emb.row(token_ids[t]);
    std::copy(r.begin(), r.end(), x.row_span(t).begin());
  }
  return x;
}

struct DropoutSpec {
  double rate = 0.0;
  Rng* rng = nullptr;  // null or rate 0: no dropout (evaluation mode)
};

/// F (n x u) = tanh(conv_s(X) + bias), same padding so n equals token count.
inline Var encode(Tape& tape, const ParamVars& pv, const ModelConfig& c, Matrix embedded, DropoutSpec dropout) {
  if (embedded.cols() != c.embed_dim) throw DimensionError("encode_document: embedding dim != model embed_dim");
  Var x = tape.constant(std::move(embedded));
  if (dropout.rng != nullptr && dropout.rate > 0.0) {
    const double keep = 1.0 - dropout.rate;
    Matrix mask(value(x).rows(), value(x).cols());
    for (double& m : mask.data()) m = dropout.rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    x = ad::hadamard(x, tape.constant(std::move(mask)));
  }
  Var windows = ad::unfold_same(x, c.kernel_width);
  return ad::tanh(ad::add_row(ad::matmul(windows, pv.at(names::kFilters)), pv.at(names::kConvBias)));
}

struct AttentionVars {
  Var weights;  // n x L, column l is a_{i,l}
  Var pooled;   // L x u, row l is z_{i,l}
};

/// a_l = softmax(tanh(F W0 + b0) v_l), z_l = a_l^T F, for all labels at once.
inline AttentionVars attend(const ParamVars& pv, Var features, Var v) {
  Var keys = ad::tanh(ad::add_row(ad::matmul(features, pv.at(names::kW0)), pv.at(names::kB0)));
  Var weights = ad::softmax_cols(ad::matmul(keys, v, false, true));
  return {weights, ad::matmul(weights, features, true, false)};
}

/// y_l = sigmoid(ReLU(W4 z_l + b4) . vbar_l) for all labels; result L x 1.
inline Var score(const ParamVars& pv, Var pooled, Var classifiers) {
  Var projected = ad::relu(ad::add_row(ad::matmul(pooled, pv.at(names::kW4), false, true), pv.at(names::kB4)));
  return ad::sigmoid(ad::rowwise_dot(projected, classifiers));
}

/// Per-label probabilities for one document (L x 1).
inline Var document_probs(Tape& tape, const ParamVars& pv, const ModelConfig& c, Var v, Var classifiers,
                          const std::vector<std::size_t>& token_ids, const text::EmbeddingTable& emb,
                          DropoutSpec dropout = {}) {
  Var features = encode(tape, pv, c, embed_tokens(token_ids, emb), dropout);
  return score(pv, attend(pv, features, v).pooled, classifiers);
}

/// Mean over documents of the label-averaged binary cross-entropy.
inline Var batch_loss(Tape& tape, const ParamVars& pv, const ModelConfig& c, const LabelInputs& in,
                      const std::vector<const std::vector<std::size_t>*>& docs,
                      const std::vector<const std::vector<std::size_t>*>& gold, const text::EmbeddingTable& emb,
                      DropoutSpec dropout = {}) {
  if (docs.empty() || docs.size() != gold.size()) throw DimensionError("batch_loss: empty batch or doc/gold mismatch");
  Var v = tape.constant(in.label_vectors);
  Var classifiers = label_classifiers(tape, pv, c, in, v);
  const std::size_t num_labels = in.num_labels();
  Var total{};
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Matrix y(num_labels, 1);
    for (std::size_t l : *gold[i]) {
      if (l >= num_labels) throw InputError("batch_loss: gold label out of range");
      y[l] = 1.0;
    }
    Var loss = ad::bce_mean(document_probs(tape, pv, c, v, classifiers, *docs[i], emb, dropout), y);
    total = i == 0 ? loss : ad::add(total, loss);
  }
  return ad::scale(total, 1.0 / static_cast<double>(docs.size()));
}

/// Scores (documents x labels) with frozen parameters, no dropout.
inline Matrix predict(const ModelParams& params, const LabelInputs& in,
                      const std::vector<const std::vector<std::size_t>*>& docs, const text::EmbeddingTable& emb) {
  const ModelConfig& c = params.config;
  Matrix classifiers_value;
  {
    Tape tape;
    const ParamVars pv = tape.parameters(params.values);
    classifiers_value = value(label_classifiers(tape, pv, c, in, tape.constant(in.label_vectors)));
  }
  Matrix scores(docs.size(), in.num_labels());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Tape tape;
    ParamVars pv;
    for (const auto* name : {&names::kFilters, &names::kConvBias, &names::kW0, &names::kB0, &names::kW4, &names::kB4}) {
      pv.emplace(*name, tape.constant(params.values.at(*name)));
    }
    Var v = tape.constant(in.label_vectors);
    Var cls = tape.constant(classifiers_value);
    const Matrix& probs = value(document_probs(tape, pv, c, v, cls, *docs[i], emb));
    std::copy(probs.data().begin(), probs.data().end(), scores.row_span(i).begin());
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Matrix-level forms of the individual layers
// ---------------------------------------------------------------------------

struct Attention {
  Vector weights;  // a_{i,l}, length n
  Vector pooled;   // z_{i,l}, length u
};

/// Label-wise attention of one label over document features F (n x u).
inline Attention label_attention(const Matrix& features, std::span<const double> label_vec, const Matrix& w0,
                                 std::span<const double> b0) {
  if (w0.rows() != features.cols() || w0.cols() != label_vec.size() || b0.size() != label_vec.size()) {
    throw DimensionError("label_attention: F " + features.shape_str() + ", W0 " + w0.shape_str() + ", b0 " +
                         std::to_string(b0.size()) + ", v " + std::to_string(label_vec.size()));
  }
  Tape tape;
  const ParamVars pv{{names::kW0, tape.constant(w0)}, {names::kB0, tape.constant(Matrix::row(b0))}};
  const AttentionVars a = attend(pv, tape.constant(features), tape.constant(Matrix::row(label_vec)));
  return {value(a.weights).data(), value(a.pooled).data()};
}

/// Two-layer GCN output H2 (L x p).
inline Matrix gcn_forward(const graphs::NormalizedGraph& adj, const Matrix& v, const Matrix& w1, const Matrix& w2) {
  if (adj.size() != v.rows() || v.cols() != w1.rows() || w1.cols() != w2.rows()) {
    throw DimensionError("gcn_forward: A " + adj.matrix.shape_str() + ", V " + v.shape_str() + ", W1 " +
                         w1.shape_str() + ", W2 " + w2.shape_str());
  }
  Tape tape;
  return value(gcn_branch(tape.constant(adj.matrix), tape.constant(v), tape.constant(w1), tape.constant(w2)));
}

/// [H_g, H_s, H_c] W3 for the given per-graph outputs.
inline Matrix fuse(const std::vector<Matrix>& outputs, const Matrix& w3) {
  if (outputs.empty()) throw DimensionError("fuse: no graph outputs");
  std::size_t width = 0;
  for (const auto& h : outputs) {
    if (h.rows() != outputs.front().rows()) throw DimensionError("fuse: row count mismatch across graphs");
    width += h.cols();
  }
  if (w3.rows() != width) throw DimensionError("fuse: W3 has " + std::to_string(w3.rows()) + " rows, expected " + std::to_string(width));
  Tape tape;
  std::vector<Var> vars;
  for (const auto& h : outputs) vars.push_back(tape.constant(h));
  return value(ad::matmul(ad::concat_cols(vars), tape.constant(w3)));
}

/// sigmoid(ReLU(W4 z + b4) . vbar)
inline double classify(std::span<const double> pooled, std::span<const double> classifier, const Matrix& w4,
                       std::span<const double> b4) {
  if (w4.cols() != pooled.size() || w4.rows() != classifier.size() || b4.size() != classifier.size()) {
    throw DimensionError("classify: W4 " + w4.shape_str() + ", z " + std::to_string(pooled.size()) + ", vbar " +
                         std::to_string(classifier.size()));
  }
  Tape tape;
  const ParamVars pv{{names::kW4, tape.constant(w4)}, {names::kB4, tape.constant(Matrix::row(b4))}};
  return value(score(pv, tape.constant(Matrix::row(pooled)), tape.constant(Matrix::row(classifier))))[0];
}

inline double bce_loss(std::span<const double> probs, std::span<const double> gold) {
  if (probs.size() != gold.size()) throw DimensionError("bce_loss: length mismatch");
  Tape tape;
  return value(ad::bce_mean(tape.constant(Matrix::column(probs)), Matrix::column(gold)))[0];
}

/// F_i for one document with the model's CNN parameters.
inline Matrix encode_document(const std::vector<std::size_t>& token_ids, const text::EmbeddingTable& emb,
                              const ModelParams& params, DropoutSpec dropout = {}) {
  Tape tape;
  const ParamVars pv{{names::kFilters, tape.constant(params.values.at(names::kFilters))},
                     {names::kConvBias, tape.constant(params.values.at(names::kConvBias))}};
  return value(encode(tape, pv, params.config, embed_tokens(token_ids, emb), dropout));
}

}  // namespace kamg::model
