#include <gtest/gtest.h>

#include <cmath>

#include "kamg/model/kamg.hpp"
#include "kamg/oracle/suites.hpp"

using namespace kamg;
using namespace kamg::model;

namespace {

text::EmbeddingTable tiny_table(std::size_t dim, std::uint64_t seed) {
  text::EmbeddingTable t;
  for (const char* w : {"a", "b", "c", "d"}) t.vocab.insert(w, 1);
  t.dim = dim;
  Rng rng(seed);
  t.rows = oracle::detail::random_matrix(t.vocab.size(), dim, rng);
  for (std::size_t j = 0; j < dim; ++j) t.rows(text::Vocab::kPad, j) = 0.0;
  t.pretrained.assign(t.vocab.size(), true);
  return t;
}

ModelConfig small_config(std::size_t d, std::size_t s) {
  ModelConfig c;
  c.embed_dim = d;
  c.filters = 3;
  c.kernel_width = s;
  c.gcn_hidden = 2;
  c.gcn_out = 2;
  c.fused_dim = 2;
  return c;
}

}  // namespace

TEST(Encode, ZeroFiltersGiveTanhBias) {
  ModelConfig c = small_config(2, 4);
  Rng rng(1);
  ModelParams p = init_params(c, rng);
  p.values.at(names::kFilters) = Matrix(4 * 2, 3);
  p.values.at(names::kConvBias) = Matrix{{0.3, -1.0, 2.0}};
  const Matrix f = encode_document({0, 0, 0, 0}, tiny_table(2, 1), p);
  ASSERT_EQ(f.rows(), 4u);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(f(r, 0), std::tanh(0.3));
    EXPECT_EQ(f(r, 1), std::tanh(-1.0));
    EXPECT_EQ(f(r, 2), std::tanh(2.0));
  }
}

TEST(Encode, IdenticalTokensGiveIdenticalInteriorRows) {
  ModelConfig c = small_config(3, 3);
  Rng rng(2);
  const ModelParams p = init_params(c, rng);
  const Matrix f = encode_document(std::vector<std::size_t>(8, 3), tiny_table(3, 2), p);
  for (std::size_t r = 2; r < 7; ++r)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(f(r, j), f(1, j));
}

TEST(Encode, SamePaddingKeepsLength) {
  ModelConfig c = small_config(2, 10);
  Rng rng(3);
  const ModelParams p = init_params(c, rng);
  EXPECT_EQ(encode_document(std::vector<std::size_t>(12, 2), tiny_table(2, 3), p).rows(), 12u);
  EXPECT_EQ(encode_document({4}, tiny_table(2, 3), p).rows(), 1u);
}

TEST(Encode, EmptyDocumentRejected) {
  ModelConfig c = small_config(2, 3);
  Rng rng(4);
  EXPECT_THROW(encode_document({}, tiny_table(2, 4), init_params(c, rng)), InputError);
}

TEST(Encode, ConvolutionMatchesDirectSum) {
  ModelConfig c = small_config(2, 3);
  Rng rng(5);
  const ModelParams p = init_params(c, rng);
  const auto t = tiny_table(2, 5);
  const std::vector<std::size_t> doc{2, 5, 3, 4};
  const Matrix f = encode_document(doc, t, p);
  const Matrix& w = p.values.at(names::kFilters);
  const Matrix& b = p.values.at(names::kConvBias);
  for (std::size_t pos = 0; pos < doc.size(); ++pos)
    for (std::size_t u = 0; u < 3; ++u) {
      double acc = b[u];
      for (std::size_t k = 0; k < 3; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(pos + k) - 1;  // left pad (3-1)/2 = 1
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(doc.size())) continue;
        for (std::size_t j = 0; j < 2; ++j) acc += t.rows(doc[static_cast<std::size_t>(src)], j) * w(k * 2 + j, u);
      }
      EXPECT_NEAR(f(pos, u), std::tanh(acc), 1e-14);
    }
}

TEST(Attention, IdenticalRowsGiveUniformWeights) {
  const Matrix f{{0.5, -1}, {0.5, -1}, {0.5, -1}};
  const auto a = label_attention(f, Vector{1.0, 2.0}, Matrix{{1, 0}, {0, 1}}, Vector{0.1, 0.1});
  for (double w : a.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(a.pooled[0], 0.5, 1e-15);
  EXPECT_NEAR(a.pooled[1], -1.0, 1e-15);
}

TEST(Attention, ZeroLabelVectorGivesUniformWeights) {
  const Matrix f{{1, 2}, {3, -4}};
  const auto a = label_attention(f, Vector{0, 0}, Matrix{{1, 2}, {3, 4}}, Vector{5, 6});
  EXPECT_EQ(a.weights, (Vector{0.5, 0.5}));
}

TEST(Attention, HandInstance) {
  const Matrix f{{1, 0}, {0, 2}};
  const Matrix w0{{1, 1}, {0, -1}};
  const Vector b0{0, 1}, v{1, 2};
  // logits: row 0: tanh([1, 2]) . v ; row 1: tanh([0, -1]) . v
  const double s0 = std::tanh(1.0) + 2 * std::tanh(2.0), s1 = 2 * std::tanh(-1.0);
  const double a0 = std::exp(s0) / (std::exp(s0) + std::exp(s1)), a1 = 1.0 - a0;
  const auto a = label_attention(f, v, w0, b0);
  EXPECT_NEAR(a.weights[0], a0, 1e-14);
  EXPECT_NEAR(a.pooled[0], a0 * 1.0, 1e-14);
  EXPECT_NEAR(a.pooled[1], a1 * 2.0, 1e-14);
}

TEST(Attention, DimensionMismatch) {
  EXPECT_THROW(label_attention(Matrix(2, 3), Vector{1, 2}, Matrix(2, 2), Vector{0, 0}), DimensionError);
}

TEST(Attention, WeightsSumToOne) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(30), u = 1 + rng.below(5), d = 1 + rng.below(5);
    const auto a = label_attention(oracle::detail::random_matrix(n, u, rng, -3, 3), oracle::detail::random_matrix(1, d, rng).data(),
                                   oracle::detail::random_matrix(u, d, rng), oracle::detail::random_matrix(1, d, rng).data());
    double total = 0.0;
    for (double w : a.weights) total += w;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Gcn, IdentityStackPassesNonnegativeInput) {
  const Matrix v{{1, 0.5}, {0, 2}, {3, 1}};
  const graphs::NormalizedGraph id{graphs::GraphKind::hierarchy, Matrix::identity(3)};
  EXPECT_EQ(gcn_forward(id, v, Matrix::identity(2), Matrix::identity(2)), v);
  EXPECT_EQ(gcn_forward(id, Matrix(3, 2), Matrix{{1, -2}, {3, 4}}, Matrix::identity(2)), Matrix(3, 2));
}

TEST(Gcn, PathGraphHandComputation) {
  const auto a_hat = graphs::normalize(graphs::with_self_loops(graphs::GraphKind::hierarchy, Matrix{{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}));
  const Matrix v{{1, -1}, {0.5, 2}, {-1, 1}};
  const Matrix w1{{1, -0.5}, {0.25, 1}}, w2{{2, 0}, {-1, 1}};
  auto relu = [](Matrix m) {
    for (double& x : m.data()) x = std::max(0.0, x);
    return m;
  };
  const Matrix expected = relu(matmul(matmul(a_hat.matrix, relu(matmul(matmul(a_hat.matrix, v), w1))), w2));
  EXPECT_LT(max_abs_diff(gcn_forward(a_hat, v, w1, w2), expected), 1e-15);
}

TEST(Gcn, DimensionMismatch) {
  EXPECT_THROW(gcn_forward({graphs::GraphKind::hierarchy, Matrix::identity(3)}, Matrix(2, 2), Matrix(2, 2), Matrix(2, 2)),
               DimensionError);
}

TEST(Fuse, IdentityAndAveraging) {
  const Matrix h{{1, 2}, {3, 4}, {5, 6}};
  EXPECT_EQ(fuse({h}, Matrix::identity(2)), h);
  EXPECT_EQ(fuse({h, h}, Matrix{{0.5, 0}, {0, 0.5}, {0.5, 0}, {0, 0.5}}), h);
}

TEST(Fuse, ThreeInputsConcatenateThenMultiply) {
  const Matrix hg{{1, 2}, {3, 4}}, hs{{0, 1}, {1, 0}}, hc{{-1, 2}, {2, -1}};
  const Matrix w3{{1, 0}, {0, 1}, {2, 0}, {0, 2}, {1, 1}, {-1, 1}};
  // row 0: [1 2 0 1 -1 2] W3 ; row 1: [3 4 1 0 2 -1] W3
  const Matrix expected{{1 + 0 + -1 - 2, 2 + 2 - 1 + 2}, {3 + 2 + 2 + 1, 4 + 0 + 2 - 1}};
  EXPECT_EQ(fuse({hg, hs, hc}, w3), expected);
}

TEST(Fuse, RowMismatch) { EXPECT_THROW(fuse({Matrix(2, 2), Matrix(3, 2)}, Matrix(4, 1)), DimensionError); }

TEST(Classify, ZeroClassifierOrDeadProjectionGivesHalf) {
  EXPECT_EQ(classify(Vector{1, 2}, Vector{0, 0, 0}, Matrix{{1, 0}, {0, 1}, {1, 1}}, Vector{0, 0, 0}), 0.5);
  EXPECT_EQ(classify(Vector{1, 2}, Vector{5, 5, 5}, Matrix{{-1, 0}, {0, -1}, {-1, -1}}, Vector{0, 0, 0}), 0.5);
}

TEST(Classify, HandThreeDimInstance) {
  const Vector z{1, -1}, vbar{0.5, -1, 2}, b4{0.1, 0.2, -5};
  const Matrix w4{{1, 2}, {3, 1}, {0, 1}};
  // W4 z + b4 = [-0.9, 2.2, -6]; ReLU -> [0, 2.2, 0]; dot = -2.2
  EXPECT_NEAR(classify(z, vbar, w4, b4), 1.0 / (1.0 + std::exp(2.2)), 1e-15);
}

TEST(Bce, ReferenceValues) {
  EXPECT_LE(bce_loss(Vector{1, 0, 1}, Vector{1, 0, 1}), 1.1e-12);
  EXPECT_NEAR(bce_loss(Vector{0.5, 0.5}, Vector{1, 0}), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(Vector{0.9, 0.2}, Vector{1, 0}), (-std::log(0.9) - std::log(0.8)) / 2, 1e-15);
  EXPECT_NEAR(bce_loss(Vector{0.9, 0.2}, Vector{1, 0}), 0.1643, 5e-5);
  EXPECT_THROW(bce_loss(Vector{0.5}, Vector{1, 0}), DimensionError);
}

TEST(Classifiers, PrefixIsLabelVector) {
  const auto toy = oracle::make_toy_instance(FusionMode::post_gcn);
  Tape tape;
  const ParamVars pv = tape.parameters(toy.params.values);
  const Matrix& cls = value(label_classifiers(tape, pv, toy.config, toy.inputs, tape.constant(toy.inputs.label_vectors)));
  ASSERT_EQ(cls.cols(), toy.config.classifier_dim());
  for (std::size_t l = 0; l < cls.rows(); ++l)
    for (std::size_t j = 0; j < toy.config.embed_dim; ++j) EXPECT_EQ(cls(l, j), toy.inputs.label_vectors(l, j));
}

TEST(Model, ToyLossGradientsMatchFiniteDifferences) {
  for (auto fusion : {FusionMode::post_gcn, FusionMode::pre_gcn_merge, FusionMode::none}) {
    const auto toy = oracle::make_toy_instance(fusion);
    const auto r = finite_difference_check([&](Tape& t, const ParamVars& p) { return oracle::toy_loss(t, p, toy); },
                                           toy.params.values);
    EXPECT_LT(r.max_rel_error, 1e-4) << fusion_name(fusion) << " worst " << r.worst_param;
  }
}

TEST(Model, PreMergeOnDuplicatedGraphMatchesSingleGraph) {
  const auto toy = oracle::make_toy_instance(FusionMode::post_gcn);
  Rng rng(10);
  std::map<graphs::GraphKind, graphs::LabelGraph> g;
  g[graphs::GraphKind::hierarchy] = oracle::random_graph(4, rng);
  g[graphs::GraphKind::hierarchy].kind = graphs::GraphKind::hierarchy;
  g[graphs::GraphKind::similarity] = g[graphs::GraphKind::hierarchy];
  g[graphs::GraphKind::similarity].kind = graphs::GraphKind::similarity;

  ModelConfig single = toy.config, merged = toy.config;
  single.graphs = {graphs::GraphKind::hierarchy};
  single.fusion = FusionMode::post_gcn;
  merged.graphs = {graphs::GraphKind::hierarchy, graphs::GraphKind::similarity};
  merged.fusion = FusionMode::pre_gcn_merge;
  Rng r1(5), r2(5);
  ModelParams p1 = init_params(single, r1), p2 = init_params(merged, r2);
  // same shapes in the same order; only the branch letter in the names differs
  ASSERT_EQ(p1.values.size(), p2.values.size());
  for (std::size_t i = 0; i < p1.values.size(); ++i) {
    ASSERT_TRUE(p1.values.value(i).same_shape(p2.values.value(i))) << p1.values.name(i);
    EXPECT_EQ(p1.values.value(i), p2.values.value(i));
  }

  std::vector<const std::vector<std::size_t>*> docs{&toy.docs[0], &toy.docs[1]};
  const Matrix s1 = predict(p1, {toy.inputs.label_vectors, prepare_branches(single, g)}, docs, toy.embeddings);
  const Matrix s2 = predict(p2, {toy.inputs.label_vectors, prepare_branches(merged, g)}, docs, toy.embeddings);
  EXPECT_LE(max_abs_diff(s1, s2), 1e-10);
}

TEST(Model, RelabelingPermutesPredictions) {
  const auto toy = oracle::make_toy_instance(FusionMode::post_gcn);
  const std::vector<std::size_t> perm{2, 0, 3, 1};  // old label l -> new position perm[l]
  LabelInputs permuted = toy.inputs;
  for (std::size_t l = 0; l < 4; ++l)
    for (std::size_t j = 0; j < toy.config.embed_dim; ++j) permuted.label_vectors(perm[l], j) = toy.inputs.label_vectors(l, j);
  for (std::size_t b = 0; b < permuted.branches.size(); ++b)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) permuted.branches[b].matrix(perm[i], perm[j]) = toy.inputs.branches[b].matrix(i, j);
  std::vector<const std::vector<std::size_t>*> docs{&toy.docs[0], &toy.docs[1]};
  const Matrix a = predict(toy.params, toy.inputs, docs, toy.embeddings);
  const Matrix b = predict(toy.params, permuted, docs, toy.embeddings);
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t l = 0; l < 4; ++l) EXPECT_NEAR(b(d, perm[l]), a(d, l), 1e-14);
}

TEST(Model, UnseenLabelGcnPathReceivesGradient) {
  // label 3 never appears as gold but is linked to label 0 in every graph
  auto toy = oracle::make_toy_instance(FusionMode::post_gcn);
  std::map<graphs::GraphKind, graphs::LabelGraph> g;
  for (auto kind : {graphs::GraphKind::hierarchy, graphs::GraphKind::similarity, graphs::GraphKind::cooccurrence}) {
    Matrix a(4, 4);
    a(0, 3) = a(3, 0) = 1.0;
    a(1, 2) = a(2, 1) = 1.0;
    g[kind] = graphs::with_self_loops(kind, a);
  }
  toy.inputs.branches = prepare_branches(toy.config, g);
  toy.gold = {{0}, {1}};
  Tape tape;
  const ParamVars pv = tape.parameters(toy.params.values);
  const ParameterSet grads = tape.backward(oracle::toy_loss(tape, pv, toy));
  for (char b : branch_letters(toy.config)) {
    EXPECT_GT(norm2(grads.at(names::w1(b)).data()), 0.0) << b;
    EXPECT_GT(norm2(grads.at(names::w2(b)).data()), 0.0) << b;
  }
  EXPECT_GT(norm2(grads.at(names::kW3).data()), 0.0);
}

TEST(Model, InferenceIsBitIdentical) {
  const auto toy = oracle::make_toy_instance(FusionMode::post_gcn);
  std::vector<const std::vector<std::size_t>*> docs{&toy.docs[0], &toy.docs[1]};
  EXPECT_EQ(predict(toy.params, toy.inputs, docs, toy.embeddings), predict(toy.params, toy.inputs, docs, toy.embeddings));
}

TEST(ModelConfig, GraphListParsingAndValidation) {
  EXPECT_EQ(graph_list_string(parse_graph_list("c,g,s")), "g,s,c");
  EXPECT_THROW(parse_graph_list("g,x"), InputError);
  ModelConfig c;
  c.filters = 0;
  EXPECT_THROW(c.validate(), InputError);
  EXPECT_EQ(parse_fusion("pre"), FusionMode::pre_gcn_merge);
  EXPECT_THROW(parse_fusion("sideways"), InputError);
}

TEST(ModelParams, ShapesFollowConfig) {
  ModelConfig c = small_config(4, 3);
  c.graphs = parse_graph_list("g,c");
  Rng rng(0);
  const ModelParams p = init_params(c, rng);
  EXPECT_EQ(p.values.at(names::kW0).rows(), c.filters);
  EXPECT_EQ(p.values.at(names::kW0).cols(), c.embed_dim);
  EXPECT_EQ(p.values.at(names::w1('g')).rows(), c.embed_dim);
  EXPECT_EQ(p.values.at(names::w2('c')).cols(), c.gcn_out);
  EXPECT_EQ(p.values.at(names::kW3).rows(), 2 * c.gcn_out);
  EXPECT_EQ(p.values.at(names::kW4).rows(), c.embed_dim + c.fused_dim);
  EXPECT_EQ(p.values.at(names::kW4).cols(), c.filters);
  EXPECT_FALSE(p.values.contains(names::w1('s')));
}
