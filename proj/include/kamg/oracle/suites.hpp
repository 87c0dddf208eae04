#pragma once

// Independent reference checks shared by the unit tests, the acceptance
// runner and `kamg oracle-check`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kamg/eval/metrics.hpp"
#include "kamg/graphs/label_graph.hpp"
#include "kamg/model/kamg.hpp"
#include "kamg/numerics/gradcheck.hpp"
#include "kamg/numerics/rng.hpp"

namespace kamg::oracle {

struct CheckResult {
  std::string name;
  double value = 0.0;  // error or violation count, compared against `limit`
  double limit = 0.0;
  bool passed = false;
};

struct SuiteResult {
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
  double worst() const {
    double w = 0.0;
    for (const auto& c : checks) w = std::max(w, c.value);
    return w;
  }
};

namespace detail {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

/// Uniform values in [-hi, -0.1] U [0.1, hi], away from the ReLU kink.
inline Matrix off_kink(std::size_t r, std::size_t c, Rng& rng, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, hi);
  return m;
}

/// sum(W .* x) with fixed random W, so every output coordinate has its own weight.
inline Var weighted_sum(Tape& tape, Var x, std::uint64_t salt) {
  Rng r(salt);
  const Matrix& xv = value(x);
  return ad::sum(ad::hadamard(x, tape.constant(random_matrix(xv.rows(), xv.cols(), r))));
}

inline double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gradient suite
// ---------------------------------------------------------------------------

/// 2 documents, 4 labels, 6 vocabulary tokens, all three graphs.
struct ToyInstance {
  model::ModelConfig config;
  model::ModelParams params;
  model::LabelInputs inputs;
  text::EmbeddingTable embeddings;
  std::vector<std::vector<std::size_t>> docs;
  std::vector<std::vector<std::size_t>> gold;
};

inline ToyInstance make_toy_instance(model::FusionMode fusion, std::uint64_t seed = 7) {
  ToyInstance t;
  Rng rng(seed);
  auto& c = t.config;
  c.embed_dim = 3;
  c.filters = 4;
  c.kernel_width = 3;
  c.gcn_hidden = 3;
  c.gcn_out = 2;
  c.fused_dim = 3;
  c.fusion = fusion;

  for (const char* w : {"fever", "cough", "rash", "pain", "ache", "sore"}) t.embeddings.vocab.insert(w, 1);
  t.embeddings.dim = c.embed_dim;
  t.embeddings.rows = detail::random_matrix(t.embeddings.vocab.size(), c.embed_dim, rng);
  for (std::size_t j = 0; j < c.embed_dim; ++j) t.embeddings.rows(text::Vocab::kPad, j) = 0.0;
  t.embeddings.pretrained.assign(t.embeddings.vocab.size(), true);

  const std::size_t num_labels = 4;
  const Matrix v = detail::random_matrix(num_labels, c.embed_dim, rng);
  std::map<graphs::GraphKind, graphs::LabelGraph> g;
  for (auto kind : {graphs::GraphKind::hierarchy, graphs::GraphKind::similarity, graphs::GraphKind::cooccurrence}) {
    Matrix a(num_labels, num_labels);
    for (std::size_t i = 0; i < num_labels; ++i)
      for (std::size_t j = i + 1; j < num_labels; ++j)
        if (rng.bernoulli(0.6)) a(i, j) = a(j, i) = rng.uniform(0.5, 3.0);
    g[kind] = graphs::with_self_loops(kind, std::move(a));
  }
  t.inputs = {v, model::prepare_branches(c, g)};
  t.params = model::init_params(c, rng);
  // Spread the biases so no hidden unit sits exactly at a ReLU kink.
  for (std::size_t p = 0; p < t.params.values.size(); ++p)
    for (double& x : t.params.values.value(p).data()) x += rng.uniform(-0.05, 0.05);

  t.docs = {{2, 3, 4, 5, 2}, {6, 7, 3, 1}};  // id 1 is <unk>
  t.gold = {{0, 2}, {1}};
  return t;
}

inline Var toy_loss(Tape& tape, const ParamVars& pv, const ToyInstance& t) {
  std::vector<const std::vector<std::size_t>*> docs, gold;
  for (std::size_t i = 0; i < t.docs.size(); ++i) {
    docs.push_back(&t.docs[i]);
    gold.push_back(&t.gold[i]);
  }
  return model::batch_loss(tape, pv, t.config, t.inputs, docs, gold, t.embeddings);
}

inline SuiteResult gradient_suite(double tolerance = 1e-4) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult out;
  auto run = [&](const std::string& name, const LossBuilder& build, const ParameterSet& params) {
    const GradCheckReport r = finite_difference_check(build, params);
    out.checks.push_back({name, r.max_rel_error, tolerance, r.max_rel_error < tolerance});
  };
  auto one = [](std::string n, Matrix m) {
    ParameterSet p;
    p.add(std::move(n), std::move(m));
    return p;
  };
  auto two = [](Matrix a, Matrix b) {
    ParameterSet p;
    p.add("a", std::move(a));
    p.add("b", std::move(b));
    return p;
  };
  Rng rng(2024);
  using detail::random_matrix;
  using detail::weighted_sum;

  run("add", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::add(p.at("a"), p.at("b")), 1); },
      two(random_matrix(3, 2, rng), random_matrix(3, 2, rng)));
  run("add_row", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::add_row(p.at("a"), p.at("b")), 2); },
      two(random_matrix(3, 4, rng), random_matrix(1, 4, rng)));
  run("hadamard", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::hadamard(p.at("a"), p.at("b")), 3); },
      two(random_matrix(2, 3, rng), random_matrix(2, 3, rng)));
  run("scale", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::scale(p.at("a"), -1.7), 4); },
      one("a", random_matrix(2, 2, rng)));
  for (int mode = 0; mode < 4; ++mode) {
    const bool ta = mode & 1, tb = mode & 2;
    run(std::string("matmul") + (ta ? "_tA" : "") + (tb ? "_tB" : ""),
        [ta, tb](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::matmul(p.at("a"), p.at("b"), ta, tb), 5); },
        two(ta ? random_matrix(4, 3, rng) : random_matrix(3, 4, rng), tb ? random_matrix(2, 4, rng) : random_matrix(4, 2, rng)));
  }
  run("transpose", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::transpose(p.at("a")), 6); },
      one("a", random_matrix(2, 3, rng)));
  run("tanh", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::tanh(p.at("a")), 7); },
      one("a", random_matrix(3, 3, rng, -2.0, 2.0)));
  run("relu", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::relu(p.at("a")), 8); },
      one("a", detail::off_kink(3, 3, rng)));
  run("sigmoid", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::sigmoid(p.at("a")), 9); },
      one("a", random_matrix(3, 2, rng, -3.0, 3.0)));
  run("softmax_cols", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::softmax_cols(p.at("a")), 10); },
      one("a", random_matrix(4, 3, rng, -2.0, 2.0)));
  run("concat_cols",
      [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::concat_cols({p.at("a"), p.at("b"), p.at("a")}), 11); },
      two(random_matrix(3, 2, rng), random_matrix(3, 1, rng)));
  run("select_rows", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::select_rows(p.at("a"), {2, 0, 2}), 12); },
      one("a", random_matrix(3, 2, rng)));
  run("sum", [](Tape&, const ParamVars& p) { return ad::sum(ad::tanh(p.at("a"))); }, one("a", random_matrix(2, 3, rng)));
  run("mean", [](Tape&, const ParamVars& p) { return ad::mean(ad::tanh(p.at("a"))); }, one("a", random_matrix(2, 3, rng)));
  run("rowwise_dot", [](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::rowwise_dot(p.at("a"), p.at("b")), 13); },
      two(random_matrix(4, 3, rng), random_matrix(4, 3, rng)));
  for (std::size_t w : {1, 2, 3, 4}) {
    run("unfold_same_w" + std::to_string(w),
        [w](Tape& t, const ParamVars& p) { return weighted_sum(t, ad::unfold_same(p.at("a"), w), 14); },
        one("a", random_matrix(5, 2, rng)));
  }
  {
    Matrix targets{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
    run("bce_mean", [targets](Tape&, const ParamVars& p) { return ad::bce_mean(p.at("a"), targets); },
        one("a", random_matrix(3, 2, rng, 0.1, 0.9)));
  }

  for (auto fusion : {model::FusionMode::post_gcn, model::FusionMode::pre_gcn_merge, model::FusionMode::none}) {
    const ToyInstance toy = make_toy_instance(fusion);
    run(std::string("kamg_loss_") + model::fusion_name(fusion),
        [&toy](Tape& t, const ParamVars& p) { return toy_loss(t, p, toy); }, toy.params.values);
  }
  out.seconds = detail::elapsed(start);
  return out;
}

// ---------------------------------------------------------------------------
// Metric suite
// ---------------------------------------------------------------------------

struct BruteMetrics {
  double recall, precision, rprecision, ndcg;
};

/// Set arithmetic over an explicitly materialised top-K set. A candidate's
/// position is the number of candidates that beat it.
inline BruteMetrics brute_force_metrics(const std::vector<double>& scores, const std::vector<std::size_t>& candidates,
                                        const std::set<std::size_t>& gold, std::size_t k) {
  std::map<std::size_t, std::size_t> position;
  for (std::size_t a : candidates) {
    std::size_t beaten_by = 0;
    for (std::size_t b : candidates) beaten_by += scores[b] > scores[a] || (scores[b] == scores[a] && b < a);
    position[a] = beaten_by;
  }
  std::set<std::size_t> top;
  for (const auto& [label, pos] : position)
    if (pos < k) top.insert(label);
  std::vector<std::size_t> both;
  std::set_intersection(top.begin(), top.end(), gold.begin(), gold.end(), std::back_inserter(both));
  const double hits = static_cast<double>(both.size());

  std::vector<std::size_t> hit_positions;
  for (std::size_t l : both) hit_positions.push_back(position[l]);
  std::sort(hit_positions.begin(), hit_positions.end());
  double dcg = 0.0;
  for (std::size_t pos : hit_positions) dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, gold.size()); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);

  return {hits / static_cast<double>(gold.size()), hits / static_cast<double>(k),
          hits / static_cast<double>(std::min(k, gold.size())), dcg / idcg};
}

struct MetricSuiteResult {
  std::size_t instances = 0;
  std::size_t evaluations = 0;
  std::size_t mismatches = 0;
  std::size_t identity_checked = 0;
  std::size_t identity_violations = 0;
  double seconds = 0.0;

  bool passed() const { return instances > 0 && mismatches == 0 && identity_violations == 0 && identity_checked > 0; }
};

/// Random instances with at most 10 labels and 10 documents; scores are
/// drawn from a coarse grid so ties occur often.
inline MetricSuiteResult metric_suite(std::size_t instances = 1000, std::uint64_t seed = 99) {
  const auto start = std::chrono::steady_clock::now();
  MetricSuiteResult out;
  Rng rng(seed);
  for (std::size_t inst = 0; inst < instances; ++inst) {
    const std::size_t num_labels = 1 + rng.below(10);
    const std::size_t num_docs = 1 + rng.below(10);
    for (std::size_t d = 0; d < num_docs; ++d) {
      std::vector<double> scores(num_labels);
      for (double& s : scores) s = static_cast<double>(rng.below(5)) / 4.0;
      std::vector<std::size_t> candidates;
      for (std::size_t l = 0; l < num_labels; ++l)
        if (rng.bernoulli(0.7)) candidates.push_back(l);
      if (candidates.empty()) candidates.push_back(rng.below(num_labels));
      std::set<std::size_t> gold;
      const std::size_t g = 1 + rng.below(num_labels);
      while (gold.size() < g) gold.insert(rng.below(num_labels));
      const eval::GoldSet gold_set(gold.begin(), gold.end());
      const eval::Ranking ranked = eval::rank_labels(scores, candidates);

      for (std::size_t k = 1; k <= num_labels + 1; ++k) {
        const BruteMetrics ref = brute_force_metrics(scores, candidates, gold, k);
        const double r = eval::recall_at_k(ranked, gold_set, k);
        const double p = eval::precision_at_k(ranked, gold_set, k);
        const double rp = eval::rprecision_at_k(ranked, gold_set, k);
        const double n = eval::ndcg_at_k(ranked, gold_set, k);
        ++out.evaluations;
        out.mismatches += !(r == ref.recall && p == ref.precision && rp == ref.rprecision && n == ref.ndcg);
        if (gold.size() <= k) {
          ++out.identity_checked;
          out.identity_violations += rp != r;
        }
      }
    }
    ++out.instances;
  }
  out.seconds = detail::elapsed(start);
  return out;
}

// ---------------------------------------------------------------------------
// Graph suite
// ---------------------------------------------------------------------------

/// Largest |eigenvalue| of a symmetric matrix by power iteration on A^2,
/// which avoids oscillation between +lambda and -lambda.
inline double spectral_radius(const Matrix& a, std::size_t max_iters = 5000, double tol = 1e-14) {
  const std::size_t n = a.rows();
  if (n == 0) return 0.0;
  Matrix x(n, 1);
  Rng rng(n);
  for (double& v : x.data()) v = rng.uniform(0.5, 1.5);
  double lambda2 = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Matrix y = matmul(a, matmul(a, x));
    const double ny = norm2(y.data());
    if (ny == 0.0) return 0.0;
    const double nx = norm2(x.data());
    const double next = ny / nx;
    for (double& v : y.data()) v /= ny;
    x = std::move(y);
    if (std::abs(next - lambda2) <= tol * std::max(1.0, next)) {
      lambda2 = next;
      break;
    }
    lambda2 = next;
  }
  return std::sqrt(lambda2);
}

inline graphs::LabelGraph random_graph(std::size_t n, Rng& rng, double density = 0.3) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(density)) a(i, j) = a(j, i) = rng.uniform(0.1, 5.0);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = rng.bernoulli(0.5) ? rng.uniform(0.0, 4.0) : 0.0;
  return graphs::with_self_loops(graphs::GraphKind::similarity, std::move(a));
}

inline bool is_symmetric(const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (m(i, j) != m(j, i)) return false;
  return true;
}

inline SuiteResult graph_suite(std::size_t trials = 200, std::uint64_t seed = 5) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  double asym = 0, nonpos_degree = 0, merge_dev = 0, max_radius = 0, equiv_dev = 0, builder_asym = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + rng.below(50);
    const auto g = random_graph(n, rng);
    const auto g2 = random_graph(n, rng);
    const auto a_hat = graphs::normalize(g);

    asym += !is_symmetric(a_hat.matrix) + !is_symmetric(graphs::merge_graphs(g, g2).adjacency);
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0;
      for (std::size_t j = 0; j < n; ++j) d += g.adjacency(i, j);
      nonpos_degree += !(d > 0.0) + !(g.adjacency(i, i) >= 1.0);
    }
    merge_dev = std::max(merge_dev, max_abs_diff(graphs::normalize(graphs::merge_graphs(g, g)).matrix, a_hat.matrix));
    max_radius = std::max(max_radius, spectral_radius(a_hat.matrix));

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    Matrix permuted(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) permuted(perm[i], perm[j]) = g.adjacency(i, j);
    const auto p_hat = graphs::normalize(graphs::LabelGraph{g.kind, permuted, true});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        equiv_dev = std::max(equiv_dev, std::abs(p_hat.matrix(perm[i], perm[j]) - a_hat.matrix(i, j)));

    std::vector<Vector> vecs(n);
    for (auto& v : vecs) {
      v.resize(4);
      for (double& x : v) x = rng.uniform(-1.0, 1.0);
    }
    if (n > 1) {
      const auto s = graphs::build_similarity_graph(vecs, 1 + rng.below(n - 1), rng.uniform(-0.5, 0.8));
      builder_asym += !is_symmetric(s.adjacency);
    }
    std::vector<std::vector<std::size_t>> sets(10);
    for (auto& set : sets)
      for (std::size_t l = 0; l < n; ++l)
        if (rng.bernoulli(0.2)) set.push_back(l);
    builder_asym += !is_symmetric(graphs::build_cooccurrence_graph(sets, n, std::vector<bool>(n, false)).adjacency);
  }
  SuiteResult out;
  out.checks = {
      {"symmetry", asym + builder_asym, 0.0, asym + builder_asym == 0.0},
      {"self_loop_degree", nonpos_degree, 0.0, nonpos_degree == 0.0},
      {"merge_idempotent", merge_dev, 1e-12, merge_dev <= 1e-12},
      {"spectral_radius", max_radius, 1.0 + 1e-9, max_radius <= 1.0 + 1e-9},
      {"relabel_equivariance", equiv_dev, 1e-12, equiv_dev <= 1e-12},
  };
  out.seconds = detail::elapsed(start);
  return out;
}

}  // namespace kamg::oracle
