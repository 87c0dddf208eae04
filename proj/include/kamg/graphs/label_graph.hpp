#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kamg/data/catalog.hpp"
#include "kamg/errors.hpp"
#include "kamg/hash.hpp"
#include "kamg/numerics/matrix.hpp"
#include "kamg/text/embeddings.hpp"

namespace kamg::graphs {

enum class GraphKind { hierarchy, similarity, cooccurrence, merged };

inline char kind_letter(GraphKind k) {
  switch (k) {
    case GraphKind::hierarchy: return 'g';
    case GraphKind::similarity: return 's';
    case GraphKind::cooccurrence: return 'c';
    case GraphKind::merged: return 'm';
  }
  return '?';
}

inline const char* kind_name(GraphKind k) {
  switch (k) {
    case GraphKind::hierarchy: return "hierarchy";
    case GraphKind::similarity: return "similarity";
    case GraphKind::cooccurrence: return "cooccurrence";
    case GraphKind::merged: return "merged";
  }
  return "?";
}

inline GraphKind parse_kind(const std::string& s) {
  if (s == "g" || s == "hierarchy") return GraphKind::hierarchy;
  if (s == "s" || s == "similarity") return GraphKind::similarity;
  if (s == "c" || s == "cooccurrence") return GraphKind::cooccurrence;
  if (s == "m" || s == "merged") return GraphKind::merged;
  throw InputError("unknown graph kind: '" + s + "'");
}

/// Symmetric nonnegative adjacency over the full label set, catalog order.
struct LabelGraph {
  GraphKind kind = GraphKind::hierarchy;
  Matrix adjacency;
  bool self_loops = true;

  std::size_t size() const noexcept { return adjacency.rows(); }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j) n += adjacency(i, j) != 0.0;
    return n;
  }

  std::uint64_t fingerprint() const {
    Fnv1a h;
    h.update(kind_name(kind)).update_u64(size()).update_f64s(adjacency.data());
    return h.digest();
  }
};

/// D^{-1/2} A D^{-1/2} of a label graph.
struct NormalizedGraph {
  GraphKind kind = GraphKind::hierarchy;
  Matrix matrix;

  std::size_t size() const noexcept { return matrix.rows(); }
};

inline LabelGraph with_self_loops(GraphKind kind, Matrix adj) {
  for (std::size_t i = 0; i < adj.rows(); ++i) adj(i, i) = std::max(adj(i, i), 1.0);
  return LabelGraph{kind, std::move(adj), true};
}

// ---------------------------------------------------------------------------
// Hierarchy
// ---------------------------------------------------------------------------

struct TaxonomyEdge {
  std::string child;
  std::string parent;
};

/// Parses "child<TAB>parent" lines; '#' starts a comment line.
inline std::vector<TaxonomyEdge> parse_taxonomy(std::istream& in) {
  std::vector<TaxonomyEdge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError("taxonomy line " + std::to_string(lineno) + ": expected 'child<TAB>parent'");
    }
    edges.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return edges;
}

inline std::vector<TaxonomyEdge> load_taxonomy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open taxonomy file: " + path);
  return parse_taxonomy(in);
}

inline void write_taxonomy(std::ostream& out, const std::vector<TaxonomyEdge>& edges) {
  out << "# child\tparent\n";
  for (const auto& e : edges) out << e.child << '\t' << e.parent << '\n';
}

/// Unit-weight undirected parent/child adjacency among catalog labels.
///
/// Nodes that appear only as parents and are not catalog labels are internal
/// taxonomy nodes. They are eliminated one at a time: all remaining
/// neighbours of an eliminated node become pairwise connected, which links a
/// label to its grandparent and links the children of a dropped root.
/// A non-catalog id that appears as a child but never as a parent is unknown.
inline LabelGraph build_hierarchy_graph(const std::vector<TaxonomyEdge>& edges, const data::LabelCatalog& catalog) {
  std::set<std::string> parents;
  for (const auto& e : edges) parents.insert(e.parent);
  std::vector<std::string> unknown;
  for (const auto& e : edges) {
    if (!catalog.contains(e.child) && !parents.contains(e.child)) unknown.push_back(e.child);
  }
  if (!unknown.empty()) {
    std::string msg = "taxonomy references unknown ids:";
    for (const auto& u : unknown) msg += " " + u;
    throw InputError(msg);
  }

  // nodes: catalog labels first (ids 0..L-1), then internal nodes
  const std::size_t num_labels = catalog.size();
  std::map<std::string, std::size_t> internal;
  for (const auto& p : parents)
    if (!catalog.contains(p)) internal.emplace(p, num_labels + internal.size());
  auto node_of = [&](const std::string& name) {
    return catalog.contains(name) ? catalog.id(name) : internal.at(name);
  };
  std::vector<std::set<std::size_t>> nbrs(num_labels + internal.size());
  for (const auto& e : edges) {
    const std::size_t a = node_of(e.child), b = node_of(e.parent);
    if (a == b) continue;
    nbrs[a].insert(b);
    nbrs[b].insert(a);
  }
  for (std::size_t x = num_labels; x < nbrs.size(); ++x) {
    const std::vector<std::size_t> adj(nbrs[x].begin(), nbrs[x].end());
    for (std::size_t a : adj) nbrs[a].erase(x);
    for (std::size_t i = 0; i < adj.size(); ++i)
      for (std::size_t j = i + 1; j < adj.size(); ++j) {
        nbrs[adj[i]].insert(adj[j]);
        nbrs[adj[j]].insert(adj[i]);
      }
    nbrs[x].clear();
  }
  Matrix a(num_labels, num_labels);
  for (std::size_t i = 0; i < num_labels; ++i)
    for (std::size_t j : nbrs[i])
      if (j < num_labels) a(i, j) = 1.0;
  return with_self_loops(GraphKind::hierarchy, std::move(a));
}

// ---------------------------------------------------------------------------
// Similarity
// ---------------------------------------------------------------------------

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

/// kNN cosine graph: each label keeps its k most similar labels whose
/// cosine is >= tau (and positive); symmetrised by max. Zero vectors
/// only get a self-loop. Ties in similarity go to the lower label id.
inline LabelGraph build_similarity_graph(const std::vector<Vector>& label_vectors, std::size_t k, double tau) {
  const std::size_t n = label_vectors.size();
  if (k < 1) throw InputError("build_similarity_graph: k must be >= 1");
  if (k >= n) throw InputError("build_similarity_graph: k=" + std::to_string(k) + " >= label count " + std::to_string(n));
  for (const auto& v : label_vectors) {
    if (v.size() != label_vectors[0].size()) throw DimensionError("build_similarity_graph: unequal vector dims");
  }
  std::vector<bool> nonzero(n);
  for (std::size_t i = 0; i < n; ++i) nonzero[i] = norm2(label_vectors[i]) > 0.0;

  Matrix a(n, n);
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    if (!nonzero[i]) continue;
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !nonzero[j]) continue;
      cand.emplace_back(cosine(label_vectors[i], label_vectors[j]), j);
    }
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [](const auto& x, const auto& y) { return x.first > y.first || (x.first == y.first && x.second < y.second); });
    for (std::size_t r = 0; r < take; ++r) {
      const auto [c, j] = cand[r];
      if (c < tau || c <= 0.0) break;
      a(i, j) = std::max(a(i, j), c);
      a(j, i) = std::max(a(j, i), c);
    }
  }
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 0.0;
  return with_self_loops(GraphKind::similarity, std::move(a));
}

// ---------------------------------------------------------------------------
// Co-occurrence
// ---------------------------------------------------------------------------

/// Counts of training documents carrying both labels. `unseen` flags the
/// zero-shot labels, which must not occur in training documents and keep
/// only their self-loop.
inline LabelGraph build_cooccurrence_graph(const std::vector<std::vector<std::size_t>>& train_label_sets,
                                           std::size_t num_labels, const std::vector<bool>& unseen) {
  if (unseen.size() != num_labels) throw DimensionError("build_cooccurrence_graph: unseen mask size mismatch");
  Matrix a(num_labels, num_labels);
  for (std::size_t d = 0; d < train_label_sets.size(); ++d) {
    const auto& ls = train_label_sets[d];
    for (std::size_t l : ls) {
      if (l >= num_labels) throw InputError("build_cooccurrence_graph: label id out of range");
      if (unseen[l]) {
        throw ContractError("training document " + std::to_string(d) + " carries unseen label " + std::to_string(l));
      }
    }
    const std::set<std::size_t> uniq(ls.begin(), ls.end());
    for (auto i = uniq.begin(); i != uniq.end(); ++i)
      for (auto j = std::next(i); j != uniq.end(); ++j) {
        a(*i, *j) += 1.0;
        a(*j, *i) += 1.0;
      }
  }
  for (std::size_t i = 0; i < num_labels; ++i) a(i, i) = 0.0;
  return with_self_loops(GraphKind::cooccurrence, std::move(a));
}

// ---------------------------------------------------------------------------
// Merge / normalize
// ---------------------------------------------------------------------------

inline double max_off_diagonal(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) m = std::max(m, a(i, j));
  return m;
}

/// Single adjacency for the pre-GCN fusion baseline. Each input is scaled so
/// its largest off-diagonal weight is 1, the two are combined by elementwise
/// max, and the result is scaled up if needed so every diagonal entry is
/// >= 1. Only whole-matrix scalings are applied, which the symmetric
/// normalization ignores, so normalize(merge(A, A)) == normalize(A).
inline LabelGraph merge_graphs(const LabelGraph& g1, const LabelGraph& g2) {
  if (!g1.adjacency.same_shape(g2.adjacency)) {
    throw DimensionError("merge_graphs: sizes " + g1.adjacency.shape_str() + " vs " + g2.adjacency.shape_str());
  }
  auto rescaled = [](const Matrix& a) {
    const double m = max_off_diagonal(a);
    Matrix out = a;
    if (m > 0.0)
      for (double& v : out.data()) v /= m;
    return out;
  };
  const Matrix a = rescaled(g1.adjacency), b = rescaled(g2.adjacency);
  Matrix merged(a.rows(), a.cols());
  for (std::size_t i = 0; i < merged.size(); ++i) merged[i] = std::max(a[i], b[i]);
  double min_diag = 1.0;
  for (std::size_t i = 0; i < merged.rows(); ++i) min_diag = std::min(min_diag, merged(i, i));
  if (min_diag <= 0.0) throw ContractError("merge_graphs: input lacks self-loops");
  if (min_diag < 1.0)
    for (double& v : merged.data()) v /= min_diag;
  return LabelGraph{GraphKind::merged, std::move(merged), true};
}

inline NormalizedGraph normalize(const LabelGraph& g) {
  const Matrix& a = g.adjacency;
  const std::size_t n = a.rows();
  if (a.cols() != n) throw DimensionError("normalize: adjacency not square");
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += a(i, j);
    if (!(d > 0.0)) throw ContractError("normalize: label " + std::to_string(i) + " has zero degree");
    inv_sqrt[i] = 1.0 / std::sqrt(d);
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, j) * (inv_sqrt[i] * inv_sqrt[j]);
  return NormalizedGraph{g.kind, std::move(out)};
}

// ---------------------------------------------------------------------------
// Text format: header "labels L kind K", then "i<TAB>j<TAB>weight" for every
// nonzero entry (both triangles).
// ---------------------------------------------------------------------------

inline void write_graph(std::ostream& out, const LabelGraph& g) {
  out << "labels " << g.size() << " kind " << kind_name(g.kind) << '\n';
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j)
      if (g.adjacency(i, j) != 0.0) out << i << '\t' << j << '\t' << text::format_double(g.adjacency(i, j)) << '\n';
}

inline void write_graph(const std::string& path, const LabelGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write graph file: " + path);
  write_graph(out, g);
}

inline LabelGraph read_graph(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("graph file: missing header");
  std::istringstream hs(line);
  std::string w1, w3, kind;
  std::size_t n = 0;
  if (!(hs >> w1 >> n >> w3 >> kind) || w1 != "labels" || w3 != "kind") {
    throw ParseError("graph file: bad header '" + line + "'");
  }
  LabelGraph g{parse_kind(kind), Matrix(n, n), true};
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = text::detail::split_ws(line);
    std::size_t i = 0, j = 0;
    double w = 0.0;
    if (f.size() != 3 || !text::detail::parse_number(f[0], i) || !text::detail::parse_number(f[1], j) ||
        !text::detail::parse_number(f[2], w) || i >= n || j >= n || !(w >= 0.0)) {
      throw ParseError("graph file line " + std::to_string(lineno) + ": bad triple");
    }
    g.adjacency(i, j) = w;
  }
  for (std::size_t i = 0; i < n; ++i) g.self_loops = g.self_loops && g.adjacency(i, i) > 0.0;
  return g;
}

inline LabelGraph read_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open graph file: " + path);
  return read_graph(in);
}

}  // namespace kamg::graphs
