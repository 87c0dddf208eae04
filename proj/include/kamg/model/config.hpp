#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "kamg/errors.hpp"
#include "kamg/graphs/label_graph.hpp"

namespace kamg::model {

using graphs::GraphKind;

enum class FusionMode {
  post_gcn,       // one GCN per graph, outputs fused by a linear layer
  pre_gcn_merge,  // graphs merged into one adjacency, single GCN
  none,           // no graph branch; classifiers are the label embeddings alone
};

inline const char* fusion_name(FusionMode f) {
  switch (f) {
    case FusionMode::post_gcn: return "post";
    case FusionMode::pre_gcn_merge: return "pre";
    case FusionMode::none: return "none";
  }
  return "?";
}

inline FusionMode parse_fusion(const std::string& s) {
  if (s == "post" || s == "post-gcn") return FusionMode::post_gcn;
  if (s == "pre" || s == "pre-gcn-merge") return FusionMode::pre_gcn_merge;
  if (s == "none") return FusionMode::none;
  throw InputError("unknown fusion mode: '" + s + "'");
}

/// Parses a graph subset like "g,s,c" or "gs" into canonical g, s, c order.
inline std::vector<GraphKind> parse_graph_list(const std::string& s) {
  std::vector<GraphKind> out;
  for (char ch : s) {
    if (ch == ',' || ch == ' ') continue;
    const GraphKind k = graphs::parse_kind(std::string(1, ch));
    if (k == GraphKind::merged) throw InputError("graph list may only contain g, s, c");
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string graph_list_string(const std::vector<GraphKind>& ks) {
  std::string s;
  for (GraphKind k : ks) {
    if (!s.empty()) s.push_back(',');
    s.push_back(graphs::kind_letter(k));
  }
  return s;
}

struct ModelConfig {
  std::size_t embed_dim = 200;     // d: word and label embedding size
  std::size_t filters = 200;       // u
  std::size_t kernel_width = 10;   // s
  std::size_t gcn_hidden = 200;    // q
  std::size_t gcn_out = 200;       // p
  std::size_t fused_dim = 200;     // q~
  std::vector<GraphKind> graphs{GraphKind::hierarchy, GraphKind::similarity, GraphKind::cooccurrence};
  FusionMode fusion = FusionMode::post_gcn;

  /// Number of GCN branches actually run.
  std::size_t branch_count() const {
    switch (fusion) {
      case FusionMode::post_gcn: return graphs.size();
      case FusionMode::pre_gcn_merge: return 1;
      case FusionMode::none: return 0;
    }
    return 0;
  }

  std::size_t classifier_dim() const { return embed_dim + (fusion == FusionMode::none ? 0 : fused_dim); }

  void validate() const {
    for (std::size_t v : {embed_dim, filters, kernel_width, gcn_hidden, gcn_out, fused_dim}) {
      if (v < 1) throw InputError("model config: all dimensions must be >= 1");
    }
    if (fusion != FusionMode::none && graphs.empty()) throw InputError("model config: no graphs selected");
    if (!std::is_sorted(graphs.begin(), graphs.end())) throw InputError("model config: graphs must be in g,s,c order");
    for (GraphKind k : graphs)
      if (k == GraphKind::merged) throw InputError("model config: 'merged' is not a selectable graph");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace kamg::model
