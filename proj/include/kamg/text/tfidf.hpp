#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "kamg/errors.hpp"
#include "kamg/numerics/matrix.hpp"
#include "kamg/text/embeddings.hpp"
#include "kamg/text/vocab.hpp"

namespace kamg::text {

/// Smoothed inverse description frequency, idf(t) = ln((1+N)/(1+df(t))) + 1.
class IdfTable {
 public:
  IdfTable() = default;
  IdfTable(std::size_t num_descriptions, std::unordered_map<std::string, std::size_t> doc_freq)
      : n_(num_descriptions), df_(std::move(doc_freq)) {}

  std::size_t num_descriptions() const noexcept { return n_; }

  std::size_t doc_freq(const std::string& tok) const {
    const auto it = df_.find(tok);
    return it == df_.end() ? 0 : it->second;
  }

  double idf(const std::string& tok) const {
    return std::log((1.0 + static_cast<double>(n_)) / (1.0 + static_cast<double>(doc_freq(tok)))) + 1.0;
  }

 private:
  std::size_t n_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

inline IdfTable compute_idf(const std::vector<TokenList>& descriptions) {
  if (descriptions.empty()) throw InputError("compute_idf: no descriptions");
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& d : descriptions) {
    const std::set<std::string> uniq(d.begin(), d.end());
    for (const auto& t : uniq) ++df[t];
  }
  return IdfTable(descriptions.size(), std::move(df));
}

struct LabelEmbedding {
  Vector vec;
  /// Set when no description token had a pretrained vector; `vec` is zero.
  bool no_coverage = false;
};

/// TF-IDF weighted mean of the pretrained vectors of a description's tokens.
/// Tokens without pretrained coverage do not contribute.
inline LabelEmbedding label_embedding(const TokenList& description, const EmbeddingTable& table,
                                      const IdfTable& idf) {
  std::map<std::string, std::size_t> tf;
  for (const auto& t : description) ++tf[t];
  LabelEmbedding out{Vector(table.dim, 0.0), false};
  double total = 0.0;
  for (const auto& [tok, count] : tf) {
    if (!table.vocab.contains(tok)) continue;
    const std::size_t id = table.vocab.id(tok);
    if (!table.pretrained[id]) continue;
    const double w = static_cast<double>(count) * idf.idf(tok);
    const auto row = table.row(id);
    for (std::size_t j = 0; j < table.dim; ++j) out.vec[j] += w * row[j];
    total += w;
  }
  if (total == 0.0) {
    out.no_coverage = true;
    return out;
  }
  for (double& v : out.vec) v /= total;
  return out;
}

}  // namespace kamg::text
