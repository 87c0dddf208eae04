#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "kamg/errors.hpp"

namespace kamg::eval {

using LabelId = std::size_t;
using Ranking = std::vector<LabelId>;
using GoldSet = std::unordered_set<LabelId>;

enum class Bucket { frequent, few, zero };

inline const char* bucket_name(Bucket b) {
  switch (b) {
    case Bucket::frequent: return "Frequent";
    case Bucket::few: return "Few";
    case Bucket::zero: return "Zero";
  }
  return "?";
}

struct BucketAssignment {
  std::vector<Bucket> bucket;  // indexed by label id
  std::size_t few_threshold = 5;

  std::vector<LabelId> labels_in(Bucket b) const {
    std::vector<LabelId> out;
    for (LabelId l = 0; l < bucket.size(); ++l)
      if (bucket[l] == b) out.push_back(l);
    return out;
  }
};

/// freq 0 -> zero, 1..threshold -> few, above -> frequent.
inline BucketAssignment assign_buckets(std::span<const std::size_t> train_label_freq, std::size_t few_threshold) {
  if (few_threshold < 1) throw InputError("assign_buckets: threshold must be >= 1");
  BucketAssignment out{std::vector<Bucket>(train_label_freq.size()), few_threshold};
  for (std::size_t l = 0; l < train_label_freq.size(); ++l) {
    const std::size_t f = train_label_freq[l];
    out.bucket[l] = f == 0 ? Bucket::zero : (f <= few_threshold ? Bucket::few : Bucket::frequent);
  }
  return out;
}

/// Candidates by descending score; equal scores by ascending label id.
inline Ranking rank_labels(std::span<const double> scores, std::span<const LabelId> candidates) {
  if (candidates.empty()) throw ContractError("rank_labels: empty candidate set");
  for (LabelId c : candidates) {
    if (c >= scores.size()) throw InputError("rank_labels: candidate id out of range");
    if (std::isnan(scores[c])) throw NumericError("rank_labels: NaN score for label " + std::to_string(c));
  }
  Ranking r(candidates.begin(), candidates.end());
  std::sort(r.begin(), r.end(), [&](LabelId a, LabelId b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  return r;
}

namespace detail {
inline void require_gold(const GoldSet& gold, std::size_t k) {
  if (gold.empty()) throw ContractError("ranking metric: empty gold set");
  if (k == 0) throw InputError("ranking metric: K must be >= 1");
}
inline std::size_t hits_at(const Ranking& ranked, const GoldSet& gold, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) hits += gold.contains(ranked[i]);
  return hits;
}
}  // namespace detail

inline double recall_at_k(const Ranking& ranked, const GoldSet& gold, std::size_t k) {
  detail::require_gold(gold, k);
  return static_cast<double>(detail::hits_at(ranked, gold, k)) / static_cast<double>(gold.size());
}

inline double precision_at_k(const Ranking& ranked, const GoldSet& gold, std::size_t k) {
  detail::require_gold(gold, k);
  return static_cast<double>(detail::hits_at(ranked, gold, k)) / static_cast<double>(k);
}

/// Hits in the top K over min(K, |gold|).
inline double rprecision_at_k(const Ranking& ranked, const GoldSet& gold, std::size_t k) {
  detail::require_gold(gold, k);
  return static_cast<double>(detail::hits_at(ranked, gold, k)) / static_cast<double>(std::min(k, gold.size()));
}

inline double ndcg_at_k(const Ranking& ranked, const GoldSet& gold, std::size_t k) {
  detail::require_gold(gold, k);
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    if (gold.contains(ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, gold.size()); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

}  // namespace kamg::eval
