#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kamg/errors.hpp"
#include "kamg/eval/metrics.hpp"
#include "kamg/eval/report.hpp"
#include "kamg/numerics/matrix.hpp"

namespace kamg::eval {

/// Which labels are ranked when scoring a bucket's cells.
enum class CandidateMode {
  within_bucket,  // only the bucket's labels compete
  all_labels,     // generalised setting: every label competes
};

struct EvalOptions {
  std::vector<std::size_t> ks{10};
  CandidateMode candidates = CandidateMode::within_bucket;
};

/// Bucketed ranking metrics from a (documents x labels) score matrix.
///
/// For a bucket, only documents with at least one gold label in the bucket
/// count, and gold is restricted to the bucket. The Overall row ranks all
/// labels for every document with nonempty gold. Values are macro averages
/// over documents; a cell with no contributing document is absent.
inline MetricsReport evaluate_scores(const Matrix& scores, const std::vector<std::vector<LabelId>>& gold,
                                     const BucketAssignment& buckets, const EvalOptions& opts) {
  const std::size_t num_labels = buckets.bucket.size();
  if (scores.rows() != gold.size()) throw DimensionError("evaluate: score rows != document count");
  if (scores.cols() != num_labels) throw DimensionError("evaluate: score columns != label count");
  if (opts.ks.empty()) throw InputError("evaluate: no K values");

  std::vector<LabelId> all(num_labels);
  for (LabelId l = 0; l < num_labels; ++l) all[l] = l;

  MetricsReport report;
  report.ks = opts.ks;
  report.header_notes.push_back(
      std::string("bucket candidates: ") +
      (opts.candidates == CandidateMode::within_bucket ? "labels of the bucket only" : "all labels") +
      "; documents restricted to those with gold in the bucket; macro-average over documents");

  for (Group g : kAllGroups) {
    std::vector<LabelId> candidates;
    if (g == Group::overall || opts.candidates == CandidateMode::all_labels) {
      candidates = all;
    } else {
      for (LabelId l = 0; l < num_labels; ++l)
        if (group_of(buckets.bucket[l]) == g) candidates.push_back(l);
    }
    std::vector<double> sums(opts.ks.size() * kAllMetrics.size(), 0.0);
    std::size_t n_docs = 0;
    if (!candidates.empty()) {
      for (std::size_t d = 0; d < gold.size(); ++d) {
        GoldSet gs;
        for (LabelId l : gold[d]) {
          if (l >= num_labels) throw InputError("evaluate: gold label id out of range");
          if (g == Group::overall || group_of(buckets.bucket[l]) == g) gs.insert(l);
        }
        if (gs.empty()) continue;
        ++n_docs;
        const Ranking ranked = rank_labels(scores.row_span(d), candidates);
        for (std::size_t ki = 0; ki < opts.ks.size(); ++ki)
          for (std::size_t mi = 0; mi < kAllMetrics.size(); ++mi)
            sums[ki * kAllMetrics.size() + mi] += compute_metric(kAllMetrics[mi], ranked, gs, opts.ks[ki]);
      }
    }
    for (std::size_t ki = 0; ki < opts.ks.size(); ++ki)
      for (std::size_t mi = 0; mi < kAllMetrics.size(); ++mi) {
        MetricCell c{g, kAllMetrics[mi], opts.ks[ki], std::nullopt, n_docs};
        if (n_docs > 0) c.value = sums[ki * kAllMetrics.size() + mi] / static_cast<double>(n_docs);
        report.cells.push_back(c);
      }
  }
  return report;
}

}  // namespace kamg::eval
