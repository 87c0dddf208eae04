#pragma once

#include <array>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kamg/errors.hpp"
#include "kamg/eval/metrics.hpp"

namespace kamg::eval {

enum class Metric { recall, precision, rprecision, ndcg };
inline constexpr std::array<Metric, 4> kAllMetrics{Metric::recall, Metric::precision, Metric::rprecision, Metric::ndcg};

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::recall: return "R";
    case Metric::precision: return "P";
    case Metric::rprecision: return "RP";
    case Metric::ndcg: return "nDCG";
  }
  return "?";
}

inline double compute_metric(Metric m, const Ranking& ranked, const GoldSet& gold, std::size_t k) {
  switch (m) {
    case Metric::recall: return recall_at_k(ranked, gold, k);
    case Metric::precision: return precision_at_k(ranked, gold, k);
    case Metric::rprecision: return rprecision_at_k(ranked, gold, k);
    case Metric::ndcg: return ndcg_at_k(ranked, gold, k);
  }
  return 0.0;
}

/// Row group of a report: one of the label buckets or all labels.
enum class Group { frequent, few, zero, overall };
inline constexpr std::array<Group, 4> kAllGroups{Group::frequent, Group::few, Group::zero, Group::overall};

inline const char* group_name(Group g) {
  switch (g) {
    case Group::frequent: return "Frequent";
    case Group::few: return "Few";
    case Group::zero: return "Zero";
    case Group::overall: return "Overall";
  }
  return "?";
}

inline Group group_of(Bucket b) {
  switch (b) {
    case Bucket::frequent: return Group::frequent;
    case Bucket::few: return Group::few;
    case Bucket::zero: return Group::zero;
  }
  return Group::overall;
}

struct MetricCell {
  Group group;
  Metric metric;
  std::size_t k;
  std::optional<double> value;  // absent when no document contributes
  std::size_t n_docs = 0;
};

struct MetricsReport {
  std::vector<std::size_t> ks;
  std::vector<MetricCell> cells;
  std::vector<std::string> header_notes;

  const MetricCell& cell(Group g, Metric m, std::size_t k) const {
    for (const auto& c : cells)
      if (c.group == g && c.metric == m && c.k == k) return c;
    throw InputError(std::string("report has no cell ") + group_name(g) + " " + metric_name(m) + "@" + std::to_string(k));
  }

  /// Value of a cell; NaN when the cell is absent.
  double value(Group g, Metric m, std::size_t k) const {
    const auto& c = cell(g, m, k);
    return c.value ? *c.value : std::numeric_limits<double>::quiet_NaN();
  }
};

/// One JSON object per cell: {bucket, metric, K, value, n_docs}. Absent
/// cells carry value null.
inline void write_report_records(std::ostream& out, const MetricsReport& r) {
  for (const auto& c : r.cells) {
    nlohmann::json rec{{"bucket", group_name(c.group)}, {"metric", metric_name(c.metric)}, {"K", c.k}, {"n_docs", c.n_docs}};
    rec["value"] = c.value ? nlohmann::json(*c.value) : nlohmann::json(nullptr);
    out << rec.dump() << '\n';
  }
}

/// Aligned table: one row per group, columns metric@K.
inline void write_report_table(std::ostream& out, const MetricsReport& r) {
  for (const auto& note : r.header_notes) out << "# " << note << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-10s %7s", "Group", "docs");
  out << buf;
  for (std::size_t k : r.ks)
    for (Metric m : kAllMetrics) {
      std::snprintf(buf, sizeof buf, " %9s", (std::string(metric_name(m)) + "@" + std::to_string(k)).c_str());
      out << buf;
    }
  out << '\n';
  for (Group g : kAllGroups) {
    const std::size_t docs = r.cells.empty() ? 0 : r.cell(g, Metric::recall, r.ks.front()).n_docs;
    std::snprintf(buf, sizeof buf, "%-10s %7zu", group_name(g), docs);
    out << buf;
    for (std::size_t k : r.ks)
      for (Metric m : kAllMetrics) {
        const auto& c = r.cell(g, m, k);
        if (c.value) {
          std::snprintf(buf, sizeof buf, " %9.4f", *c.value);
        } else {
          std::snprintf(buf, sizeof buf, " %9s", "-");
        }
        out << buf;
      }
    out << '\n';
  }
}

}  // namespace kamg::eval
