#pragma once

// Pixel-level evaluation of a predicted mask against ground truth:
// precision, recall, F-beta and IoU, plus per-dataset aggregates.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "corebox/imagery.hpp"

namespace corebox::metrics {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct FScore {
  double beta = 1.0;
  double value = 0.0;
};

struct MetricReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double iou = 0.0;
  // One entry per requested beta, in request order.
  std::vector<FScore> f_scores;
};

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  double min = 0.0;
};

struct SummaryStats {
  std::size_t count = 0;
  Aggregate precision;
  Aggregate recall;
  Aggregate f1;
  Aggregate f2;
  Aggregate iou;
};

/// Counts pixels where pred/truth equal `positive`. Throws DimensionMismatch.
ConfusionCounts confusion(const GrayMask& pred, const GrayMask& truth, std::uint8_t positive);

// Ratios below return 0 when their denominator is 0.
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
/// (1 + b^2) P R / (b^2 P + R). Throws InvalidBeta for beta <= 0.
double f_beta(double precision, double recall, double beta);
double iou(const ConfusionCounts& c);

MetricReport report_from_counts(const ConfusionCounts& c, const std::vector<double>& betas = {1.0, 2.0});
MetricReport evaluate_pair(const GrayMask& pred, const GrayMask& truth, std::uint8_t positive,
                           const std::vector<double>& betas = {1.0, 2.0});

/// Mean/median/max/min per metric; median of an even count averages the middle two.
SummaryStats summarize(const std::vector<MetricReport>& reports);

Aggregate aggregate(std::vector<double> values);

nlohmann::json to_json(const ConfusionCounts& c);
nlohmann::json to_json(const MetricReport& r);
nlohmann::json to_json(const SummaryStats& s);

/// Aligned text table: one row per statistic, one column per metric.
std::string format_summary_table(const SummaryStats& s);

}  // namespace corebox::metrics
