#include "corebox/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace corebox::metrics {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionCounts confusion(const GrayMask& pred, const GrayMask& truth, std::uint8_t positive) {
  if (pred.width() != truth.width() || pred.height() != truth.height()) {
    throw Error(ErrorCode::DimensionMismatch,
                "prediction " + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                    " vs truth " + std::to_string(truth.width()) + "x" + std::to_string(truth.height()));
  }
  // Indexed by (pred positive) * 2 + (truth positive).
  std::uint64_t bins[4] = {0, 0, 0, 0};
  const auto p = pred.data();
  const auto t = truth.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++bins[(p[i] == positive ? 2 : 0) + (t[i] == positive ? 1 : 0)];
  }
  return ConfusionCounts{.tp = bins[3], .tn = bins[0], .fp = bins[2], .fn = bins[1]};
}

double precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }

double recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

double f_beta(double precision, double recall, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidBeta, "beta must be positive, got " + std::to_string(beta));
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  if (den == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / den;
}

double iou(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp + c.fn); }

MetricReport report_from_counts(const ConfusionCounts& c, const std::vector<double>& betas) {
  MetricReport r;
  r.precision = precision(c);
  r.recall = recall(c);
  r.f1 = f_beta(r.precision, r.recall, 1.0);
  r.f2 = f_beta(r.precision, r.recall, 2.0);
  r.iou = iou(c);
  for (double b : betas) r.f_scores.push_back({b, f_beta(r.precision, r.recall, b)});
  return r;
}

MetricReport evaluate_pair(const GrayMask& pred, const GrayMask& truth, std::uint8_t positive,
                           const std::vector<double>& betas) {
  return report_from_counts(confusion(pred, truth, positive), betas);
}

Aggregate aggregate(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "cannot aggregate an empty list");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  Aggregate a;
  a.min = values.front();
  a.max = values.back();
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  a.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  // Guard the ordering invariant against summation rounding.
  a.mean = std::clamp(a.mean, a.min, a.max);
  return a;
}

SummaryStats summarize(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports to summarize");
  auto column = [&](double MetricReport::*field) {
    std::vector<double> v;
    v.reserve(reports.size());
    for (const auto& r : reports) v.push_back(r.*field);
    return aggregate(std::move(v));
  };
  SummaryStats s;
  s.count = reports.size();
  s.precision = column(&MetricReport::precision);
  s.recall = column(&MetricReport::recall);
  s.f1 = column(&MetricReport::f1);
  s.f2 = column(&MetricReport::f2);
  s.iou = column(&MetricReport::iou);
  return s;
}

nlohmann::json to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json fs = nlohmann::json::array();
  for (const auto& f : r.f_scores) fs.push_back({{"beta", f.beta}, {"value", f.value}});
  return {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1},
          {"f2", r.f2},               {"iou", r.iou},       {"f_scores", fs}};
}

namespace {

nlohmann::json to_json(const Aggregate& a) {
  return {{"mean", a.mean}, {"median", a.median}, {"max", a.max}, {"min", a.min}};
}

}  // namespace

nlohmann::json to_json(const SummaryStats& s) {
  return {{"count", s.count},         {"iou", to_json(s.iou)},       {"f1", to_json(s.f1)},
          {"f2", to_json(s.f2)},      {"recall", to_json(s.recall)}, {"precision", to_json(s.precision)}};
}

std::string format_summary_table(const SummaryStats& s) {
  const Aggregate* cols[] = {&s.iou, &s.f1, &s.f2, &s.recall, &s.precision};
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-8s%10s%10s%10s%10s%10s\n", "", "IOU", "F1", "F2", "Recall", "Precision");
  out << buf;
  const std::pair<const char*, double Aggregate::*> rows[] = {
      {"mean", &Aggregate::mean}, {"median", &Aggregate::median}, {"max", &Aggregate::max}, {"min", &Aggregate::min}};
  for (const auto& [name, field] : rows) {
    std::snprintf(buf, sizeof buf, "%-8s", name);
    out << buf;
    for (const auto* col : cols) {
      std::snprintf(buf, sizeof buf, "%10.3f", col->*field);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace corebox::metrics
