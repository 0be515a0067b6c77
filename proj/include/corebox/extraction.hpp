#pragma once

// Post-processing of a predicted core mask: bounding boxes of the mask
// components, statistical clean-up filters, user warnings and column crops.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corebox/geometry.hpp"
#include "corebox/imagery.hpp"

namespace corebox::extraction {

enum class Dimension { Width, Height, Both };

std::string to_string(Dimension d);
Dimension dimension_from_string(const std::string& s);

struct FilterConfig {
  double n = 1.2;             // median-band coefficient, typical 1.2-1.5
  double m = 100.0;           // global-width coefficient, typical 50-200
  double y_max_ratio = 1.0;   // 1.0 disables the position filter
  int min_count = 1;
  int max_count = 6;
  bool median_filter = true;
  bool width_filter = true;
  bool position_filter = true;
  Dimension dimension = Dimension::Width;
  // Class to extract; empty selects "core_column", or the only class.
  std::string class_name;

  /// Throws InvalidArgument when n <= 1, m < 1, ratio outside (0,1] or the
  /// count range is inverted.
  void validate() const;

  static FilterConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

enum class Filter { Position, MedianSize, GlobalWidth };

std::string to_string(Filter f);

struct DroppedBox {
  BoundingBox box;
  Filter filter;
  std::string reason;  // thresholds that rejected the box
};

/// Median-band thresholds for one dimension.
struct Band {
  double median = 0.0;
  double lower = 0.0;  // median / n
  double upper = 0.0;  // median * n
};

struct FilterResult {
  std::vector<BoundingBox> kept;
  std::vector<DroppedBox> dropped;
};

struct MedianFilterResult : FilterResult {
  std::optional<Band> width;
  std::optional<Band> height;
};

struct WidthFilterResult : FilterResult {
  double gt = 0.0;
};

/// Median of the values; even counts average the two middle values.
double median(std::vector<double> values);

/// Tight boxes of the 8-connected components of `value`, ordered by (y, x).
std::vector<BoundingBox> boxes_from_mask(const GrayMask& mask, std::uint8_t value);

Band median_band(const std::vector<BoundingBox>& boxes, double n, Dimension which);

/// Keeps boxes whose size lies inside [median / n, median * n] (inclusive) in
/// the filtered dimension(s). Throws EmptyInput on an empty list.
MedianFilterResult median_size_filter(const std::vector<BoundingBox>& boxes, double n,
                                      Dimension dimension = Dimension::Width);

/// Keeps boxes at least image_width / m wide.
WidthFilterResult global_width_filter(const std::vector<BoundingBox>& boxes, int image_width, double m);

/// Keeps boxes whose top edge lies above y_max_ratio * image_height.
FilterResult position_filter(const std::vector<BoundingBox>& boxes, int image_height, double y_max_ratio);

/// User-facing warnings about the count of kept boxes and about boxes whose
/// size leaves the median band of the kept set.
std::vector<std::string> count_check(const std::vector<BoundingBox>& boxes, const FilterConfig& config = {});

struct ColumnCrop {
  int index = 0;
  BoundingBox box;
  RasterImage image;
};

/// Crops in box order. Throws BoxOutOfBounds.
std::vector<ColumnCrop> extract_columns(const RasterImage& image, const std::vector<BoundingBox>& boxes);

struct ExtractionReport {
  int image_width = 0;
  int image_height = 0;
  std::string class_name;
  std::uint8_t class_value = 0;
  std::vector<BoundingBox> detected;
  std::vector<BoundingBox> kept;
  std::vector<DroppedBox> dropped;
  std::vector<std::string> warnings;
  std::optional<Band> width_band;
  std::optional<Band> height_band;
  std::optional<double> gt;
  FilterConfig config;

  nlohmann::json to_json() const;
};

struct PipelineResult {
  ExtractionReport report;
  std::vector<ColumnCrop> columns;
};

/// Picks the class to extract: config.class_name, else "core_column", else
/// the only class of the map.
std::pair<std::string, std::uint8_t> resolve_class(const LabelMap& labels, const std::string& requested);

/// boxes_from_mask -> position -> median size -> global width -> count check -> crops.
PipelineResult run_pipeline(const RasterImage& image, const GrayMask& mask, const LabelMap& labels,
                            const FilterConfig& config);

/// Report only; no crops are materialised.
ExtractionReport analyse(int image_width, int image_height, const GrayMask& mask, const LabelMap& labels,
                         const FilterConfig& config);

nlohmann::json to_json(const BoundingBox& box);

}  // namespace corebox::extraction
