#include "corebox/extraction.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "corebox/components.hpp"

namespace corebox::extraction {

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string describe(const BoundingBox& b) {
  return "(" + std::to_string(b.x) + "," + std::to_string(b.y) + " " + std::to_string(b.w) + "x" +
         std::to_string(b.h) + ")";
}

bool inside(const Band& band, double v) { return v >= band.lower && v <= band.upper; }

nlohmann::json band_json(const std::optional<Band>& b) {
  if (!b) return nullptr;
  return {{"median", b->median}, {"xt_bot", b->lower}, {"xt_up", b->upper}};
}

}  // namespace

std::string to_string(Dimension d) {
  switch (d) {
    case Dimension::Width: return "width";
    case Dimension::Height: return "height";
    case Dimension::Both: return "both";
  }
  return "width";
}

Dimension dimension_from_string(const std::string& s) {
  if (s == "width") return Dimension::Width;
  if (s == "height") return Dimension::Height;
  if (s == "both") return Dimension::Both;
  throw Error(ErrorCode::InvalidArgument, "dimension must be width, height or both, got '" + s + "'");
}

std::string to_string(Filter f) {
  switch (f) {
    case Filter::Position: return "position";
    case Filter::MedianSize: return "median_size";
    case Filter::GlobalWidth: return "global_width";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// FilterConfig

void FilterConfig::validate() const {
  if (!(n > 1.0)) throw Error(ErrorCode::InvalidArgument, "n must be > 1, got " + std::to_string(n));
  if (!(m >= 1.0)) throw Error(ErrorCode::InvalidArgument, "m must be >= 1, got " + std::to_string(m));
  if (!(y_max_ratio > 0.0 && y_max_ratio <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "y_max_ratio must be in (0,1], got " + std::to_string(y_max_ratio));
  }
  if (min_count < 0 || max_count < min_count) throw Error(ErrorCode::InvalidArgument, "invalid expected box count range");
}

FilterConfig FilterConfig::from_json(const nlohmann::json& doc) {
  if (doc.is_null()) return {};
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "filter config must be a JSON object");
  static const std::set<std::string> kKeys = {"n", "m", "y_max_ratio", "min_count", "max_count", "median_filter",
                                              "width_filter", "position_filter", "dimension", "class_name"};
  for (const auto& [key, _] : doc.items()) {
    if (!kKeys.contains(key)) throw Error(ErrorCode::ParseError, "unknown filter config key '" + key + "'");
  }
  FilterConfig c;
  try {
    c.n = doc.value("n", c.n);
    c.m = doc.value("m", c.m);
    c.y_max_ratio = doc.value("y_max_ratio", c.y_max_ratio);
    c.min_count = doc.value("min_count", c.min_count);
    c.max_count = doc.value("max_count", c.max_count);
    c.median_filter = doc.value("median_filter", c.median_filter);
    c.width_filter = doc.value("width_filter", c.width_filter);
    c.position_filter = doc.value("position_filter", c.position_filter);
    c.class_name = doc.value("class_name", c.class_name);
    if (doc.contains("dimension")) c.dimension = dimension_from_string(doc.at("dimension").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  c.validate();
  return c;
}

nlohmann::json FilterConfig::to_json() const {
  return {{"n", n},
          {"m", m},
          {"y_max_ratio", y_max_ratio},
          {"min_count", min_count},
          {"max_count", max_count},
          {"median_filter", median_filter},
          {"width_filter", width_filter},
          {"position_filter", position_filter},
          {"dimension", to_string(dimension)},
          {"class_name", class_name}};
}

// ---------------------------------------------------------------------------
// Filters

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "median of an empty list");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<BoundingBox> boxes_from_mask(const GrayMask& mask, std::uint8_t value) {
  return component_boxes(mask, value);
}

Band median_band(const std::vector<BoundingBox>& boxes, double n, Dimension which) {
  if (boxes.empty()) throw Error(ErrorCode::EmptyInput, "no boxes to filter");
  if (!(n > 1.0)) throw Error(ErrorCode::InvalidArgument, "n must be > 1");
  std::vector<double> sizes;
  sizes.reserve(boxes.size());
  for (const auto& b : boxes) sizes.push_back(which == Dimension::Height ? b.h : b.w);
  const double mu = median(std::move(sizes));
  return {mu, mu / n, mu * n};
}

MedianFilterResult median_size_filter(const std::vector<BoundingBox>& boxes, double n, Dimension dimension) {
  MedianFilterResult out;
  if (dimension != Dimension::Height) out.width = median_band(boxes, n, Dimension::Width);
  if (dimension != Dimension::Width) out.height = median_band(boxes, n, Dimension::Height);
  for (const auto& b : boxes) {
    std::string reason;
    if (out.width && !inside(*out.width, b.w)) {
      reason = "width " + std::to_string(b.w) + " outside [" + fmt(out.width->lower) + ", " + fmt(out.width->upper) + "]";
    } else if (out.height && !inside(*out.height, b.h)) {
      reason = "height " + std::to_string(b.h) + " outside [" + fmt(out.height->lower) + ", " +
               fmt(out.height->upper) + "]";
    }
    if (reason.empty()) {
      out.kept.push_back(b);
    } else {
      out.dropped.push_back({b, Filter::MedianSize, std::move(reason)});
    }
  }
  return out;
}

WidthFilterResult global_width_filter(const std::vector<BoundingBox>& boxes, int image_width, double m) {
  if (!(m >= 1.0)) throw Error(ErrorCode::InvalidArgument, "m must be >= 1");
  WidthFilterResult out;
  out.gt = static_cast<double>(image_width) / m;
  for (const auto& b : boxes) {
    if (b.w >= out.gt) {
      out.kept.push_back(b);
    } else {
      out.dropped.push_back({b, Filter::GlobalWidth, "width " + std::to_string(b.w) + " < gt " + fmt(out.gt)});
    }
  }
  return out;
}

FilterResult position_filter(const std::vector<BoundingBox>& boxes, int image_height, double y_max_ratio) {
  if (!(y_max_ratio > 0.0 && y_max_ratio <= 1.0)) throw Error(ErrorCode::InvalidArgument, "y_max_ratio must be in (0,1]");
  const double limit = y_max_ratio * image_height;
  FilterResult out;
  for (const auto& b : boxes) {
    if (b.y < limit) {
      out.kept.push_back(b);
    } else {
      out.dropped.push_back({b, Filter::Position, "y " + std::to_string(b.y) + " >= " + fmt(limit)});
    }
  }
  return out;
}

std::vector<std::string> count_check(const std::vector<BoundingBox>& boxes, const FilterConfig& config) {
  std::vector<std::string> warnings;
  if (boxes.empty()) {
    warnings.push_back("no core detected");
    return warnings;
  }
  const auto count = static_cast<int>(boxes.size());
  if (count < config.min_count || count > config.max_count) {
    warnings.push_back("unexpected number of core columns: " + std::to_string(count) + " (expected " +
                       std::to_string(config.min_count) + "-" + std::to_string(config.max_count) + ")");
  }
  auto check = [&](Dimension which, const char* label) {
    const auto band = median_band(boxes, config.n, which);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const double v = which == Dimension::Height ? boxes[i].h : boxes[i].w;
      if (inside(band, v)) continue;
      warnings.push_back("column " + std::to_string(i) + " " + describe(boxes[i]) + " " + label + " " +
                         std::to_string(static_cast<int>(v)) + " is " + (v > band.upper ? "larger" : "smaller") +
                         " than the median " + fmt(band.median) + " allows");
    }
  };
  if (config.dimension != Dimension::Height) check(Dimension::Width, "width");
  if (config.dimension != Dimension::Width) check(Dimension::Height, "height");
  return warnings;
}

std::vector<ColumnCrop> extract_columns(const RasterImage& image, const std::vector<BoundingBox>& boxes) {
  std::vector<ColumnCrop> out;
  out.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!boxes[i].fits_within(image.width(), image.height())) {
      throw Error(ErrorCode::BoxOutOfBounds, "box " + describe(boxes[i]) + " exceeds " +
                                                 std::to_string(image.width()) + "x" + std::to_string(image.height()));
    }
    out.push_back({static_cast<int>(i), boxes[i], crop(image, boxes[i])});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

std::pair<std::string, std::uint8_t> resolve_class(const LabelMap& labels, const std::string& requested) {
  if (!requested.empty()) return {requested, labels.value_of(requested)};
  if (labels.has_class("core_column")) return {"core_column", labels.value_of("core_column")};
  if (labels.entries().size() == 1) return *labels.entries().begin();
  throw Error(ErrorCode::InvalidArgument, "label map has several classes; choose one with class_name");
}

ExtractionReport analyse(int image_width, int image_height, const GrayMask& mask, const LabelMap& labels,
                         const FilterConfig& config) {
  config.validate();
  if (image_width != mask.width() || image_height != mask.height()) {
    throw Error(ErrorCode::DimensionMismatch, "image and mask dimensions differ");
  }
  ExtractionReport report;
  report.image_width = image_width;
  report.image_height = image_height;
  report.config = config;
  std::tie(report.class_name, report.class_value) = resolve_class(labels, config.class_name);
  report.detected = boxes_from_mask(mask, report.class_value);

  auto boxes = report.detected;
  auto absorb = [&](FilterResult&& r) {
    boxes = std::move(r.kept);
    for (auto& d : r.dropped) report.dropped.push_back(std::move(d));
  };
  if (config.position_filter && config.y_max_ratio < 1.0) {
    absorb(position_filter(boxes, image_height, config.y_max_ratio));
  }
  if (config.median_filter && !boxes.empty()) {
    auto r = median_size_filter(boxes, config.n, config.dimension);
    report.width_band = r.width;
    report.height_band = r.height;
    absorb(std::move(r));
  }
  if (config.width_filter) {
    auto r = global_width_filter(boxes, image_width, config.m);
    report.gt = r.gt;
    absorb(std::move(r));
  }
  report.kept = std::move(boxes);
  report.warnings = count_check(report.kept, config);
  return report;
}

PipelineResult run_pipeline(const RasterImage& image, const GrayMask& mask, const LabelMap& labels,
                            const FilterConfig& config) {
  PipelineResult out;
  out.report = analyse(image.width(), image.height(), mask, labels, config);
  out.columns = extract_columns(image, out.report.kept);
  return out;
}

nlohmann::json to_json(const BoundingBox& b) { return {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }

nlohmann::json ExtractionReport::to_json() const {
  auto boxes = [](const std::vector<BoundingBox>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& b : v) a.push_back(extraction::to_json(b));
    return a;
  };
  nlohmann::json dropped_json = nlohmann::json::array();
  for (const auto& d : dropped) {
    auto j = extraction::to_json(d.box);
    j["filter"] = to_string(d.filter);
    j["reason"] = d.reason;
    dropped_json.push_back(std::move(j));
  }
  return {{"image", {{"width", image_width}, {"height", image_height}}},
          {"class", {{"name", class_name}, {"value", class_value}}},
          {"config", config.to_json()},
          {"detected", boxes(detected)},
          {"kept", boxes(kept)},
          {"dropped", dropped_json},
          {"warnings", warnings},
          {"median_width", band_json(width_band)},
          {"median_height", band_json(height_band)},
          {"gt", gt ? nlohmann::json(*gt) : nlohmann::json(nullptr)}};
}

}  // namespace corebox::extraction
