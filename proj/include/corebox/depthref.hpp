#pragma once

// Depth referencing of extracted core columns.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corebox/geometry.hpp"

namespace corebox::depthref {

enum class RowOrder { TopToBottom, BottomToTop };
enum class WithinRow { LeftToRight, RightToLeft };
enum class Mode { Proportional, FixedLength };
enum class CoreAxis { Horizontal, Vertical };

struct Layout {
  RowOrder rows = RowOrder::TopToBottom;
  WithinRow within = WithinRow::LeftToRight;

  Layout reversed() const;
};

struct DepthSpec {
  double top = 0.0;     // metres
  double bottom = 0.0;  // metres
  Layout layout;
  Mode mode = Mode::Proportional;
  double column_length = 0.0;  // metres, FixedLength only
  CoreAxis axis = CoreAxis::Horizontal;

  /// Throws DegenerateSpec when bottom <= top or a fixed length is not positive.
  void validate() const;

  static DepthSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct DepthInterval {
  int index = 0;
  double from = 0.0;
  double to = 0.0;

  friend bool operator==(const DepthInterval&, const DepthInterval&) = default;
};

struct DepthResult {
  std::vector<DepthInterval> intervals;
  std::vector<std::string> warnings;
};

struct DepthEdit {
  int index = 0;
  double from = 0.0;
  double to = 0.0;
};

/// Sorts by y (per row order), ties by x (per within-row direction).
std::vector<BoundingBox> order_columns(std::vector<BoundingBox> boxes, const Layout& layout);

/// Proportional mode splits [top, bottom] by each box's pixel length along the
/// core axis, the last interval ending exactly at `bottom`. Fixed mode gives
/// every column `column_length`; the column crossing `bottom` is truncated and
/// columns past it receive no interval (both reported as warnings).
/// Throws EmptyInput, DegenerateSpec.
DepthResult assign_depths(const std::vector<BoundingBox>& ordered, const DepthSpec& spec);

/// Orders `columns` by the spec's layout, assigns depths, and re-indexes the
/// intervals to positions in `columns`. Intervals stay in depth order.
DepthResult reference_columns(const std::vector<BoundingBox>& columns, const DepthSpec& spec);

/// Applies user edits verbatim; gaps and overlaps between consecutive columns
/// become warnings. Throws NonPositiveInterval, InvalidArgument (unknown index).
DepthResult adjust_depths(std::vector<DepthInterval> intervals, const std::vector<DepthEdit>& edits);

std::vector<std::string> contiguity_warnings(const std::vector<DepthInterval>& intervals);

/// Parses `<name>_<top>-<bottom>m.<ext>`, e.g. `box12_1200.0-1201.0m.jpg`.
std::optional<std::pair<double, double>> depth_from_filename(const std::string& filename);

/// CSV with header index,x,y,w,h,depth_from_m,depth_to_m; depths printed with
/// two decimals, empty when a column has no interval.
std::string to_csv(const std::vector<BoundingBox>& boxes, const std::vector<DepthInterval>& intervals);

nlohmann::json to_json(const DepthInterval& d);

}  // namespace corebox::depthref
