#include "corebox/depthref.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "corebox/error.hpp"

namespace corebox::depthref {

namespace {

std::string two_decimals(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

template <typename Enum>
Enum parse_enum(const nlohmann::json& doc, const char* key, Enum fallback,
                std::initializer_list<std::pair<const char*, Enum>> names) {
  if (!doc.contains(key)) return fallback;
  const auto value = doc.at(key).get<std::string>();
  for (const auto& [name, e] : names) {
    if (value == name) return e;
  }
  throw Error(ErrorCode::ParseError, std::string("invalid value '") + value + "' for " + key);
}

}  // namespace

Layout Layout::reversed() const {
  return {rows == RowOrder::TopToBottom ? RowOrder::BottomToTop : RowOrder::TopToBottom,
          within == WithinRow::LeftToRight ? WithinRow::RightToLeft : WithinRow::LeftToRight};
}

void DepthSpec::validate() const {
  if (!(bottom > top)) {
    throw Error(ErrorCode::DegenerateSpec, "bottom depth " + std::to_string(bottom) + " must exceed top depth " +
                                               std::to_string(top));
  }
  if (mode == Mode::FixedLength && !(column_length > 0.0)) {
    throw Error(ErrorCode::DegenerateSpec, "fixed column length must be positive");
  }
}

DepthSpec DepthSpec::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "depth spec must be a JSON object");
  DepthSpec s;
  try {
    s.top = doc.at("top").get<double>();
    s.bottom = doc.at("bottom").get<double>();
    s.layout.rows = parse_enum(doc, "row_order", s.layout.rows,
                               {{"top_to_bottom", RowOrder::TopToBottom}, {"bottom_to_top", RowOrder::BottomToTop}});
    s.layout.within = parse_enum(doc, "within_row", s.layout.within,
                                 {{"left_to_right", WithinRow::LeftToRight}, {"right_to_left", WithinRow::RightToLeft}});
    s.mode = parse_enum(doc, "mode", s.mode, {{"proportional", Mode::Proportional}, {"fixed", Mode::FixedLength}});
    s.column_length = doc.value("column_length", 0.0);
    s.axis = parse_enum(doc, "axis", s.axis, {{"horizontal", CoreAxis::Horizontal}, {"vertical", CoreAxis::Vertical}});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return s;
}

nlohmann::json DepthSpec::to_json() const {
  return {{"top", top},
          {"bottom", bottom},
          {"row_order", layout.rows == RowOrder::TopToBottom ? "top_to_bottom" : "bottom_to_top"},
          {"within_row", layout.within == WithinRow::LeftToRight ? "left_to_right" : "right_to_left"},
          {"mode", mode == Mode::Proportional ? "proportional" : "fixed"},
          {"column_length", column_length},
          {"axis", axis == CoreAxis::Horizontal ? "horizontal" : "vertical"}};
}

std::vector<BoundingBox> order_columns(std::vector<BoundingBox> boxes, const Layout& layout) {
  const bool rows_down = layout.rows == RowOrder::TopToBottom;
  const bool left_first = layout.within == WithinRow::LeftToRight;
  std::stable_sort(boxes.begin(), boxes.end(), [&](const BoundingBox& a, const BoundingBox& b) {
    if (a.y != b.y) return rows_down ? a.y < b.y : a.y > b.y;
    return left_first ? a.x < b.x : a.x > b.x;
  });
  return boxes;
}

DepthResult assign_depths(const std::vector<BoundingBox>& ordered, const DepthSpec& spec) {
  if (ordered.empty()) throw Error(ErrorCode::EmptyInput, "no columns to reference");
  spec.validate();
  DepthResult out;
  const double span = spec.bottom - spec.top;

  if (spec.mode == Mode::Proportional) {
    std::vector<double> lengths;
    double total = 0.0;
    for (const auto& b : ordered) {
      lengths.push_back(spec.axis == CoreAxis::Horizontal ? b.w : b.h);
      total += lengths.back();
    }
    if (!(total > 0.0)) throw Error(ErrorCode::EmptyInput, "columns have zero total length");
    double from = spec.top;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      cumulative += lengths[i];
      // Cumulative form keeps every boundary within one rounding of the exact split.
      const double to = i + 1 == ordered.size() ? spec.bottom : spec.top + span * (cumulative / total);
      out.intervals.push_back({static_cast<int>(i), from, to});
      from = to;
    }
    return out;
  }

  double from = spec.top;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (from >= spec.bottom) {
      out.warnings.push_back(std::to_string(ordered.size() - i) + " column(s) lie beyond the bottom depth " +
                             two_decimals(spec.bottom) + " m and were not referenced");
      break;
    }
    double to = from + spec.column_length;
    if (to > spec.bottom) {
      out.warnings.push_back("column " + std::to_string(i) + " truncated at bottom depth " +
                             two_decimals(spec.bottom) + " m");
      to = spec.bottom;
    }
    out.intervals.push_back({static_cast<int>(i), from, to});
    from = to;
  }
  return out;
}

DepthResult reference_columns(const std::vector<BoundingBox>& columns, const DepthSpec& spec) {
  const auto ordered = order_columns(columns, spec.layout);
  auto result = assign_depths(ordered, spec);
  std::vector<bool> used(columns.size(), false);
  for (auto& interval : result.intervals) {
    const auto& box = ordered[static_cast<std::size_t>(interval.index)];
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (!used[i] && columns[i] == box) {
        used[i] = true;
        interval.index = static_cast<int>(i);
        break;
      }
    }
  }
  return result;
}

std::vector<std::string> contiguity_warnings(const std::vector<DepthInterval>& intervals) {
  std::vector<std::string> warnings;
  for (std::size_t i = 1; i < intervals.size(); ++i) {
    const auto& a = intervals[i - 1];
    const auto& b = intervals[i];
    if (a.to < b.from) {
      warnings.push_back("gap between columns " + std::to_string(a.index) + " and " + std::to_string(b.index) + ": " +
                         two_decimals(a.to) + "-" + two_decimals(b.from) + " m");
    } else if (a.to > b.from) {
      warnings.push_back("overlap between columns " + std::to_string(a.index) + " and " + std::to_string(b.index) +
                         ": " + two_decimals(b.from) + "-" + two_decimals(a.to) + " m");
    }
  }
  return warnings;
}

DepthResult adjust_depths(std::vector<DepthInterval> intervals, const std::vector<DepthEdit>& edits) {
  for (const auto& e : edits) {
    if (!(e.to > e.from)) {
      throw Error(ErrorCode::NonPositiveInterval, "column " + std::to_string(e.index) + ": " + two_decimals(e.from) +
                                                      " -> " + two_decimals(e.to));
    }
    const auto it = std::find_if(intervals.begin(), intervals.end(),
                                 [&](const DepthInterval& d) { return d.index == e.index; });
    if (it == intervals.end()) throw Error(ErrorCode::InvalidArgument, "no column with index " + std::to_string(e.index));
    it->from = e.from;
    it->to = e.to;
  }
  DepthResult out;
  out.warnings = contiguity_warnings(intervals);
  out.intervals = std::move(intervals);
  return out;
}

std::optional<std::pair<double, double>> depth_from_filename(const std::string& filename) {
  static const std::regex kPattern(R"(^.*_([0-9]+(?:\.[0-9]+)?)-([0-9]+(?:\.[0-9]+)?)m\.[A-Za-z0-9]+$)");
  std::smatch match;
  if (!std::regex_match(filename, match, kPattern)) return std::nullopt;
  const double top = std::stod(match[1].str());
  const double bottom = std::stod(match[2].str());
  if (!(bottom > top)) return std::nullopt;
  return std::pair{top, bottom};
}

std::string to_csv(const std::vector<BoundingBox>& boxes, const std::vector<DepthInterval>& intervals) {
  std::map<int, const DepthInterval*> by_index;
  for (const auto& d : intervals) by_index[d.index] = &d;
  std::ostringstream out;
  out << "index,x,y,w,h,depth_from_m,depth_to_m\n";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    out << i << ',' << b.x << ',' << b.y << ',' << b.w << ',' << b.h << ',';
    if (const auto it = by_index.find(static_cast<int>(i)); it != by_index.end()) {
      out << two_decimals(it->second->from) << ',' << two_decimals(it->second->to);
    } else {
      out << ',';
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const DepthInterval& d) { return {{"index", d.index}, {"from", d.from}, {"to", d.to}}; }

}  // namespace corebox::depthref
