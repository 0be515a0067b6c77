#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "corebox/depthref.hpp"
#include "corebox/error.hpp"

using namespace corebox;
using namespace corebox::depthref;

namespace {

DepthSpec spec(double top, double bottom) {
  DepthSpec s;
  s.top = top;
  s.bottom = bottom;
  return s;
}

std::vector<BoundingBox> random_layout(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> count(1, 12), coord(0, 3000), len(1, 2000), thick(1, 200);
  std::vector<BoundingBox> boxes(count(gen));
  for (auto& b : boxes) b = {coord(gen), coord(gen), len(gen), thick(gen)};
  return boxes;
}

}  // namespace

TEST(OrderColumns, TopToBottom) {
  const std::vector<BoundingBox> boxes = {{0, 300, 5, 5}, {0, 10, 5, 5}, {0, 150, 5, 5}};
  const auto ordered = order_columns(boxes, {});
  EXPECT_EQ(ordered[0].y, 10);
  EXPECT_EQ(ordered[1].y, 150);
  EXPECT_EQ(ordered[2].y, 300);
  auto reversed = order_columns(boxes, Layout{}.reversed());
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(reversed, ordered);
}

TEST(OrderColumns, SingleBox) {
  EXPECT_EQ(order_columns({{1, 2, 3, 4}}, {}), (std::vector<BoundingBox>{{1, 2, 3, 4}}));
}

TEST(OrderColumns, PermutationAndReversal) {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 300; ++i) {
    auto boxes = random_layout(gen);
    // Distinct keys so the reversed layout is an exact reversal.
    for (std::size_t k = 0; k < boxes.size(); ++k) boxes[k].y = static_cast<int>(k * 37 % 101) * 10 + static_cast<int>(k);
    const auto fwd = order_columns(boxes, {});
    auto rev = order_columns(boxes, Layout{}.reversed());
    ASSERT_TRUE(std::is_permutation(fwd.begin(), fwd.end(), boxes.begin()));
    std::reverse(rev.begin(), rev.end());
    ASSERT_EQ(rev, fwd);
  }
}

TEST(AssignDepths, SingleColumn) {
  const auto r = assign_depths({{0, 0, 100, 10}}, spec(1200.0, 1201.0));
  EXPECT_EQ(r.intervals, (std::vector<DepthInterval>{{0, 1200.0, 1201.0}}));
}

TEST(AssignDepths, EqualHalves) {
  const auto r = assign_depths({{0, 0, 50, 10}, {0, 20, 50, 10}}, spec(0, 2));
  EXPECT_EQ(r.intervals, (std::vector<DepthInterval>{{0, 0, 1}, {1, 1, 2}}));
}

TEST(AssignDepths, ProportionalFixture) {
  const auto r = assign_depths({{0, 0, 300, 10}, {0, 20, 100, 10}}, spec(10, 14));
  EXPECT_EQ(r.intervals, (std::vector<DepthInterval>{{0, 10.0, 13.0}, {1, 13.0, 14.0}}));
  EXPECT_TRUE(r.warnings.empty());
}

TEST(AssignDepths, VerticalAxisUsesHeight) {
  auto s = spec(0, 4);
  s.axis = CoreAxis::Vertical;
  const auto r = assign_depths({{0, 0, 10, 300}, {20, 0, 10, 100}}, s);
  EXPECT_EQ(r.intervals[0].to, 3.0);
}

TEST(AssignDepths, Rejections) {
  EXPECT_THROW(assign_depths({}, spec(0, 1)), Error);
  try {
    assign_depths({{0, 0, 1, 1}}, spec(5, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSpec);
  }
  auto s = spec(0, 1);
  s.mode = Mode::FixedLength;
  EXPECT_THROW(assign_depths({{0, 0, 1, 1}}, s), Error);
}

TEST(AssignDepths, FixedLengthTruncatesAndSkips) {
  auto s = spec(100, 102.5);
  s.mode = Mode::FixedLength;
  s.column_length = 1.0;
  std::vector<BoundingBox> boxes;
  for (int i = 0; i < 4; ++i) boxes.push_back({0, i * 20, 100, 10});
  const auto r = assign_depths(boxes, s);
  ASSERT_EQ(r.intervals.size(), 3u);
  EXPECT_EQ(r.intervals[2], (DepthInterval{2, 102.0, 102.5}));
  EXPECT_EQ(r.warnings.size(), 2u);
}

TEST(AssignDepths, ProportionalInvariants) {
  std::mt19937_64 gen(500);
  std::uniform_real_distribution<double> top(0.0, 3000.0), span(0.01, 50.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto boxes = order_columns(random_layout(gen), {});
    const double t = top(gen);
    const double b = t + span(gen);
    const auto r = assign_depths(boxes, spec(t, b));
    ASSERT_EQ(r.intervals.size(), boxes.size());
    ASSERT_EQ(r.intervals.front().from, t);
    ASSERT_EQ(r.intervals.back().to, b);
    double total_px = 0.0;
    for (const auto& box : boxes) total_px += box.w;
    double sum = 0.0;
    for (std::size_t i = 0; i < r.intervals.size(); ++i) {
      const auto& d = r.intervals[i];
      ASSERT_GT(d.to, d.from);
      if (i > 0) ASSERT_EQ(d.from, r.intervals[i - 1].to);
      sum += d.to - d.from;
      const double expected = (b - t) * boxes[i].w / total_px;
      ASSERT_NEAR(d.to - d.from, expected, 1e-9 * std::max(1.0, expected) + 1e-9);
    }
    ASSERT_NEAR(sum, b - t, 1e-9);
    ASSERT_TRUE(contiguity_warnings(r.intervals).empty());
  }
}

TEST(AssignDepths, ScaleEquivariant) {
  std::mt19937_64 gen(501);
  for (int trial = 0; trial < 200; ++trial) {
    const auto boxes = random_layout(gen);
    const auto s = spec(10.0, 17.5);
    for (int k : {2, 5}) {
      auto scaled = boxes;
      for (auto& b : scaled) b = {b.x * k, b.y * k, b.w * k, b.h * k};
      ASSERT_EQ(assign_depths(scaled, s).intervals, assign_depths(boxes, s).intervals);
    }
  }
}

TEST(ReferenceColumns, IndexesFollowInputPositions) {
  // Input in (y, x) order; bottom-to-top layout references the last box first.
  const std::vector<BoundingBox> columns = {{0, 0, 300, 10}, {0, 50, 100, 10}};
  auto s = spec(10, 14);
  s.layout.rows = RowOrder::BottomToTop;
  const auto r = reference_columns(columns, s);
  ASSERT_EQ(r.intervals.size(), 2u);
  EXPECT_EQ(r.intervals[0], (DepthInterval{1, 10.0, 11.0}));
  EXPECT_EQ(r.intervals[1], (DepthInterval{0, 11.0, 14.0}));
}

TEST(AdjustDepths, EmptyEditIsIdentity) {
  const std::vector<DepthInterval> base = {{0, 10, 13}, {1, 13, 14}};
  const auto r = adjust_depths(base, {});
  EXPECT_EQ(r.intervals, base);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(AdjustDepths, GapWarning) {
  const auto r = adjust_depths({{0, 10, 13}, {1, 13, 14}}, {{1, 13.2, 14.0}});
  EXPECT_EQ(r.intervals[1], (DepthInterval{1, 13.2, 14.0}));
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.warnings[0], "gap between columns 0 and 1: 13.00-13.20 m");
}

TEST(AdjustDepths, OverlapWarning) {
  const auto r = adjust_depths({{0, 10, 13}, {1, 13, 14}}, {{0, 10, 13.5}});
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("overlap"), std::string::npos);
}

TEST(AdjustDepths, Rejections) {
  try {
    adjust_depths({{0, 10, 13}, {1, 13, 14}}, {{1, 14.0, 13.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveInterval);
  }
  EXPECT_THROW(adjust_depths({{0, 10, 13}}, {{7, 1, 2}}), Error);
}

TEST(Filename, ParsesPattern) {
  const auto d = depth_from_filename("box12_1200.0-1201.0m.jpg");
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->first, 1200.0);
  EXPECT_EQ(d->second, 1201.0);
  EXPECT_EQ(depth_from_filename("box_1200.0-1201.0m.jpg")->first, 1200.0);
  EXPECT_EQ(depth_from_filename("a_b_5-7m.png")->second, 7.0);
  EXPECT_FALSE(depth_from_filename("box12.jpg").has_value());
  EXPECT_FALSE(depth_from_filename("box_1201-1200m.jpg").has_value());
  EXPECT_FALSE(depth_from_filename("box_12-13.jpg").has_value());
}

TEST(Csv, Layout) {
  const std::vector<BoundingBox> boxes = {{1, 2, 300, 10}, {3, 40, 100, 12}, {0, 90, 5, 5}};
  const auto csv = to_csv(boxes, {{0, 10, 13}, {1, 13, 14}});
  EXPECT_EQ(csv,
            "index,x,y,w,h,depth_from_m,depth_to_m\n"
            "0,1,2,300,10,10.00,13.00\n"
            "1,3,40,100,12,13.00,14.00\n"
            "2,0,90,5,5,,\n");
}

TEST(DepthSpec, JsonRoundTrip) {
  auto s = spec(3.5, 9.25);
  s.layout.within = WithinRow::RightToLeft;
  s.mode = Mode::FixedLength;
  s.column_length = 0.75;
  s.axis = CoreAxis::Vertical;
  const auto back = DepthSpec::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());
  EXPECT_THROW(DepthSpec::from_json({{"top", 1}}), Error);
  EXPECT_THROW(DepthSpec::from_json({{"top", 1}, {"bottom", 2}, {"mode", "weird"}}), Error);
}
