#include <gtest/gtest.h>

#include <random>
#include <set>

#include "corebox/extraction.hpp"
#include "oracles.hpp"

using namespace corebox;
using namespace corebox::extraction;

namespace {

std::vector<BoundingBox> rows_of_widths(const std::vector<int>& widths, int height = 90, int gap = 10) {
  std::vector<BoundingBox> boxes;
  int y = 0;
  for (int w : widths) {
    boxes.push_back({0, y, w, height});
    y += height + gap;
  }
  return boxes;
}

void paint(GrayMask& m, const BoundingBox& b, std::uint8_t v = 255) {
  for (int y = b.y; y < b.bottom(); ++y) {
    for (int x = b.x; x < b.right(); ++x) m.at(x, y) = v;
  }
}

const LabelMap kLabels({{"core_column", 255}});

}  // namespace

TEST(BoxesFromMask, Empty) { EXPECT_TRUE(boxes_from_mask(GrayMask(20, 20), 255).empty()); }

TEST(BoxesFromMask, FullWidthBar) {
  GrayMask m(64, 120);
  paint(m, {0, 10, 64, 90});
  EXPECT_EQ(boxes_from_mask(m, 255), (std::vector<BoundingBox>{{0, 10, 64, 90}}));
}

TEST(BoxesFromMask, MatchesFloodFill) {
  std::mt19937_64 gen(17);
  for (int i = 0; i < 200; ++i) {
    const auto m = oracle::random_mask(gen, 64);
    const auto boxes = boxes_from_mask(m, 255);
    const auto expected = oracle::flood_fill(m, 255);
    ASSERT_EQ(boxes.size(), expected.size());
    for (std::size_t k = 0; k < boxes.size(); ++k) ASSERT_EQ(boxes[k], expected[k].box);
  }
}

TEST(Median, EvenAndOdd) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median({}), Error);
}

TEST(MedianFilter, WorkedExampleBand) {
  // Ten widths with median 430: two out-of-band boxes either side.
  const std::vector<int> widths = {300, 358, 359, 400, 420, 440, 480, 516, 517, 600};
  const auto boxes = rows_of_widths(widths);
  const auto r = median_size_filter(boxes, 1.2);
  ASSERT_TRUE(r.width.has_value());
  EXPECT_FALSE(r.height.has_value());
  EXPECT_EQ(r.width->median, 430.0);
  EXPECT_NEAR(r.width->lower, 358.3333333333333, 1e-9);
  EXPECT_NEAR(r.width->upper, 516.0, 1e-9);

  std::vector<int> kept;
  for (const auto& b : r.kept) kept.push_back(b.w);
  EXPECT_EQ(kept, (std::vector<int>{359, 400, 420, 440, 480, 516}));
  std::vector<int> dropped;
  for (const auto& d : r.dropped) {
    dropped.push_back(d.box.w);
    EXPECT_EQ(d.filter, Filter::MedianSize);
  }
  EXPECT_EQ(dropped, (std::vector<int>{300, 358, 517, 600}));
}

TEST(MedianFilter, IdenticalWidthsAllKept) {
  const auto boxes = rows_of_widths({250, 250, 250, 250, 250});
  for (double n : {1.0001, 1.2, 1.5, 10.0}) EXPECT_EQ(median_size_filter(boxes, n).kept.size(), 5u);
}

TEST(MedianFilter, OutlierDropped) {
  const auto r = median_size_filter(rows_of_widths({100, 100, 100, 900}), 1.5);
  EXPECT_NEAR(r.width->lower, 66.6667, 1e-4);
  EXPECT_EQ(r.width->upper, 150.0);
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].box.w, 900);
}

TEST(MedianFilter, HeightAndBoth) {
  std::vector<BoundingBox> boxes = {{0, 0, 100, 50}, {0, 60, 100, 52}, {0, 120, 100, 200}, {0, 400, 30, 51}};
  const auto h = median_size_filter(boxes, 1.3, Dimension::Height);
  EXPECT_EQ(h.kept.size(), 3u);
  EXPECT_EQ(h.dropped[0].box.h, 200);
  const auto both = median_size_filter(boxes, 1.3, Dimension::Both);
  EXPECT_EQ(both.kept.size(), 2u);
}

TEST(MedianFilter, EmptyInput) {
  EXPECT_THROW(median_size_filter({}, 1.2), Error);
}

TEST(MedianFilter, ScaleEquivariant) {
  std::mt19937_64 gen(23);
  std::uniform_int_distribution<int> width(5, 400);
  std::uniform_int_distribution<int> count(1, 12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> widths(count(gen));
    for (auto& w : widths) w = width(gen);
    const auto base = median_size_filter(rows_of_widths(widths), 1.3);
    for (int k : {2, 3, 7}) {
      std::vector<int> scaled = widths;
      for (auto& w : scaled) w *= k;
      const auto r = median_size_filter(rows_of_widths(scaled, 90 * k, 10 * k), 1.3);
      ASSERT_NEAR(r.width->lower, base.width->lower * k, 1e-9);
      ASSERT_NEAR(r.width->upper, base.width->upper * k, 1e-9);
      ASSERT_EQ(r.kept.size(), base.kept.size());
      for (std::size_t i = 0; i < r.kept.size(); ++i) ASSERT_EQ(r.kept[i].w, base.kept[i].w * k);
      const auto g0 = global_width_filter(rows_of_widths(widths), 1000, 50);
      const auto g1 = global_width_filter(rows_of_widths(scaled), 1000 * k, 50);
      ASSERT_NEAR(g1.gt, g0.gt * k, 1e-9);
      ASSERT_EQ(g1.kept.size(), g0.kept.size());
    }
  }
}

TEST(GlobalWidth, PrintedFormula) {
  const auto r = global_width_filter({}, 4000, 100);
  EXPECT_EQ(r.gt, 40.0);
}

TEST(GlobalWidth, InclusiveBoundary) {
  const auto r = global_width_filter(rows_of_widths({39, 40, 41}), 4000, 100);
  ASSERT_EQ(r.kept.size(), 2u);
  EXPECT_EQ(r.kept[0].w, 40);
  EXPECT_EQ(r.kept[1].w, 41);
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].filter, Filter::GlobalWidth);
}

TEST(GlobalWidth, MOneKeepsFullWidthOnly) {
  const auto r = global_width_filter(rows_of_widths({4000, 3999}), 4000, 1);
  EXPECT_EQ(r.gt, 4000.0);
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].w, 4000);
}

TEST(Position, Fixtures) {
  const std::vector<BoundingBox> boxes = {{0, 0, 10, 10}, {0, 100, 10, 10}, {0, 900, 10, 10}};
  EXPECT_EQ(position_filter(boxes, 1000, 1.0).kept.size(), 3u);
  const auto r = position_filter(boxes, 1000, 0.5);
  ASSERT_EQ(r.kept.size(), 2u);
  EXPECT_EQ(r.kept[1].y, 100);
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].box.y, 900);
  EXPECT_EQ(r.dropped[0].filter, Filter::Position);
  // y = 0 survives any ratio.
  EXPECT_EQ(position_filter({{0, 0, 5, 5}}, 1000, 0.001).kept.size(), 1u);
}

TEST(CountCheck, Fixtures) {
  EXPECT_TRUE(count_check(rows_of_widths({400, 410, 420, 430})).empty());
  const auto none = count_check({});
  ASSERT_EQ(none.size(), 1u);
  EXPECT_EQ(none[0], "no core detected");
  const auto nine = count_check(rows_of_widths(std::vector<int>(9, 400)));
  ASSERT_EQ(nine.size(), 1u);
  EXPECT_NE(nine[0].find("number of core columns: 9"), std::string::npos);
}

TEST(CountCheck, FlagsOutOfBandColumn) {
  const auto w = count_check(rows_of_widths({400, 400, 400, 100}));
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("column 3"), std::string::npos);
  EXPECT_NE(w[0].find("smaller"), std::string::npos);
}

TEST(ExtractColumns, FullImageIsIdentity) {
  std::mt19937_64 gen(31);
  const auto img = oracle::random_image(gen, 30, 20);
  const auto crops = extract_columns(img, {{0, 0, 30, 20}});
  ASSERT_EQ(crops.size(), 1u);
  EXPECT_EQ(crops[0].image, img);
}

TEST(ExtractColumns, RegionsMatchSource) {
  std::mt19937_64 gen(32);
  const auto img = oracle::random_image(gen, 50, 40);
  const std::vector<BoundingBox> boxes = {{2, 3, 10, 5}, {20, 30, 25, 9}};
  const auto crops = extract_columns(img, boxes);
  ASSERT_EQ(crops.size(), 2u);
  for (const auto& c : crops) {
    ASSERT_EQ(c.image.width(), c.box.w);
    ASSERT_EQ(c.image.height(), c.box.h);
    for (int y = 0; y < c.box.h; ++y) {
      for (int x = 0; x < c.box.w; ++x) {
        ASSERT_TRUE(std::equal(c.image.pixel(x, y), c.image.pixel(x, y) + 3, img.pixel(c.box.x + x, c.box.y + y)));
      }
    }
  }
}

TEST(ExtractColumns, OutOfBounds) {
  try {
    extract_columns(RasterImage(10, 10), {{5, 5, 6, 2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoxOutOfBounds);
  }
}

TEST(Pipeline, CleanFourColumns) {
  GrayMask m(600, 400);
  for (int i = 0; i < 4; ++i) paint(m, {20, 20 + i * 95, 540 - i * 10, 80});
  const auto r = run_pipeline(RasterImage(600, 400, 9, 9, 9), m, kLabels, {});
  EXPECT_EQ(r.columns.size(), 4u);
  EXPECT_TRUE(r.report.warnings.empty());
  EXPECT_TRUE(r.report.dropped.empty());
  EXPECT_EQ(r.report.gt, 6.0);
}

TEST(Pipeline, GiantComponentDropped) {
  GrayMask m(1000, 900);
  for (int i = 0; i < 5; ++i) paint(m, {10, 10 + i * 100, 400 + i * 5, 80});
  const BoundingBox giant{10, 520, 980, 370};
  paint(m, giant);
  const auto r = analyse(1000, 900, m, kLabels, {});
  EXPECT_EQ(r.detected.size(), 6u);
  EXPECT_EQ(r.kept.size(), 5u);
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].box, giant);
  EXPECT_EQ(r.dropped[0].filter, Filter::MedianSize);
  const auto j = r.to_json();
  EXPECT_EQ(j["dropped"][0]["filter"], "median_size");
}

TEST(Pipeline, FiltersOnlyRemove) {
  std::mt19937_64 gen(33);
  for (int i = 0; i < 200; ++i) {
    const auto m = oracle::random_mask(gen, 64);
    FilterConfig c;
    c.n = 1.1 + (i % 5) * 0.2;
    c.m = 1 + i % 50;
    c.y_max_ratio = 0.3 + (i % 7) * 0.1;
    const auto r = analyse(m.width(), m.height(), m, kLabels, c);
    ASSERT_EQ(r.kept.size() + r.dropped.size(), r.detected.size());
    std::multiset<std::tuple<int, int, int, int>> detected, union_set;
    for (const auto& b : r.detected) detected.insert({b.x, b.y, b.w, b.h});
    for (const auto& b : r.kept) union_set.insert({b.x, b.y, b.w, b.h});
    for (const auto& d : r.dropped) union_set.insert({d.box.x, d.box.y, d.box.w, d.box.h});
    ASSERT_EQ(detected, union_set);
  }
}

TEST(Pipeline, DisabledFiltersKeepEverything) {
  std::mt19937_64 gen(34);
  FilterConfig c;
  c.median_filter = false;
  c.width_filter = false;
  c.position_filter = false;
  for (int i = 0; i < 50; ++i) {
    const auto m = oracle::random_mask(gen, 64);
    const auto r = analyse(m.width(), m.height(), m, kLabels, c);
    ASSERT_EQ(r.kept, r.detected);
  }
}

TEST(Pipeline, EmptyMaskWarns) {
  const auto r = analyse(10, 10, GrayMask(10, 10), kLabels, {});
  EXPECT_TRUE(r.kept.empty());
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.warnings[0], "no core detected");
}

TEST(Pipeline, ReportJson) {
  GrayMask m(200, 100);
  paint(m, {0, 0, 150, 30});
  paint(m, {0, 50, 140, 30});
  const auto j = analyse(200, 100, m, kLabels, {}).to_json();
  EXPECT_EQ(j["kept"].size(), 2u);
  EXPECT_EQ(j["median_width"]["median"], 145.0);
  EXPECT_EQ(j["gt"], 2.0);
  EXPECT_EQ(j["class"]["name"], "core_column");
  EXPECT_EQ(j["class"]["value"], 255);
}

TEST(FilterConfig, JsonRoundTripAndValidation) {
  FilterConfig c;
  c.n = 1.4;
  c.m = 50;
  c.dimension = Dimension::Both;
  const auto back = FilterConfig::from_json(c.to_json());
  EXPECT_EQ(back.n, 1.4);
  EXPECT_EQ(back.m, 50.0);
  EXPECT_EQ(back.dimension, Dimension::Both);
  EXPECT_THROW(FilterConfig::from_json({{"n", 1.0}}), Error);
  EXPECT_THROW(FilterConfig::from_json({{"m", 0.5}}), Error);
  EXPECT_THROW(FilterConfig::from_json({{"bogus", 1}}), Error);
  EXPECT_THROW(FilterConfig::from_json({{"y_max_ratio", 0.0}}), Error);
}

TEST(ResolveClass, Choices) {
  EXPECT_EQ(resolve_class(kLabels, "").first, "core_column");
  const LabelMap single({{"rock", 80}});
  EXPECT_EQ(resolve_class(single, "").second, 80);
  const LabelMap several({{"a", 1}, {"b", 2}});
  EXPECT_THROW(resolve_class(several, ""), Error);
  EXPECT_EQ(resolve_class(several, "b").second, 2);
}
