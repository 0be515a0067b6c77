#include "corebox/components.hpp"

#include <algorithm>
#include <numeric>

#include <opencv2/imgproc.hpp>

namespace corebox {

namespace {

struct Labelling {
  cv::Mat labels;  // CV_32S, 0 = not the class
  std::vector<BoundingBox> boxes;      // index = label - 1
  std::vector<std::int64_t> first;     // raster index of first pixel
  std::vector<std::int64_t> area;
  std::vector<std::size_t> order;      // sorted label indices
};

Labelling label(const GrayMask& mask, std::uint8_t value) {
  Labelling out;
  const cv::Mat binary = mask.view() == value;
  cv::Mat stats;
  cv::Mat centroids;
  const int count = cv::connectedComponentsWithStats(binary, out.labels, stats, centroids, 8, CV_32S);
  const int n = count - 1;
  out.boxes.resize(n);
  out.area.resize(n);
  out.first.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    const auto* s = stats.ptr<int>(i + 1);
    out.boxes[i] = {s[cv::CC_STAT_LEFT], s[cv::CC_STAT_TOP], s[cv::CC_STAT_WIDTH], s[cv::CC_STAT_HEIGHT]};
    out.area[i] = s[cv::CC_STAT_AREA];
  }
  if (n > 0) {
    // A component's first pixel lies on its top bbox row.
    for (int i = 0; i < n; ++i) {
      const auto& b = out.boxes[i];
      const int* row = out.labels.ptr<int>(b.y);
      for (int x = b.x; x < b.right(); ++x) {
        if (row[x] == i + 1) {
          out.first[i] = static_cast<std::int64_t>(b.y) * mask.width() + x;
          break;
        }
      }
    }
  }
  out.order.resize(n);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ba = out.boxes[a];
    const auto& bb = out.boxes[b];
    if (ba.y != bb.y) return ba.y < bb.y;
    if (ba.x != bb.x) return ba.x < bb.x;
    return out.first[a] < out.first[b];
  });
  return out;
}

}  // namespace

std::vector<Segment> connected_components(const GrayMask& mask, std::uint8_t value) {
  auto lab = label(mask, value);
  const auto n = lab.boxes.size();
  std::vector<Segment> by_label(n);
  for (std::size_t i = 0; i < n; ++i) {
    by_label[i].class_value = value;
    by_label[i].bbox = lab.boxes[i];
    by_label[i].pixels.reserve(static_cast<std::size_t>(lab.area[i]));
  }
  if (n > 0) {
    for (int y = 0; y < mask.height(); ++y) {
      const int* row = lab.labels.ptr<int>(y);
      for (int x = 0; x < mask.width(); ++x) {
        if (row[x] > 0) by_label[row[x] - 1].pixels.push_back({x, y});
      }
    }
  }
  std::vector<Segment> out;
  out.reserve(n);
  for (auto idx : lab.order) out.push_back(std::move(by_label[idx]));
  return out;
}

std::vector<BoundingBox> component_boxes(const GrayMask& mask, std::uint8_t value) {
  const auto lab = label(mask, value);
  std::vector<BoundingBox> out;
  out.reserve(lab.order.size());
  for (auto idx : lab.order) out.push_back(lab.boxes[idx]);
  return out;
}

}  // namespace corebox
