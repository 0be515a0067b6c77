#pragma once

#include <cstdint>
#include <vector>

#include "corebox/geometry.hpp"
#include "corebox/imagery.hpp"

namespace corebox {

/// One 8-connected component of a single class value.
struct Segment {
  std::uint8_t class_value = 0;
  BoundingBox bbox;
  // Raster order (row-major).
  std::vector<Point> pixels;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Maximal 8-connected components of `value`, ordered by bbox (y, x) and then
/// by the raster position of each component's first pixel.
std::vector<Segment> connected_components(const GrayMask& mask, std::uint8_t value);

/// Same ordering as connected_components, without materialising pixel sets.
std::vector<BoundingBox> component_boxes(const GrayMask& mask, std::uint8_t value);

}  // namespace corebox
