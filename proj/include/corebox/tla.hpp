#pragma once

// Template-like augmentation: new (image, mask) pairs are synthesised by
// pasting pooled textures through mask-derived stencils. Foreground swaps
// replace class segments, background compositing replaces (top) or extends
// (bottom) the non-class area, cut-out removes a segment and mix-up exchanges
// two segments' textures. Classic photometric/geometric augmentations run
// last.
//
// Every operation that draws randomness takes an explicit Rng; a whole
// augment() call is a pure function of its inputs and config.seed.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corebox/components.hpp"
#include "corebox/imagery.hpp"
#include "corebox/rng.hpp"

namespace corebox::tla {

struct Sample {
  std::string id;  // path relative to the pool root
  RasterImage image;
};

struct SamplePool {
  std::map<std::string, std::vector<Sample>> foregrounds;
  std::vector<Sample> backgrounds;

  /// Throws EmptySample when the class has no samples.
  const Sample& pick_foreground(const std::string& class_name, Rng& rng) const;
  /// Throws EmptySample when there are no backgrounds.
  const Sample& pick_background(Rng& rng) const;
  std::size_t size() const;
};

struct PoolLoad {
  SamplePool pool;
  std::vector<std::string> warnings;
};

/// Reads `<root>/foreground/<class>/*` and `<root>/background/*`.
/// Folders naming classes absent from `labels` are skipped with a warning.
/// Throws EmptyPool when no sample could be loaded.
PoolLoad load_pool(const fs::path& root, const LabelMap& labels);

struct ResizeTarget {
  int width = 0;
  int height = 0;
};

struct ClassicSettings {
  double hflip_p = 0.0;
  double vflip_p = 0.0;
  double rotate_p = 0.0;
  // Degrees, counter-clockwise. Multiples of 90 are exact; anything else
  // must lie within +-15 and is resampled (bilinear image, nearest mask).
  std::vector<double> rotation_set = {90.0, 180.0, 270.0};
  double noise_p = 0.0;
  double noise_sigma = 0.0;  // in 8-bit intensity units
  double jitter_p = 0.0;
  double jitter_amplitude = 0.0;  // per-channel gain drawn from [1-j, 1+j]
  std::optional<ResizeTarget> resize;
};

struct AugmentationConfig {
  // Per-segment swap probability, keyed by class name.
  std::map<std::string, double> foreground_swap;
  double background_top = 0.0;
  double background_bottom = 0.0;
  double cutout = 0.0;  // per segment
  double mixup = 0.0;   // per image
  ClassicSettings classic;
  std::uint64_t seed = 0;

  double swap_probability(const std::string& class_name) const;

  /// Throws InvalidArgument on out-of-range fields or unknown classes.
  void validate(const LabelMap& labels) const;

  /// Missing fields take their defaults (all probabilities 0, seed 0).
  static AugmentationConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

AugmentationConfig load_config(const fs::path& path);

struct AugmentedPair {
  RasterImage image;
  GrayMask mask;
  // One object per applied transform: {"op": ..., ...details}.
  nlohmann::json log = nlohmann::json::array();

  AugmentedPair(RasterImage image_, GrayMask mask_);
};

/// Covers `width` x `height` with the sample (bilinear upscale only when the
/// sample is too small in either axis) and returns the covering raster.
RasterImage cover(const RasterImage& sample, int width, int height);

/// Pastes a random bbox-sized crop of the sample onto the image wherever the
/// mask equals the segment's class inside the segment's bbox.
RasterImage swap_foreground(const RasterImage& image, const GrayMask& mask, const Segment& segment,
                            const RasterImage& sample, Rng& rng);

/// Replaces every background (mask = 0) pixel with a random image-sized crop
/// of the sample.
RasterImage apply_background_top(const RasterImage& image, const GrayMask& mask,
                                 const RasterImage& sample, Rng& rng);

struct CanvasPlacement {
  int canvas_width = 0;
  int canvas_height = 0;
  int offset_x = 0;
  int offset_y = 0;
};

/// Draws a canvas scale uniformly in [1.0, 1.5] and a uniform offset.
CanvasPlacement draw_canvas_placement(int width, int height, Rng& rng);

/// Pastes the whole pair onto the sample resized to the canvas; the mask is 0
/// outside the pasted region.
AugmentedPair composite_on_canvas(const RasterImage& image, const GrayMask& mask,
                                  const RasterImage& sample, const CanvasPlacement& placement);

AugmentedPair apply_background_bottom(const RasterImage& image, const GrayMask& mask,
                                      const RasterImage& sample, Rng& rng);

/// Replaces the segment's pixels with background texture (sample covering the
/// image, anchored top-left) and zeroes them in the mask.
AugmentedPair cutout_segment(const RasterImage& image, const GrayMask& mask, const Segment& segment,
                             const RasterImage& sample);

/// Exchanges the textures of two segments of the same class: each segment's
/// pixels receive a crop of the other's bbox content, upscaled if needed.
RasterImage mixup_segments(const RasterImage& image, const GrayMask& mask, const Segment& a,
                           const Segment& b, Rng& rng);

AugmentedPair classic_augment(const AugmentedPair& pair, const ClassicSettings& settings, Rng& rng);

/// Full pipeline: foreground swaps, mix-up, cut-out, background top, background
/// bottom, classic augmentations. Randomness comes from config.seed only.
AugmentedPair augment(const RasterImage& image, const GrayMask& mask, const SamplePool& pool,
                      const AugmentationConfig& config, const LabelMap& labels);

struct DatasetOutput {
  fs::path image_dir;
  fs::path mask_dir;
  fs::path manifest;
};

/// Writes `count` augmented pairs. Output i draws from entries[i % size] with
/// seed config.seed + i, so the files do not depend on `jobs`.
/// Returns the manifest that was written.
nlohmann::json augment_dataset(const std::vector<DatasetEntry>& entries, const SamplePool& pool,
                               const AugmentationConfig& config, const LabelMap& labels, int count,
                               const DatasetOutput& out, int jobs = 1);

}  // namespace corebox::tla
