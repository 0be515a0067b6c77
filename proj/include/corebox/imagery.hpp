#pragma once

// Raster substrate shared by every module: RGB photographs, 8-bit label
// masks, the class-name -> grey-value label map, and the loaders/resamplers
// built on top of them.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "corebox/error.hpp"
#include "corebox/geometry.hpp"

namespace corebox {

namespace fs = std::filesystem;

/// Interleaved 8-bit RGB raster, row-major.
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage(int width, int height, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);
  RasterImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  const std::uint8_t* pixel(int x, int y) const { return data_.data() + offset(x, y); }
  std::uint8_t* pixel(int x, int y) { return data_.data() + offset(x, y); }

  /// Non-owning OpenCV view over the pixel buffer (RGB order, CV_8UC3).
  cv::Mat view() const;
  static RasterImage from_mat(const cv::Mat& rgb);

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> data_;
};

/// Single-channel 8-bit label raster. 0 is background.
class GrayMask {
 public:
  explicit GrayMask(int width, int height, std::uint8_t fill = 0);
  GrayMask(int width, int height, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  std::uint8_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Sorted set of grey values that occur in the mask.
  std::vector<std::uint8_t> values() const;

  cv::Mat view() const;
  static GrayMask from_mat(const cv::Mat& gray);

  friend bool operator==(const GrayMask&, const GrayMask&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> data_;
};

/// Class name -> grey value binding. Values are unique and never 0.
class LabelMap {
 public:
  static constexpr std::uint8_t kBackground = 0;

  explicit LabelMap(std::map<std::string, int> entries);

  /// Parses `{"labels": {"core_column": 255, ...}}`. Names are trimmed.
  static LabelMap parse(const std::string& json_text);
  std::string to_json() const;

  const std::map<std::string, std::uint8_t>& entries() const { return entries_; }
  bool has_value(std::uint8_t value) const;
  bool has_class(const std::string& name) const { return entries_.contains(name); }
  std::uint8_t value_of(const std::string& name) const;
  std::string name_of(std::uint8_t value) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::map<std::string, std::uint8_t> entries_;
};

/// Real-valued RGB raster with samples in [0, 1].
struct NormalizedImage {
  int width = 0;
  int height = 0;
  int channels = RasterImage::kChannels;
  std::vector<double> data;
};

struct DatasetEntry {
  fs::path image;
  fs::path mask;
  std::string key;
};

struct DatasetScan {
  std::vector<DatasetEntry> entries;
  std::vector<std::string> warnings;
};

RasterImage load_image(const fs::path& path);
RasterImage decode_image(std::span<const std::uint8_t> bytes);
void save_image(const fs::path& path, const RasterImage& image);
std::vector<std::uint8_t> encode_png(const RasterImage& image);

GrayMask load_mask(const fs::path& path, const LabelMap& labels);
GrayMask decode_mask(std::span<const std::uint8_t> bytes, const LabelMap& labels);
void save_mask(const fs::path& path, const GrayMask& mask);
std::vector<std::uint8_t> encode_png(const GrayMask& mask);

/// Throws UnknownLabelValue for the first value that is neither 0 nor registered.
void validate_mask(const GrayMask& mask, const LabelMap& labels);

LabelMap load_label_map(const fs::path& path);

/// Bilinear resampling for photographs.
RasterImage resize(const RasterImage& image, int width, int height);
/// Nearest-neighbour resampling for masks; never introduces new grey values.
GrayMask resize(const GrayMask& mask, int width, int height);

RasterImage crop(const RasterImage& image, const BoundingBox& box);
GrayMask crop(const GrayMask& mask, const BoundingBox& box);

/// Per-image min-max scaling; a constant image maps to all zeros.
NormalizedImage min_max_normalize(const RasterImage& image);

/// Pairs images and masks by filename stem. Unpaired or mismatched files are
/// reported as warnings; throws EmptyDataset when nothing pairs up.
DatasetScan validate_dataset(const fs::path& image_dir, const fs::path& mask_dir,
                             const LabelMap& labels);

bool is_image_file(const fs::path& path);
std::vector<fs::path> list_images(const fs::path& dir);

std::vector<std::uint8_t> read_file(const fs::path& path);
void write_file(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_file(const fs::path& path, const std::string& text);

}  // namespace corebox
