#include "corebox/imagery.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace corebox {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownLabelValue: return "UnknownLabelValue";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateValue: return "DuplicateValue";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::InvalidTarget: return "InvalidTarget";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidBeta: return "InvalidBeta";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::SameSegment: return "SameSegment";
    case ErrorCode::ClassMismatch: return "ClassMismatch";
    case ErrorCode::BoxOutOfBounds: return "BoxOutOfBounds";
    case ErrorCode::DegenerateSpec: return "DegenerateSpec";
    case ErrorCode::NonPositiveInterval: return "NonPositiveInterval";
  }
  return "Unknown";
}

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidTarget, "raster dimensions must be at least 1x1, got " +
                                              std::to_string(width) + "x" + std::to_string(height));
  }
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower_extension(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::vector<std::uint8_t> encode_mat(const cv::Mat& mat, const std::string& ext) {
  std::vector<std::uint8_t> out;
  std::vector<int> params;
  if (ext == ".jpg" || ext == ".jpeg") params = {cv::IMWRITE_JPEG_QUALITY, 95};
  bool ok = false;
  try {
    ok = cv::imencode(ext, mat, out, params);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::IoError, "cannot encode " + ext + ": " + e.what());
  }
  if (!ok) throw Error(ErrorCode::IoError, "cannot encode " + ext);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RasterImage / GrayMask

RasterImage::RasterImage(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width_(width), height_(height) {
  check_dims(width, height);
  data_.resize(static_cast<std::size_t>(width) * height * kChannels);
  for (std::size_t i = 0; i < data_.size(); i += kChannels) {
    data_[i] = r;
    data_[i + 1] = g;
    data_[i + 2] = b;
  }
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * height * kChannels) {
    throw Error(ErrorCode::DimensionMismatch, "RGB buffer size does not match dimensions");
  }
}

cv::Mat RasterImage::view() const {
  return cv::Mat(height_, width_, CV_8UC3, const_cast<std::uint8_t*>(data_.data()));
}

RasterImage RasterImage::from_mat(const cv::Mat& rgb) {
  CV_Assert(rgb.type() == CV_8UC3);
  const cv::Mat dense = rgb.isContinuous() ? rgb : rgb.clone();
  return RasterImage(dense.cols, dense.rows,
                     std::vector<std::uint8_t>(dense.data, dense.data + dense.total() * 3));
}

GrayMask::GrayMask(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayMask::GrayMask(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::DimensionMismatch, "mask buffer size does not match dimensions");
  }
}

std::vector<std::uint8_t> GrayMask::values() const {
  std::array<bool, 256> seen{};
  for (auto v : data_) seen[v] = true;
  std::vector<std::uint8_t> out;
  for (int v = 0; v < 256; ++v) {
    if (seen[v]) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

cv::Mat GrayMask::view() const {
  return cv::Mat(height_, width_, CV_8UC1, const_cast<std::uint8_t*>(data_.data()));
}

GrayMask GrayMask::from_mat(const cv::Mat& gray) {
  CV_Assert(gray.type() == CV_8UC1);
  const cv::Mat dense = gray.isContinuous() ? gray : gray.clone();
  return GrayMask(dense.cols, dense.rows,
                  std::vector<std::uint8_t>(dense.data, dense.data + dense.total()));
}

// ---------------------------------------------------------------------------
// LabelMap

LabelMap::LabelMap(std::map<std::string, int> entries) {
  if (entries.empty()) throw Error(ErrorCode::ParseError, "label map has no classes");
  std::set<int> seen;
  for (const auto& [raw_name, value] : entries) {
    const auto name = trim(raw_name);
    if (name.empty()) throw Error(ErrorCode::ParseError, "empty class name");
    if (value < 1 || value > 255) {
      throw Error(ErrorCode::ValueOutOfRange,
                  "class '" + name + "' has value " + std::to_string(value) + " (allowed 1-255)");
    }
    if (!seen.insert(value).second) {
      throw Error(ErrorCode::DuplicateValue, "grey value " + std::to_string(value) + " used twice");
    }
    if (!entries_.emplace(name, static_cast<std::uint8_t>(value)).second) {
      throw Error(ErrorCode::ParseError, "class '" + name + "' defined twice");
    }
  }
}

LabelMap LabelMap::parse(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (!doc.is_object() || !doc.contains("labels") || !doc["labels"].is_object()) {
    throw Error(ErrorCode::ParseError, "expected an object with a top-level \"labels\" object");
  }
  std::map<std::string, int> entries;
  for (const auto& [name, value] : doc["labels"].items()) {
    if (!value.is_number_integer()) {
      if (value.is_number()) {
        throw Error(ErrorCode::ValueOutOfRange, "class '" + name + "' value is not an integer");
      }
      throw Error(ErrorCode::ParseError, "class '" + name + "' value is not a number");
    }
    const auto v = value.get<long long>();
    if (v < 0 || v > 255) {
      throw Error(ErrorCode::ValueOutOfRange,
                  "class '" + name + "' has value " + std::to_string(v) + " (allowed 1-255)");
    }
    const auto key = trim(name);
    if (entries.contains(key)) throw Error(ErrorCode::ParseError, "class '" + key + "' defined twice");
    entries[key] = static_cast<int>(v);
  }
  return LabelMap(std::move(entries));
}

std::string LabelMap::to_json() const {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [name, value] : entries_) labels[name] = value;
  return nlohmann::json{{"labels", labels}}.dump(2);
}

bool LabelMap::has_value(std::uint8_t value) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [value](const auto& kv) { return kv.second == value; });
}

std::uint8_t LabelMap::value_of(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorCode::InvalidArgument, "unknown class '" + name + "'");
  return it->second;
}

std::string LabelMap::name_of(std::uint8_t value) const {
  for (const auto& [name, v] : entries_) {
    if (v == value) return name;
  }
  throw Error(ErrorCode::UnknownLabelValue, std::to_string(value));
}

LabelMap load_label_map(const fs::path& path) {
  const auto bytes = read_file(path);
  return LabelMap::parse(std::string(bytes.begin(), bytes.end()));
}

// ---------------------------------------------------------------------------
// File IO

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

void write_file(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorCode::DecodeError, "empty input");
  cv::Mat decoded;
  try {
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::DecodeError, e.what());
  }
  if (decoded.empty()) throw Error(ErrorCode::DecodeError, "unsupported or corrupt image data");
  cv::Mat rgb;
  cv::cvtColor(decoded, rgb, cv::COLOR_BGR2RGB);
  return RasterImage::from_mat(rgb);
}

RasterImage load_image(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const RasterImage& image) {
  cv::Mat bgr;
  cv::cvtColor(image.view(), bgr, cv::COLOR_RGB2BGR);
  return encode_mat(bgr, ".png");
}

void save_image(const fs::path& path, const RasterImage& image) {
  auto ext = lower_extension(path);
  if (ext.empty()) ext = ".png";
  cv::Mat bgr;
  cv::cvtColor(image.view(), bgr, cv::COLOR_RGB2BGR);
  write_file(path, encode_mat(bgr, ext));
}

void validate_mask(const GrayMask& mask, const LabelMap& labels) {
  for (auto v : mask.values()) {
    if (v != LabelMap::kBackground && !labels.has_value(v)) {
      throw Error(ErrorCode::UnknownLabelValue, std::to_string(v));
    }
  }
}

GrayMask decode_mask(std::span<const std::uint8_t> bytes, const LabelMap& labels) {
  if (bytes.empty()) throw Error(ErrorCode::DecodeError, "empty input");
  cv::Mat decoded;
  try {
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    decoded = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::DecodeError, e.what());
  }
  if (decoded.empty()) throw Error(ErrorCode::DecodeError, "unsupported or corrupt mask data");
  if (decoded.depth() != CV_8U) throw Error(ErrorCode::DecodeError, "mask must be 8 bits per sample");

  cv::Mat gray;
  if (decoded.channels() == 1) {
    gray = decoded;
  } else if (decoded.channels() == 3 || decoded.channels() == 4) {
    // Colour-encoded masks are accepted only when every pixel is grey.
    std::vector<cv::Mat> planes;
    cv::split(decoded, planes);
    if (cv::countNonZero(planes[0] != planes[1]) != 0 || cv::countNonZero(planes[0] != planes[2]) != 0) {
      throw Error(ErrorCode::DecodeError, "mask has distinct colour channels");
    }
    gray = planes[0];
  } else {
    throw Error(ErrorCode::DecodeError, "unsupported channel count " + std::to_string(decoded.channels()));
  }
  auto mask = GrayMask::from_mat(gray);
  validate_mask(mask, labels);
  return mask;
}

GrayMask load_mask(const fs::path& path, const LabelMap& labels) {
  const auto bytes = read_file(path);
  try {
    return decode_mask(bytes, labels);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnknownLabelValue) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const GrayMask& mask) { return encode_mat(mask.view(), ".png"); }

void save_mask(const fs::path& path, const GrayMask& mask) { write_file(path, encode_png(mask)); }

// ---------------------------------------------------------------------------
// Resampling and cropping

RasterImage resize(const RasterImage& image, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidTarget, "resize target must be at least 1x1");
  if (width == image.width() && height == image.height()) return image;
  cv::Mat out;
  cv::resize(image.view(), out, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  return RasterImage::from_mat(out);
}

GrayMask resize(const GrayMask& mask, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidTarget, "resize target must be at least 1x1");
  if (width == mask.width() && height == mask.height()) return mask;
  cv::Mat out;
  cv::resize(mask.view(), out, cv::Size(width, height), 0, 0, cv::INTER_NEAREST);
  return GrayMask::from_mat(out);
}

RasterImage crop(const RasterImage& image, const BoundingBox& box) {
  if (!box.fits_within(image.width(), image.height())) {
    throw Error(ErrorCode::BoxOutOfBounds, "crop box outside image");
  }
  std::vector<std::uint8_t> data(static_cast<std::size_t>(box.w) * box.h * RasterImage::kChannels);
  const std::size_t row_bytes = static_cast<std::size_t>(box.w) * RasterImage::kChannels;
  for (int r = 0; r < box.h; ++r) {
    std::copy_n(image.pixel(box.x, box.y + r), row_bytes, data.data() + r * row_bytes);
  }
  return RasterImage(box.w, box.h, std::move(data));
}

GrayMask crop(const GrayMask& mask, const BoundingBox& box) {
  if (!box.fits_within(mask.width(), mask.height())) {
    throw Error(ErrorCode::BoxOutOfBounds, "crop box outside mask");
  }
  GrayMask out(box.w, box.h);
  for (int r = 0; r < box.h; ++r) {
    for (int c = 0; c < box.w; ++c) out.at(c, r) = mask.at(box.x + c, box.y + r);
  }
  return out;
}

NormalizedImage min_max_normalize(const RasterImage& image) {
  NormalizedImage out;
  out.width = image.width();
  out.height = image.height();
  const auto src = image.data();
  const auto [lo_it, hi_it] = std::minmax_element(src.begin(), src.end());
  const double lo = *lo_it;
  const double span = static_cast<double>(*hi_it) - lo;
  out.data.resize(src.size());
  if (span == 0.0) return out;  // constant image
  for (std::size_t i = 0; i < src.size(); ++i) out.data[i] = (src[i] - lo) / span;
  return out;
}

// ---------------------------------------------------------------------------
// Dataset pairing

bool is_image_file(const fs::path& path) {
  static const std::set<std::string> kExt = {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp"};
  return kExt.contains(lower_extension(path));
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

cv::Size probe_size(const fs::path& path, bool as_mask) {
  const auto bytes = read_file(path);
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  const cv::Mat decoded = cv::imdecode(buf, as_mask ? cv::IMREAD_UNCHANGED : cv::IMREAD_COLOR);
  if (decoded.empty()) throw Error(ErrorCode::DecodeError, path.string());
  return decoded.size();
}

}  // namespace

DatasetScan validate_dataset(const fs::path& image_dir, const fs::path& mask_dir,
                             const LabelMap& labels) {
  for (const auto& dir : {image_dir, mask_dir}) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::FileNotFound, dir.string());
  }
  std::map<std::string, fs::path> masks;
  DatasetScan scan;
  for (const auto& m : list_images(mask_dir)) {
    if (!masks.emplace(m.stem().string(), m).second) {
      scan.warnings.push_back("duplicate mask stem '" + m.stem().string() + "': " + m.filename().string() + " ignored");
    }
  }
  std::set<std::string> used;
  for (const auto& img : list_images(image_dir)) {
    const auto key = img.stem().string();
    const auto it = masks.find(key);
    if (it == masks.end()) {
      scan.warnings.push_back("no mask for image " + img.filename().string());
      continue;
    }
    if (!used.insert(key).second) {
      scan.warnings.push_back("duplicate image stem '" + key + "': " + img.filename().string() + " ignored");
      continue;
    }
    try {
      const auto image_size = probe_size(img, false);
      const auto mask = load_mask(it->second, labels);
      if (image_size.width != mask.width() || image_size.height != mask.height()) {
        scan.warnings.push_back("dimension mismatch for '" + key + "': image " +
                                std::to_string(image_size.width) + "x" + std::to_string(image_size.height) +
                                ", mask " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
        continue;
      }
    } catch (const Error& e) {
      scan.warnings.push_back("skipping '" + key + "': " + e.what());
      continue;
    }
    scan.entries.push_back({img, it->second, key});
  }
  for (const auto& [key, path] : masks) {
    if (!used.contains(key)) scan.warnings.push_back("no image for mask " + path.filename().string());
  }
  if (scan.entries.empty()) {
    throw Error(ErrorCode::EmptyDataset, "no valid image/mask pairs in " + image_dir.string() + " and " +
                                             mask_dir.string());
  }
  return scan;
}

}  // namespace corebox
