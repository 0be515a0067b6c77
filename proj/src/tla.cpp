#include "corebox/tla.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

namespace corebox::tla {

namespace {

void require_same_dims(const RasterImage& image, const GrayMask& mask) {
  if (image.width() != mask.width() || image.height() != mask.height()) {
    throw Error(ErrorCode::DimensionMismatch, "image and mask dimensions differ");
  }
}

void require_in_bounds(const Segment& segment, const GrayMask& mask) {
  if (segment.pixels.empty() || !segment.bbox.fits_within(mask.width(), mask.height())) {
    throw Error(ErrorCode::InvalidArgument, "segment does not belong to the mask");
  }
}

void copy_pixel(const RasterImage& src, int sx, int sy, RasterImage& dst, int dx, int dy) {
  const auto* s = src.pixel(sx, sy);
  auto* d = dst.pixel(dx, dy);
  d[0] = s[0];
  d[1] = s[1];
  d[2] = s[2];
}

nlohmann::json box_json(const BoundingBox& b) { return {b.x, b.y, b.w, b.h}; }

bool is_right_angle(double degrees) { return std::fmod(degrees, 90.0) == 0.0; }

void check_probability(const char* name, double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be in [0,1], got " + std::to_string(p));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Pool

const Sample& SamplePool::pick_foreground(const std::string& class_name, Rng& rng) const {
  const auto it = foregrounds.find(class_name);
  if (it == foregrounds.end() || it->second.empty()) {
    throw Error(ErrorCode::EmptySample, "no foreground samples for class '" + class_name + "'");
  }
  return it->second[rng.index(it->second.size())];
}

const Sample& SamplePool::pick_background(Rng& rng) const {
  if (backgrounds.empty()) throw Error(ErrorCode::EmptySample, "no background samples");
  return backgrounds[rng.index(backgrounds.size())];
}

std::size_t SamplePool::size() const {
  std::size_t n = backgrounds.size();
  for (const auto& [name, samples] : foregrounds) n += samples.size();
  return n;
}

PoolLoad load_pool(const fs::path& root, const LabelMap& labels) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::FileNotFound, root.string());

  PoolLoad out;
  auto load_dir = [&](const fs::path& dir, std::vector<Sample>& into) {
    for (const auto& path : list_images(dir)) {
      try {
        into.push_back({path.lexically_relative(root).generic_string(), load_image(path)});
      } catch (const Error& e) {
        out.warnings.push_back(std::string("skipping sample: ") + e.what());
      }
    }
  };

  const auto fg_root = root / "foreground";
  if (fs::is_directory(fg_root, ec)) {
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(fg_root)) {
      if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const auto& dir : class_dirs) {
      const auto name = dir.filename().string();
      if (!labels.has_class(name)) {
        out.warnings.push_back("unknown class folder 'foreground/" + name + "' skipped");
        continue;
      }
      load_dir(dir, out.pool.foregrounds[name]);
    }
  }
  load_dir(root / "background", out.pool.backgrounds);

  if (out.pool.size() == 0) throw Error(ErrorCode::EmptyPool, "no samples under " + root.string());
  return out;
}

// ---------------------------------------------------------------------------
// Config

double AugmentationConfig::swap_probability(const std::string& class_name) const {
  const auto it = foreground_swap.find(class_name);
  return it == foreground_swap.end() ? 0.0 : it->second;
}

void AugmentationConfig::validate(const LabelMap& labels) const {
  for (const auto& [name, p] : foreground_swap) {
    if (!labels.has_class(name)) throw Error(ErrorCode::InvalidArgument, "foreground_swap names unknown class '" + name + "'");
    check_probability("foreground_swap", p);
  }
  check_probability("background_top", background_top);
  check_probability("background_bottom", background_bottom);
  check_probability("cutout", cutout);
  check_probability("mixup", mixup);
  check_probability("classic.hflip_p", classic.hflip_p);
  check_probability("classic.vflip_p", classic.vflip_p);
  check_probability("classic.rotate_p", classic.rotate_p);
  check_probability("classic.noise_p", classic.noise_p);
  check_probability("classic.jitter_p", classic.jitter_p);
  if (!(classic.noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
  if (!(classic.jitter_amplitude >= 0.0 && classic.jitter_amplitude < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "jitter_amplitude must be in [0,1)");
  }
  if (classic.rotate_p > 0.0 && classic.rotation_set.empty()) {
    throw Error(ErrorCode::InvalidArgument, "rotation_set is empty");
  }
  for (double a : classic.rotation_set) {
    if (!is_right_angle(a) && !(std::abs(a) <= 15.0)) {
      throw Error(ErrorCode::InvalidArgument, "rotation " + std::to_string(a) + " is neither a multiple of 90 nor within +-15");
    }
  }
  if (classic.resize && (classic.resize->width < 1 || classic.resize->height < 1)) {
    throw Error(ErrorCode::InvalidTarget, "resize target must be at least 1x1");
  }
}

AugmentationConfig AugmentationConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "augmentation config must be a JSON object");
  static const std::set<std::string> kTop = {"foreground_swap", "background_top", "background_bottom",
                                             "cutout", "mixup", "classic", "seed"};
  static const std::set<std::string> kClassic = {"hflip_p", "vflip_p",     "rotate_p", "rotation_set",
                                                 "noise_p", "noise_sigma", "jitter_p", "jitter_amplitude",
                                                 "resize"};
  for (const auto& [key, _] : doc.items()) {
    if (!kTop.contains(key)) throw Error(ErrorCode::ParseError, "unknown config key '" + key + "'");
  }
  AugmentationConfig c;
  try {
    if (doc.contains("foreground_swap")) {
      for (const auto& [name, p] : doc.at("foreground_swap").items()) c.foreground_swap[name] = p.get<double>();
    }
    c.background_top = doc.value("background_top", 0.0);
    c.background_bottom = doc.value("background_bottom", 0.0);
    c.cutout = doc.value("cutout", 0.0);
    c.mixup = doc.value("mixup", 0.0);
    c.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("classic")) {
      const auto& cl = doc.at("classic");
      if (!cl.is_object()) throw Error(ErrorCode::ParseError, "'classic' must be an object");
      for (const auto& [key, _] : cl.items()) {
        if (!kClassic.contains(key)) throw Error(ErrorCode::ParseError, "unknown classic key '" + key + "'");
      }
      auto& s = c.classic;
      s.hflip_p = cl.value("hflip_p", 0.0);
      s.vflip_p = cl.value("vflip_p", 0.0);
      s.rotate_p = cl.value("rotate_p", 0.0);
      if (cl.contains("rotation_set")) s.rotation_set = cl.at("rotation_set").get<std::vector<double>>();
      s.noise_p = cl.value("noise_p", 0.0);
      s.noise_sigma = cl.value("noise_sigma", 0.0);
      s.jitter_p = cl.value("jitter_p", 0.0);
      s.jitter_amplitude = cl.value("jitter_amplitude", 0.0);
      if (cl.contains("resize") && !cl.at("resize").is_null()) {
        const auto& r = cl.at("resize");
        s.resize = ResizeTarget{r.at("width").get<int>(), r.at("height").get<int>()};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return c;
}

nlohmann::json AugmentationConfig::to_json() const {
  nlohmann::json swap = nlohmann::json::object();
  for (const auto& [name, p] : foreground_swap) swap[name] = p;
  nlohmann::json classic_json = {
      {"hflip_p", classic.hflip_p},
      {"vflip_p", classic.vflip_p},
      {"rotate_p", classic.rotate_p},
      {"rotation_set", classic.rotation_set},
      {"noise_p", classic.noise_p},
      {"noise_sigma", classic.noise_sigma},
      {"jitter_p", classic.jitter_p},
      {"jitter_amplitude", classic.jitter_amplitude},
      {"resize", classic.resize ? nlohmann::json{{"width", classic.resize->width}, {"height", classic.resize->height}}
                                : nlohmann::json(nullptr)},
  };
  return {{"foreground_swap", swap}, {"background_top", background_top}, {"background_bottom", background_bottom},
          {"cutout", cutout},        {"mixup", mixup},                   {"classic", classic_json},
          {"seed", seed}};
}

AugmentationConfig load_config(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return AugmentationConfig::from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

AugmentedPair::AugmentedPair(RasterImage image_, GrayMask mask_)
    : image(std::move(image_)), mask(std::move(mask_)) {
  require_same_dims(image, mask);
}

// ---------------------------------------------------------------------------
// Stencil operations

RasterImage cover(const RasterImage& sample, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidTarget, "cover target must be at least 1x1");
  if (sample.width() >= width && sample.height() >= height) return sample;
  const double scale = std::max(static_cast<double>(width) / sample.width(),
                                static_cast<double>(height) / sample.height());
  const int w = std::max(width, static_cast<int>(std::ceil(sample.width() * scale)));
  const int h = std::max(height, static_cast<int>(std::ceil(sample.height() * scale)));
  return resize(sample, w, h);
}

// The *_into variants edit in place; augment() chains them without copying
// the full image at every step.
namespace {

void swap_into(RasterImage& image, const GrayMask& mask, const Segment& segment, const RasterImage& sample,
               Rng& rng) {
  require_same_dims(image, mask);
  require_in_bounds(segment, mask);
  const auto& box = segment.bbox;
  const auto source = cover(sample, box.w, box.h);
  const int ox = static_cast<int>(rng.uniform_int(0, source.width() - box.w));
  const int oy = static_cast<int>(rng.uniform_int(0, source.height() - box.h));
  for (int y = box.y; y < box.bottom(); ++y) {
    for (int x = box.x; x < box.right(); ++x) {
      if (mask.at(x, y) == segment.class_value) copy_pixel(source, x - box.x + ox, y - box.y + oy, image, x, y);
    }
  }
}

void background_top_into(RasterImage& image, const GrayMask& mask, const RasterImage& sample, Rng& rng) {
  require_same_dims(image, mask);
  const auto source = cover(sample, image.width(), image.height());
  const int ox = static_cast<int>(rng.uniform_int(0, source.width() - image.width()));
  const int oy = static_cast<int>(rng.uniform_int(0, source.height() - image.height()));
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (mask.at(x, y) == LabelMap::kBackground) copy_pixel(source, x + ox, y + oy, image, x, y);
    }
  }
}

void cutout_into(AugmentedPair& pair, const Segment& segment, const RasterImage& sample) {
  require_in_bounds(segment, pair.mask);
  const auto texture = cover(sample, pair.image.width(), pair.image.height());
  for (const auto& p : segment.pixels) {
    copy_pixel(texture, p.x, p.y, pair.image, p.x, p.y);
    pair.mask.at(p.x, p.y) = LabelMap::kBackground;
  }
}

void mixup_into(RasterImage& image, const GrayMask& mask, const Segment& a, const Segment& b, Rng& rng) {
  require_same_dims(image, mask);
  require_in_bounds(a, mask);
  require_in_bounds(b, mask);
  if (a.bbox == b.bbox && a.pixels == b.pixels) throw Error(ErrorCode::SameSegment, "mix-up needs two distinct segments");
  if (a.class_value != b.class_value) throw Error(ErrorCode::ClassMismatch, "mix-up segments belong to different classes");

  // Both donors are cut before either paste so each sees the original texture.
  const auto for_a = cover(crop(image, b.bbox), a.bbox.w, a.bbox.h);
  const auto for_b = cover(crop(image, a.bbox), b.bbox.w, b.bbox.h);
  auto paste = [&](const Segment& target, const RasterImage& source) {
    const int ox = static_cast<int>(rng.uniform_int(0, source.width() - target.bbox.w));
    const int oy = static_cast<int>(rng.uniform_int(0, source.height() - target.bbox.h));
    for (const auto& p : target.pixels) {
      copy_pixel(source, p.x - target.bbox.x + ox, p.y - target.bbox.y + oy, image, p.x, p.y);
    }
  };
  paste(a, for_a);
  paste(b, for_b);
}

}  // namespace

RasterImage swap_foreground(const RasterImage& image, const GrayMask& mask, const Segment& segment,
                            const RasterImage& sample, Rng& rng) {
  RasterImage out = image;
  swap_into(out, mask, segment, sample, rng);
  return out;
}

RasterImage apply_background_top(const RasterImage& image, const GrayMask& mask,
                                 const RasterImage& sample, Rng& rng) {
  RasterImage out = image;
  background_top_into(out, mask, sample, rng);
  return out;
}

CanvasPlacement draw_canvas_placement(int width, int height, Rng& rng) {
  const double scale = rng.uniform(1.0, 1.5);
  CanvasPlacement p;
  p.canvas_width = std::max(width, static_cast<int>(std::lround(width * scale)));
  p.canvas_height = std::max(height, static_cast<int>(std::lround(height * scale)));
  p.offset_x = static_cast<int>(rng.uniform_int(0, p.canvas_width - width));
  p.offset_y = static_cast<int>(rng.uniform_int(0, p.canvas_height - height));
  return p;
}

AugmentedPair composite_on_canvas(const RasterImage& image, const GrayMask& mask,
                                  const RasterImage& sample, const CanvasPlacement& placement) {
  require_same_dims(image, mask);
  const auto& p = placement;
  if (p.offset_x < 0 || p.offset_y < 0 || p.offset_x + image.width() > p.canvas_width ||
      p.offset_y + image.height() > p.canvas_height) {
    throw Error(ErrorCode::InvalidArgument, "image does not fit the canvas at the requested offset");
  }
  AugmentedPair out(resize(sample, p.canvas_width, p.canvas_height), GrayMask(p.canvas_width, p.canvas_height));
  const std::size_t row_bytes = static_cast<std::size_t>(image.width()) * RasterImage::kChannels;
  for (int y = 0; y < image.height(); ++y) {
    std::copy_n(image.pixel(0, y), row_bytes, out.image.pixel(p.offset_x, p.offset_y + y));
    for (int x = 0; x < image.width(); ++x) out.mask.at(p.offset_x + x, p.offset_y + y) = mask.at(x, y);
  }
  return out;
}

AugmentedPair apply_background_bottom(const RasterImage& image, const GrayMask& mask,
                                      const RasterImage& sample, Rng& rng) {
  return composite_on_canvas(image, mask, sample, draw_canvas_placement(image.width(), image.height(), rng));
}

AugmentedPair cutout_segment(const RasterImage& image, const GrayMask& mask, const Segment& segment,
                             const RasterImage& sample) {
  AugmentedPair out(image, mask);
  cutout_into(out, segment, sample);
  return out;
}

RasterImage mixup_segments(const RasterImage& image, const GrayMask& mask, const Segment& a,
                           const Segment& b, Rng& rng) {
  RasterImage out = image;
  mixup_into(out, mask, a, b, rng);
  return out;
}

// ---------------------------------------------------------------------------
// Classic augmentations

namespace {

void apply_geometry(AugmentedPair& pair, const std::function<void(const cv::Mat&, cv::Mat&, bool)>& op) {
  cv::Mat img;
  cv::Mat msk;
  op(pair.image.view(), img, false);
  op(pair.mask.view(), msk, true);
  pair.image = RasterImage::from_mat(img);
  pair.mask = GrayMask::from_mat(msk);
}

void rotate_right_angle(AugmentedPair& pair, double degrees) {
  const int quarter = ((static_cast<int>(std::lround(degrees / 90.0)) % 4) + 4) % 4;
  if (quarter == 0) return;
  const int code = quarter == 1 ? cv::ROTATE_90_COUNTERCLOCKWISE
                 : quarter == 2 ? cv::ROTATE_180
                                : cv::ROTATE_90_CLOCKWISE;
  apply_geometry(pair, [code](const cv::Mat& src, cv::Mat& dst, bool) { cv::rotate(src, dst, code); });
}

void rotate_small(AugmentedPair& pair, double degrees) {
  const cv::Point2f center((pair.image.width() - 1) / 2.0f, (pair.image.height() - 1) / 2.0f);
  const cv::Mat m = cv::getRotationMatrix2D(center, degrees, 1.0);
  apply_geometry(pair, [&](const cv::Mat& src, cv::Mat& dst, bool is_mask) {
    cv::warpAffine(src, dst, m, src.size(), is_mask ? cv::INTER_NEAREST : cv::INTER_LINEAR,
                   cv::BORDER_CONSTANT, cv::Scalar::all(0));
  });
}

}  // namespace

namespace {

// Inverse CDF of round(N(0, sigma^2)) sampled at 2^16 uniform quantiles.
std::vector<int> rounded_normal_table(double sigma) {
  constexpr std::size_t kSize = 1u << 16;
  std::vector<int> table(kSize);
  const int reach = std::min(512, static_cast<int>(std::ceil(8.0 * sigma)) + 1);
  auto cdf = [&](double x) { return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0))); };
  std::size_t i = 0;
  for (int k = -reach; k < reach; ++k) {
    const auto upper = std::min(kSize, static_cast<std::size_t>(std::llround(cdf(k + 0.5) * kSize)));
    while (i < upper) table[i++] = k;
  }
  while (i < kSize) table[i++] = reach;
  return table;
}

void classic_into(AugmentedPair& out, const ClassicSettings& settings, Rng& rng) {
  if (rng.bernoulli(settings.hflip_p)) {
    apply_geometry(out, [](const cv::Mat& src, cv::Mat& dst, bool) { cv::flip(src, dst, 1); });
    out.log.push_back({{"op", "hflip"}});
  }
  if (rng.bernoulli(settings.vflip_p)) {
    apply_geometry(out, [](const cv::Mat& src, cv::Mat& dst, bool) { cv::flip(src, dst, 0); });
    out.log.push_back({{"op", "vflip"}});
  }
  if (!settings.rotation_set.empty() && rng.bernoulli(settings.rotate_p)) {
    const double angle = settings.rotation_set[rng.index(settings.rotation_set.size())];
    if (is_right_angle(angle)) {
      rotate_right_angle(out, angle);
    } else if (std::abs(angle) <= 15.0) {
      rotate_small(out, angle);
    } else {
      throw Error(ErrorCode::InvalidArgument, "unsupported rotation " + std::to_string(angle));
    }
    out.log.push_back({{"op", "rotate"}, {"degrees", angle}});
  }
  if (settings.noise_sigma > 0.0 && rng.bernoulli(settings.noise_p)) {
    // 16-bit uniforms from OpenCV's generator (seeded from ours) mapped
    // through the rounded-normal table: fast and still reproducible.
    const auto table = rounded_normal_table(settings.noise_sigma);
    cv::RNG noise_rng(rng.next());
    cv::Mat u(out.image.height(), out.image.width(), CV_16UC3);
    noise_rng.fill(u, cv::RNG::UNIFORM, 0, 65536);
    auto data = out.image.data();
    const auto* idx = u.ptr<std::uint16_t>();
    for (std::size_t i = 0; i < data.size(); ++i) {
      data[i] = static_cast<std::uint8_t>(std::clamp(data[i] + table[idx[i]], 0, 255));
    }
    out.log.push_back({{"op", "gaussian_noise"}, {"sigma", settings.noise_sigma}});
  }
  if (rng.bernoulli(settings.jitter_p)) {
    const double j = settings.jitter_amplitude;
    double gain[3];
    for (auto& g : gain) g = rng.uniform(1.0 - j, 1.0 + j);
    cv::Mat scaled;
    cv::multiply(out.image.view(), cv::Scalar(gain[0], gain[1], gain[2]), scaled);
    out.image = RasterImage::from_mat(scaled);
    out.log.push_back({{"op", "color_jitter"}, {"gains", {gain[0], gain[1], gain[2]}}});
  }
  if (settings.resize) {
    out.image = resize(out.image, settings.resize->width, settings.resize->height);
    out.mask = resize(out.mask, settings.resize->width, settings.resize->height);
    out.log.push_back({{"op", "resize"}, {"width", settings.resize->width}, {"height", settings.resize->height}});
  }
}

}  // namespace

AugmentedPair classic_augment(const AugmentedPair& pair, const ClassicSettings& settings, Rng& rng) {
  AugmentedPair out = pair;
  classic_into(out, settings, rng);
  return out;
}

// ---------------------------------------------------------------------------
// Full pipeline

AugmentedPair augment(const RasterImage& image, const GrayMask& mask, const SamplePool& pool,
                      const AugmentationConfig& config, const LabelMap& labels) {
  config.validate(labels);
  Rng rng(config.seed);
  AugmentedPair pair(image, mask);

  std::map<std::string, std::vector<Segment>> segments;
  auto segments_of = [&](const std::string& name) -> const std::vector<Segment>& {
    auto it = segments.find(name);
    if (it == segments.end()) it = segments.emplace(name, connected_components(pair.mask, labels.value_of(name))).first;
    return it->second;
  };

  for (const auto& [name, value] : labels.entries()) {
    const double p = config.swap_probability(name);
    if (p <= 0.0) continue;
    const auto& segs = segments_of(name);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (!rng.bernoulli(p)) continue;
      const auto& sample = pool.pick_foreground(name, rng);
      swap_into(pair.image, pair.mask, segs[i], sample.image, rng);
      pair.log.push_back({{"op", "swap_foreground"}, {"class", name}, {"segment", i},
                          {"bbox", box_json(segs[i].bbox)}, {"sample", sample.id}});
    }
  }

  if (rng.bernoulli(config.mixup)) {
    std::vector<std::string> candidates;
    for (const auto& [name, value] : labels.entries()) {
      if (segments_of(name).size() >= 2) candidates.push_back(name);
    }
    if (candidates.empty()) {
      pair.log.push_back({{"op", "mixup"}, {"skipped", "no class with two segments"}});
    } else {
      const auto& name = candidates[rng.index(candidates.size())];
      const auto& segs = segments_of(name);
      const auto first = rng.index(segs.size());
      auto second = rng.index(segs.size() - 1);
      if (second >= first) ++second;
      mixup_into(pair.image, pair.mask, segs[first], segs[second], rng);
      pair.log.push_back({{"op", "mixup"}, {"class", name}, {"segments", {first, second}}});
    }
  }

  if (config.cutout > 0.0) {
    for (const auto& [name, value] : labels.entries()) {
      const auto& segs = segments_of(name);
      for (std::size_t i = 0; i < segs.size(); ++i) {
        if (!rng.bernoulli(config.cutout)) continue;
        const auto& sample = pool.pick_background(rng);
        cutout_into(pair, segs[i], sample.image);
        pair.log.push_back({{"op", "cutout"}, {"class", name}, {"segment", i},
                            {"bbox", box_json(segs[i].bbox)}, {"sample", sample.id}});
      }
    }
  }

  if (rng.bernoulli(config.background_top)) {
    const auto& sample = pool.pick_background(rng);
    background_top_into(pair.image, pair.mask, sample.image, rng);
    pair.log.push_back({{"op", "background_top"}, {"sample", sample.id}});
  }

  if (rng.bernoulli(config.background_bottom)) {
    const auto& sample = pool.pick_background(rng);
    const auto placement = draw_canvas_placement(pair.image.width(), pair.image.height(), rng);
    auto composed = composite_on_canvas(pair.image, pair.mask, sample.image, placement);
    pair.image = std::move(composed.image);
    pair.mask = std::move(composed.mask);
    pair.log.push_back({{"op", "background_bottom"}, {"sample", sample.id},
                        {"canvas", {placement.canvas_width, placement.canvas_height}},
                        {"offset", {placement.offset_x, placement.offset_y}}});
  }

  classic_into(pair, config.classic, rng);
  return pair;
}

nlohmann::json augment_dataset(const std::vector<DatasetEntry>& entries, const SamplePool& pool,
                               const AugmentationConfig& config, const LabelMap& labels, int count,
                               const DatasetOutput& out, int jobs) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be at least 1");
  if (entries.empty()) throw Error(ErrorCode::EmptyDataset, "no entries to augment");
  config.validate(labels);
  std::error_code ec;
  for (const auto& dir : {out.image_dir, out.mask_dir, out.manifest.parent_path()}) {
    if (dir.empty()) continue;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  }

  const auto manifest_dir = fs::absolute(out.manifest).parent_path();
  auto relative = [&](const fs::path& p) { return fs::absolute(p).lexically_relative(manifest_dir).generic_string(); };

  std::vector<nlohmann::json> records(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        const auto& entry = entries[static_cast<std::size_t>(i) % entries.size()];
        AugmentationConfig local = config;
        local.seed = config.seed + static_cast<std::uint64_t>(i);
        const auto result = augment(load_image(entry.image), load_mask(entry.mask, labels), pool, local, labels);

        char name[32];
        std::snprintf(name, sizeof name, "aug_%05d_", i);
        const auto filename = std::string(name) + entry.key + ".png";
        const auto image_path = out.image_dir / filename;
        const auto mask_path = out.mask_dir / filename;
        save_image(image_path, result.image);
        save_mask(mask_path, result.mask);
        records[static_cast<std::size_t>(i)] = {
            {"index", i},
            {"source_image", entry.image.filename().string()},
            {"source_mask", entry.mask.filename().string()},
            {"seed", local.seed},
            {"image", relative(image_path)},
            {"mask", relative(mask_path)},
            {"width", result.image.width()},
            {"height", result.image.height()},
            {"transforms", result.log},
        };
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };

  const int workers = std::clamp(jobs, 1, count);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  nlohmann::json manifest = {
      {"generator", std::string(Rng::kGenerator)},
      {"seed_derivation", "seed + index"},
      {"base_seed", config.seed},
      {"count", count},
      {"config", config.to_json()},
      {"records", records},
  };
  write_file(out.manifest, manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace corebox::tla
