#pragma once

// Randomised property checks for the augmentation operators. Samples are
// "position encoded": every pixel stores its own coordinates, so any pasted
// pixel can be traced back to where in the sample it came from without
// replaying the generator.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "corebox/components.hpp"
#include "corebox/tla.hpp"
#include "oracles.hpp"

namespace tla_props {

using namespace corebox;

// R = x low byte, G = y low byte, B = (x high nibble) | (y high nibble) << 4.
inline RasterImage encoded_sample(int w, int h) {
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto* p = img.pixel(x, y);
      p[0] = static_cast<std::uint8_t>(x & 0xff);
      p[1] = static_cast<std::uint8_t>(y & 0xff);
      p[2] = static_cast<std::uint8_t>(((x >> 8) & 0x0f) | (((y >> 8) & 0x0f) << 4));
    }
  }
  return img;
}

inline Point decode(const std::uint8_t* p) {
  return {p[0] | ((p[2] & 0x0f) << 8), p[1] | ((p[2] >> 4) << 8)};
}

inline bool same_pixel(const RasterImage& a, int ax, int ay, const RasterImage& b, int bx, int by) {
  return std::equal(a.pixel(ax, ay), a.pixel(ax, ay) + 3, b.pixel(bx, by));
}

/// Checks that `out` equals `in` everywhere outside `stencil` and that every
/// stencil pixel decodes to one common offset into a source of size sw x sh.
/// Returns an error description, or empty.
inline std::string check_encoded_paste(const RasterImage& in, const RasterImage& out,
                                       const std::vector<Point>& stencil, Point anchor, int sw, int sh) {
  if (in.width() != out.width() || in.height() != out.height()) return "dimensions changed";
  std::vector<char> inside(static_cast<std::size_t>(in.width()) * in.height(), 0);
  for (const auto& p : stencil) inside[static_cast<std::size_t>(p.y) * in.width() + p.x] = 1;
  std::optional<Point> offset;
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      if (!inside[static_cast<std::size_t>(y) * in.width() + x]) {
        if (!same_pixel(in, x, y, out, x, y)) {
          return "pixel (" + std::to_string(x) + "," + std::to_string(y) + ") outside the stencil changed";
        }
        continue;
      }
      const auto src = decode(out.pixel(x, y));
      const Point off{src.x - (x - anchor.x), src.y - (y - anchor.y)};
      if (!offset) offset = off;
      if (off.x != offset->x || off.y != offset->y) return "stencil pixels come from different crops";
      if (src.x >= sw || src.y >= sh) return "source coordinate outside the sample";
    }
  }
  if (offset && (offset->x < 0 || offset->y < 0)) return "negative crop offset";
  return {};
}

struct Report {
  int cases = 0;
  int checks = 0;
  std::vector<std::string> violations;

  void expect(bool ok, int case_index, const std::string& what) {
    ++checks;
    if (!ok) violations.push_back("case " + std::to_string(case_index) + ": " + what);
  }
};

inline const LabelMap& labels() {
  static const LabelMap map({{"core_column", 255}, {"rock", 100}});
  return map;
}

inline GrayMask random_rect_mask(std::mt19937_64& gen, int w, int h) {
  GrayMask m(w, h);
  std::uniform_int_distribution<int> count(0, 6);
  std::bernoulli_distribution core(0.7);
  const int n = count(gen);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> x0(0, w - 1), y0(0, h - 1);
    const int x = x0(gen), y = y0(gen);
    std::uniform_int_distribution<int> rw(1, w - x), rh(1, h - y);
    const int bw = rw(gen), bh = rh(gen);
    const std::uint8_t v = core(gen) ? 255 : 100;
    for (int yy = y; yy < y + bh; ++yy) {
      for (int xx = x; xx < x + bw; ++xx) m.at(xx, yy) = v;
    }
  }
  return m;
}

inline tla::SamplePool random_pool(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> side(3, 140);
  std::uniform_int_distribution<int> count(1, 3);
  tla::SamplePool pool;
  int id = 0;
  for (const char* name : {"core_column", "rock"}) {
    const int n = count(gen);
    for (int i = 0; i < n; ++i) pool.foregrounds[name].push_back({"s" + std::to_string(id++), encoded_sample(side(gen), side(gen))});
  }
  const int n = count(gen);
  for (int i = 0; i < n; ++i) pool.backgrounds.push_back({"b" + std::to_string(id++), encoded_sample(side(gen), side(gen))});
  return pool;
}

inline tla::AugmentationConfig random_config(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> p(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  tla::AugmentationConfig c;
  c.foreground_swap["core_column"] = p(gen);
  if (coin(gen)) c.foreground_swap["rock"] = p(gen);
  c.background_top = p(gen);
  c.background_bottom = p(gen);
  c.cutout = p(gen) * 0.5;
  c.mixup = p(gen);
  c.classic.hflip_p = p(gen);
  c.classic.vflip_p = p(gen);
  c.classic.rotate_p = p(gen);
  c.classic.rotation_set = {90.0, 180.0, 270.0, 7.5, -12.0};
  c.classic.noise_p = p(gen);
  c.classic.noise_sigma = p(gen) * 10.0;
  c.classic.jitter_p = p(gen);
  c.classic.jitter_amplitude = p(gen) * 0.3;
  if (coin(gen)) c.classic.resize = tla::ResizeTarget{17 + static_cast<int>(gen() % 40), 11 + static_cast<int>(gen() % 40)};
  c.seed = gen();
  return c;
}

inline bool subset_with_zero(const GrayMask& out, const GrayMask& in) {
  auto allowed = in.values();
  allowed.push_back(0);
  for (auto v : out.values()) {
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) return false;
  }
  return true;
}

inline std::size_t count_value(const GrayMask& m, std::uint8_t v) {
  return static_cast<std::size_t>(std::count(m.data().begin(), m.data().end(), v));
}

inline std::size_t count_nonzero(const GrayMask& m) {
  return m.data().size() - count_value(m, 0);
}

/// Runs `cases` randomized cases; every property of every case is one check.
inline Report run(int cases, std::uint64_t seed) {
  Report report;
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> side(8, 96);

  for (int c = 0; c < cases; ++c) {
    ++report.cases;
    const int w = side(gen), h = side(gen);
    const auto image = oracle::random_image(gen, w, h);
    const auto mask = random_rect_mask(gen, w, h);
    const auto pool = random_pool(gen);
    const auto config = random_config(gen);
    Rng rng(config.seed);

    std::vector<Segment> segments;
    for (std::uint8_t v : {std::uint8_t{100}, std::uint8_t{255}}) {
      for (auto& s : connected_components(mask, v)) segments.push_back(std::move(s));
    }

    // Foreground swap: stencil = bbox ∩ (mask == class).
    for (const auto& seg : segments) {
      const auto& sample = pool.foregrounds.at(seg.class_value == 255 ? "core_column" : "rock")[0].image;
      const auto out = tla::swap_foreground(image, mask, seg, sample, rng);
      std::vector<Point> stencil;
      for (int y = seg.bbox.y; y < seg.bbox.bottom(); ++y) {
        for (int x = seg.bbox.x; x < seg.bbox.right(); ++x) {
          if (mask.at(x, y) == seg.class_value) stencil.push_back({x, y});
        }
      }
      const auto covered = tla::cover(sample, seg.bbox.w, seg.bbox.h);
      const auto err = check_encoded_paste(image, out, stencil, {seg.bbox.x, seg.bbox.y}, covered.width(), covered.height());
      // An upscaled sample no longer carries exact coordinates; only locality is checked then.
      const bool upscaled = covered.width() != sample.width() || covered.height() != sample.height();
      report.expect(err.empty() || (upscaled && err.find("outside the stencil") == std::string::npos &&
                                    err.find("dimensions") == std::string::npos),
                    c, "swap_foreground: " + err);
    }

    // Background top: stencil = mask == 0.
    {
      const auto& sample = pool.backgrounds[0].image;
      const auto out = tla::apply_background_top(image, mask, sample, rng);
      std::vector<Point> stencil;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (mask.at(x, y) == 0) stencil.push_back({x, y});
        }
      }
      const auto covered = tla::cover(sample, w, h);
      const bool upscaled = covered.width() != sample.width() || covered.height() != sample.height();
      const auto err = check_encoded_paste(image, out, stencil, {0, 0}, covered.width(), covered.height());
      report.expect(err.empty() || (upscaled && err.find("outside the stencil") == std::string::npos &&
                                    err.find("dimensions") == std::string::npos),
                    c, "background_top: " + err);
    }

    // Cut-out: only the segment changes; its mask pixels become 0.
    if (!segments.empty()) {
      const auto& seg = segments[gen() % segments.size()];
      const auto out = tla::cutout_segment(image, mask, seg, pool.backgrounds[0].image);
      std::vector<char> inside(static_cast<std::size_t>(w) * h, 0);
      for (const auto& p : seg.pixels) inside[static_cast<std::size_t>(p.y) * w + p.x] = 1;
      bool ok = out.image.width() == w && out.image.height() == h;
      for (int y = 0; ok && y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (inside[static_cast<std::size_t>(y) * w + x]) {
            ok = ok && out.mask.at(x, y) == 0;
          } else {
            ok = ok && out.mask.at(x, y) == mask.at(x, y) && same_pixel(image, x, y, out.image, x, y);
          }
        }
      }
      report.expect(ok, c, "cutout_segment locality / zeroing");
      report.expect(subset_with_zero(out.mask, mask), c, "cutout_segment value closure");
    }

    // Mix-up: only the two segments change, mask untouched.
    for (std::uint8_t v : {std::uint8_t{100}, std::uint8_t{255}}) {
      const auto segs = connected_components(mask, v);
      if (segs.size() < 2) continue;
      const auto out = tla::mixup_segments(image, mask, segs[0], segs[1], rng);
      std::vector<char> inside(static_cast<std::size_t>(w) * h, 0);
      for (const auto* s : {&segs[0], &segs[1]}) {
        for (const auto& p : s->pixels) inside[static_cast<std::size_t>(p.y) * w + p.x] = 1;
      }
      bool ok = out.width() == w && out.height() == h;
      for (int y = 0; ok && y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!inside[static_cast<std::size_t>(y) * w + x]) ok = ok && same_pixel(image, x, y, out, x, y);
        }
      }
      report.expect(ok, c, "mixup_segments locality");
    }

    // Background bottom: canvas dimensions, class pixels preserved, closure.
    {
      const auto out = tla::apply_background_bottom(image, mask, pool.backgrounds.back().image, rng);
      const bool dims = out.image.width() == out.mask.width() && out.image.height() == out.mask.height() &&
                        out.image.width() >= w && out.image.height() >= h &&
                        out.image.width() <= static_cast<int>(std::lround(w * 1.5)) &&
                        out.image.height() <= static_cast<int>(std::lround(h * 1.5));
      report.expect(dims, c, "background_bottom dimensions");
      report.expect(count_nonzero(out.mask) == count_nonzero(mask) && count_value(out.mask, 255) == count_value(mask, 255),
                    c, "background_bottom class pixel count");
      report.expect(subset_with_zero(out.mask, mask), c, "background_bottom value closure");
    }

    // Full pipeline: closure, dimension law, determinism.
    const auto a = tla::augment(image, mask, pool, config, labels());
    const auto b = tla::augment(image, mask, pool, config, labels());
    report.expect(a.image == b.image && a.mask == b.mask && a.log == b.log, c, "augment determinism");
    report.expect(a.image.width() == a.mask.width() && a.image.height() == a.mask.height(), c, "augment pair dimensions");
    report.expect(subset_with_zero(a.mask, mask), c, "augment value closure");

    int ew = w, eh = h;
    std::size_t swaps = 0;
    bool geometry_free = true;
    for (const auto& entry : a.log) {
      const auto op = entry.at("op").get<std::string>();
      if (op == "background_bottom") {
        ew = entry.at("canvas")[0];
        eh = entry.at("canvas")[1];
      } else if (op == "rotate") {
        const double deg = entry.at("degrees");
        if (deg == 90.0 || deg == 270.0) std::swap(ew, eh);
        geometry_free = false;
      } else if (op == "resize") {
        ew = entry.at("width");
        eh = entry.at("height");
        geometry_free = false;
      } else if (op == "swap_foreground") {
        ++swaps;
      } else if (op == "hflip" || op == "vflip" || op == "cutout") {
        geometry_free = false;
      }
    }
    report.expect(a.image.width() == ew && a.image.height() == eh, c, "augment dimension law");
    report.expect(swaps <= segments.size(), c, "augment swap count");
    if (geometry_free) {
      // Without geometric changes or cut-outs the class pixels keep their count.
      report.expect(count_nonzero(a.mask) == count_nonzero(mask), c, "augment mask preservation");
    }
  }
  return report;
}

}  // namespace tla_props
