// Writes the small synthetic core-box dataset used by the end-to-end tests:
// box photographs with horizontal core columns, matching masks, a label map,
// a TLA sample pool and an augmentation config.

#include <cstdio>
#include <iostream>

#include <json.hpp>

#include "corebox/imagery.hpp"
#include "corebox/rng.hpp"

using namespace corebox;

namespace {

constexpr int kWidth = 480;
constexpr int kHeight = 320;

void fill_textured(RasterImage& img, int x0, int y0, int x1, int y1, const int base[3], int spread, Rng& rng) {
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const int grain = static_cast<int>(rng.uniform_int(-spread, spread));
      auto* p = img.pixel(x, y);
      for (int c = 0; c < 3; ++c) p[c] = static_cast<std::uint8_t>(std::clamp(base[c] + grain, 0, 255));
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_toy_dataset <output-dir>\n";
    return 2;
  }
  const fs::path root(argv[1]);
  for (const auto* sub : {"images", "masks", "pool/foreground/core_column", "pool/background"}) {
    fs::create_directories(root / sub);
  }
  Rng rng(20240501);

  write_file(root / "labels.json", std::string(R"({"labels": {"core_column": 255}})") + "\n");

  const int box[3] = {128, 86, 48};
  for (int i = 0; i < 6; ++i) {
    RasterImage image(kWidth, kHeight);
    GrayMask mask(kWidth, kHeight);
    fill_textured(image, 0, 0, kWidth, kHeight, box, 12, rng);
    const int columns = 3 + i % 3;
    const int pitch = (kHeight - 20) / columns;
    for (int k = 0; k < columns; ++k) {
      const int y0 = 10 + k * pitch + 6;
      const int y1 = y0 + pitch - 14;
      const int x0 = 16 + static_cast<int>(rng.uniform_int(0, 8));
      // The last column of every box is partly empty.
      const int x1 = k + 1 == columns ? kWidth - 120 - 10 * i : kWidth - 16 - static_cast<int>(rng.uniform_int(0, 8));
      const int core[3] = {90 + 10 * k, 90 + 8 * i, 95};
      fill_textured(image, x0, y0, x1, y1, core, 20, rng);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) mask.at(x, y) = 255;
      }
    }
    const double top = 1200.0 + i;
    char name[64];
    std::snprintf(name, sizeof name, "box%02d_%.1f-%.1fm.png", i, top, top + 1.0);
    save_image(root / "images" / name, image);
    save_mask(root / "masks" / name, mask);
  }

  for (int s = 0; s < 3; ++s) {
    RasterImage sample(300 + 100 * s, 80 + 20 * s);
    const int core[3] = {60 + 50 * s, 70 + 30 * s, 80 + 20 * s};
    fill_textured(sample, 0, 0, sample.width(), sample.height(), core, 30, rng);
    save_image(root / "pool/foreground/core_column" / ("core_" + std::to_string(s) + ".png"), sample);
  }
  for (int s = 0; s < 2; ++s) {
    RasterImage sample(640, 480);
    const int ground[3] = {70 + 40 * s, 110 - 20 * s, 60};
    fill_textured(sample, 0, 0, sample.width(), sample.height(), ground, 40, rng);
    save_image(root / "pool/background" / ("ground_" + std::to_string(s) + ".png"), sample);
  }

  const nlohmann::json config = {
      {"foreground_swap", {{"core_column", 0.6}}},
      {"background_top", 0.3},
      {"background_bottom", 0.3},
      {"cutout", 0.15},
      {"mixup", 0.3},
      {"classic", {{"hflip_p", 0.5}, {"vflip_p", 0.2}, {"noise_p", 0.5}, {"noise_sigma", 6.0}, {"jitter_p", 0.5}, {"jitter_amplitude", 0.1}}},
      {"seed", 7},
  };
  write_file(root / "tla_config.json", config.dump(2) + "\n");
  std::cout << "wrote toy dataset to " << root << '\n';
  return 0;
}
