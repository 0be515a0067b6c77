// corebox: batch entry points for augmentation, column extraction,
// mask evaluation and the correction service.
//
// Exit codes: 0 success, 1 IO/processing failure, 2 bad arguments.

#include <atomic>
#include <csignal>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "corebox/depthref.hpp"
#include "corebox/extraction.hpp"
#include "corebox/imagery.hpp"
#include "corebox/metrics.hpp"
#include "corebox/service.hpp"
#include "corebox/tla.hpp"

namespace fs = std::filesystem;
using namespace corebox;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool verbose = false;

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

void info(const std::string& message) {
  if (verbose) std::cerr << message << '\n';
}

void require_dir(const fs::path& p, const char* flag) {
  std::error_code ec;
  if (!fs::is_directory(p, ec)) throw UsageError(std::string(flag) + ": directory not found: " + p.string());
}

void require_file(const fs::path& p, const char* flag) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw UsageError(std::string(flag) + ": file not found: " + p.string());
}

nlohmann::json read_json(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

LabelMap labels_or_default(const std::string& path) {
  if (path.empty()) return LabelMap({{"core_column", 255}});
  return load_label_map(path);
}

// ---------------------------------------------------------------------------
// augment

struct AugmentArgs {
  std::string images, masks, labels, pool, config, out;
  int count = 1;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool json = false;
};

int run_augment(const AugmentArgs& a) {
  require_dir(a.images, "--images");
  require_dir(a.masks, "--masks");
  require_file(a.labels, "--labels");
  require_dir(a.pool, "--pool");
  if (!a.config.empty()) require_file(a.config, "--config");
  if (a.count < 1) throw UsageError("--count must be at least 1");

  const auto labels = load_label_map(a.labels);
  auto config = a.config.empty() ? tla::AugmentationConfig{} : tla::load_config(a.config);
  if (a.seed) config.seed = *a.seed;
  config.validate(labels);

  const auto scan = validate_dataset(a.images, a.masks, labels);
  for (const auto& w : scan.warnings) warn(w);
  const auto pool = tla::load_pool(a.pool, labels);
  for (const auto& w : pool.warnings) warn(w);
  info("pairs: " + std::to_string(scan.entries.size()) + ", pool samples: " + std::to_string(pool.pool.size()));

  const fs::path out(a.out);
  const tla::DatasetOutput target{out / "images", out / "masks", out / "manifest.json"};
  const auto manifest = tla::augment_dataset(scan.entries, pool.pool, config, labels, a.count, target, a.jobs);
  if (a.json) {
    std::cout << nlohmann::json{{"manifest", target.manifest.string()}, {"count", manifest["count"]}}.dump() << '\n';
  } else {
    std::cout << target.manifest.string() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// extract

struct ExtractArgs {
  std::string image, mask, labels, filter_config, depth_spec, out;
  std::optional<double> n, m, y_max_ratio;
  bool no_median = false;
  bool no_width = false;
  bool batch = false;
  bool json = false;
};

extraction::FilterConfig filter_from_args(const ExtractArgs& a) {
  auto c = a.filter_config.empty() ? extraction::FilterConfig{}
                                   : extraction::FilterConfig::from_json(read_json(a.filter_config));
  if (a.n) c.n = *a.n;
  if (a.m) c.m = *a.m;
  if (a.y_max_ratio) c.y_max_ratio = *a.y_max_ratio;
  if (a.no_median) c.median_filter = false;
  if (a.no_width) c.width_filter = false;
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return c;
}

// Depth spec from --depth-spec, with top/bottom falling back to the image
// filename; a filename alone yields a proportional top-to-bottom spec.
std::optional<depthref::DepthSpec> depth_spec_for(const ExtractArgs& a, const fs::path& image) {
  const auto from_name = depthref::depth_from_filename(image.filename().string());
  nlohmann::json doc = nlohmann::json::object();
  if (!a.depth_spec.empty()) {
    doc = read_json(a.depth_spec);
  } else if (!from_name) {
    return std::nullopt;
  }
  if (from_name && !doc.contains("top") && !doc.contains("bottom")) {
    doc["top"] = from_name->first;
    doc["bottom"] = from_name->second;
  }
  auto spec = depthref::DepthSpec::from_json(doc);
  spec.validate();
  return spec;
}

nlohmann::json extract_one(const ExtractArgs& a, const fs::path& image_path, const fs::path& mask_path,
                           const fs::path& out, const LabelMap& labels, const extraction::FilterConfig& filter) {
  const auto image = load_image(image_path);
  const auto mask = load_mask(mask_path, labels);
  if (image.width() != mask.width() || image.height() != mask.height()) {
    throw Error(ErrorCode::DimensionMismatch, image_path.filename().string() + " and " +
                                                  mask_path.filename().string() + " differ in size");
  }
  const auto result = extraction::run_pipeline(image, mask, labels, filter);
  fs::create_directories(out);
  for (const auto& column : result.columns) {
    char name[32];
    std::snprintf(name, sizeof name, "column_%03d.png", column.index);
    save_image(out / name, column.image);
  }
  auto report = result.report.to_json();
  report["source"] = {{"image", image_path.filename().string()}, {"mask", mask_path.filename().string()}};
  if (const auto spec = depth_spec_for(a, image_path)) {
    depthref::DepthResult depths;
    if (!result.report.kept.empty()) depths = depthref::reference_columns(result.report.kept, *spec);
    nlohmann::json intervals = nlohmann::json::array();
    for (const auto& d : depths.intervals) intervals.push_back(depthref::to_json(d));
    report["depth"] = {{"spec", spec->to_json()}, {"intervals", intervals}, {"warnings", depths.warnings}};
    write_file(out / "depths.csv", depthref::to_csv(result.report.kept, depths.intervals));
  }
  write_file(out / "report.json", report.dump(2) + "\n");
  for (const auto& w : result.report.warnings) warn(image_path.filename().string() + ": " + w);
  info(image_path.filename().string() + ": " + std::to_string(result.columns.size()) + " column(s)");
  return report;
}

int run_extract(const ExtractArgs& a) {
  if (!a.labels.empty()) require_file(a.labels, "--labels");
  if (!a.filter_config.empty()) require_file(a.filter_config, "--filter-config");
  if (!a.depth_spec.empty()) require_file(a.depth_spec, "--depth-spec");
  const auto filter = filter_from_args(a);
  const auto labels = labels_or_default(a.labels);
  const fs::path out(a.out);

  nlohmann::json reports = nlohmann::json::array();
  if (a.batch) {
    require_dir(a.image, "--image");
    require_dir(a.mask, "--mask");
    const auto scan = validate_dataset(a.image, a.mask, labels);
    for (const auto& w : scan.warnings) warn(w);
    for (const auto& entry : scan.entries) {
      reports.push_back(extract_one(a, entry.image, entry.mask, out / entry.key, labels, filter));
    }
  } else {
    require_file(a.image, "--image");
    require_file(a.mask, "--mask");
    reports.push_back(extract_one(a, a.image, a.mask, out, labels, filter));
  }
  if (a.json) std::cout << (a.batch ? reports : reports[0]).dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string pred_dir, truth_dir, labels, out, class_name;
  int jobs = 1;
  bool json = false;
};

int run_evaluate(const EvaluateArgs& a) {
  require_dir(a.pred_dir, "--pred-dir");
  require_dir(a.truth_dir, "--truth-dir");
  if (!a.labels.empty()) require_file(a.labels, "--labels");
  const auto labels = labels_or_default(a.labels);
  const auto positive = extraction::resolve_class(labels, a.class_name).second;

  std::map<std::string, fs::path> truths;
  for (const auto& p : list_images(a.truth_dir)) truths.emplace(p.stem().string(), p);
  std::vector<std::pair<fs::path, fs::path>> pairs;
  for (const auto& p : list_images(a.pred_dir)) {
    const auto it = truths.find(p.stem().string());
    if (it == truths.end()) {
      warn("no ground truth for " + p.filename().string());
      continue;
    }
    pairs.emplace_back(p, it->second);
  }
  if (pairs.empty()) {
    std::cerr << "error: no prediction/ground-truth pairs matched\n";
    return kExitFailure;
  }

  std::vector<std::optional<metrics::MetricReport>> reports(pairs.size());
  std::vector<std::optional<metrics::ConfusionCounts>> counts(pairs.size());
  std::vector<std::string> errors(pairs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < pairs.size(); i = next++) {
      try {
        const auto pred = load_mask(pairs[i].first, labels);
        const auto truth = load_mask(pairs[i].second, labels);
        counts[i] = metrics::confusion(pred, truth, positive);
        reports[i] = metrics::report_from_counts(*counts[i]);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 1; t < std::max(1, a.jobs); ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  nlohmann::json per_pair = nlohmann::json::array();
  std::vector<metrics::MetricReport> valid;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!reports[i]) {
      warn("skipping " + pairs[i].first.filename().string() + ": " + errors[i]);
      continue;
    }
    valid.push_back(*reports[i]);
    per_pair.push_back({{"key", pairs[i].first.stem().string()},
                        {"pred", pairs[i].first.filename().string()},
                        {"truth", pairs[i].second.filename().string()},
                        {"counts", metrics::to_json(*counts[i])},
                        {"metrics", metrics::to_json(*reports[i])}});
  }
  if (valid.empty()) {
    std::cerr << "error: no pair could be evaluated\n";
    return kExitFailure;
  }
  const auto summary = metrics::summarize(valid);
  const nlohmann::json doc = {{"positive_value", positive}, {"pairs", per_pair}, {"summary", metrics::to_json(summary)}};
  const auto table = metrics::format_summary_table(summary);

  const fs::path out(a.out);
  fs::create_directories(out);
  write_file(out / "evaluation.json", doc.dump(2) + "\n");
  write_file(out / "evaluation.txt", table);
  std::cout << (a.json ? doc.dump(2) + "\n" : table);
  return 0;
}

// ---------------------------------------------------------------------------
// serve

struct ServeArgs {
  int port = 8780;
  std::string host = "127.0.0.1";
  std::string spool_dir;
  std::string webui_dir;
  std::size_t max_upload_mb = 64;
};

int run_serve(const ServeArgs& a) {
  // Signals are consumed by a dedicated thread so shutdown runs outside a
  // signal handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::ServiceOptions options;
  options.spool_dir = a.spool_dir;
  options.webui_dir = a.webui_dir;
  options.max_upload_bytes = a.max_upload_mb * 1024 * 1024;
  service::Service svc(options);
  if (!svc.bind(a.host, a.port)) {
    std::cerr << "error: cannot bind " << a.host << ":" << a.port << '\n';
    return kExitFailure;
  }
  std::cerr << "serving on http://" << a.host << ":" << a.port << '\n';

  std::atomic<bool> stopping{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    stopping = true;
    svc.stop();
  });
  const bool clean = svc.run();
  if (!stopping) pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return clean || stopping ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corebox: core-box image augmentation, column extraction and evaluation"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", verbose, "Print progress to stderr");

  AugmentArgs aug;
  auto* augment = app.add_subcommand("augment", "Synthesise new image/mask pairs with template-like augmentation");
  augment->add_option("--images", aug.images, "Image directory")->required();
  augment->add_option("--masks", aug.masks, "Mask directory")->required();
  augment->add_option("--labels", aug.labels, "Label map JSON")->required();
  augment->add_option("--pool", aug.pool, "Sample pool root (foreground/<class>/, background/)")->required();
  augment->add_option("--config", aug.config, "Augmentation config JSON");
  augment->add_option("--count", aug.count, "Number of pairs to generate")->required();
  augment->add_option("--out", aug.out, "Output directory")->required();
  augment->add_option("--seed", aug.seed, "Override the config seed");
  augment->add_option("--jobs", aug.jobs, "Worker threads")->check(CLI::PositiveNumber);
  augment->add_flag("--json", aug.json, "Machine-readable output");

  ExtractArgs ext;
  auto* extract = app.add_subcommand("extract", "Filter mask components and crop core columns");
  extract->add_option("--image", ext.image, "Core-box image (directory with --batch)")->required();
  extract->add_option("--mask", ext.mask, "Predicted mask (directory with --batch)")->required();
  extract->add_option("--labels", ext.labels, "Label map JSON (default core_column=255)");
  extract->add_option("--filter-config", ext.filter_config, "Filter config JSON");
  extract->add_option("--depth-spec", ext.depth_spec, "Depth spec JSON");
  extract->add_option("--out", ext.out, "Output directory")->required();
  extract->add_option("--n", ext.n, "Median-band coefficient");
  extract->add_option("--m", ext.m, "Global-width coefficient");
  extract->add_option("--y-max-ratio", ext.y_max_ratio, "Drop boxes starting below this fraction of the height");
  extract->add_flag("--no-median-filter", ext.no_median, "Disable the median size filter");
  extract->add_flag("--no-width-filter", ext.no_width, "Disable the global width filter");
  extract->add_flag("--batch", ext.batch, "Process every pair in the --image/--mask directories");
  extract->add_flag("--json", ext.json, "Print the report as JSON");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score predicted masks against ground truth");
  evaluate->add_option("--pred-dir", ev.pred_dir, "Predicted masks")->required();
  evaluate->add_option("--truth-dir", ev.truth_dir, "Ground-truth masks")->required();
  evaluate->add_option("--labels", ev.labels, "Label map JSON (default core_column=255)");
  evaluate->add_option("--out", ev.out, "Output directory")->required();
  evaluate->add_option("--class", ev.class_name, "Class to score");
  evaluate->add_option("--jobs", ev.jobs, "Worker threads")->check(CLI::PositiveNumber);
  evaluate->add_flag("--json", ev.json, "Print the report as JSON");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Run the HTTP correction service");
  serve->add_option("--port", sv.port, "TCP port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", sv.host, "Bind address");
  serve->add_option("--spool-dir", sv.spool_dir, "Directory for evicted sessions");
  serve->add_option("--webui-dir", sv.webui_dir, "Static web UI bundle served at /");
  serve->add_option("--max-upload-mb", sv.max_upload_mb, "Upload size limit")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*augment) return run_augment(aug);
    if (*extract) return run_extract(ext);
    if (*evaluate) return run_evaluate(ev);
    if (*serve) return run_serve(sv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
