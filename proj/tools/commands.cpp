#include "commands.hpp"

#include "cli_support.hpp"
#include "flow_pipeline.hpp"
#include "pipeline_config.hpp"

#include <mvseg/correspondence.hpp>
#include <mvseg/errors.hpp>
#include <mvseg/geoflow.hpp>
#include <mvseg/golden_io.hpp>
#include <mvseg/head.hpp>
#include <mvseg/ingest.hpp>
#include <mvseg/metrics.hpp>
#include <mvseg/objective.hpp>
#include <mvseg/parallel.hpp>
#include <mvseg/proj_bev.hpp>
#include <mvseg/proj_rv.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>

namespace mvflow {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSeedStride = 0x9e3779b97f4a7c15ull;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) { return seed + kSeedStride * (stream + 1); }

PipelineConfig load_config(const CommonOptions& common) {
  if (!common.config.empty()) require_file(common.config);
  return PipelineConfig::load(common.config, common.preset);
}

mvseg::RvVariant parse_variant(const std::string& v) {
  if (v == "original") return mvseg::RvVariant::Original;
  if (v == "scanunfold") return mvseg::RvVariant::ScanUnfold;
  throw UsageError("--variant must be original or scanunfold, got '" + v + "'");
}

std::string numbered(const char* prefix, int i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d", prefix, i);
  return buf;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json metrics_json(const mvseg::ConfusionMatrix& cm, const mvseg::ClassMap& classes) {
  json j;
  const auto iou = mvseg::miou(cm);
  json per_class = json::array();
  for (int c = 0; c < cm.num_classes(); ++c) {
    json e;
    e["id"] = c;
    if (static_cast<std::size_t>(c) < classes.names.size()) e["name"] = classes.names[static_cast<std::size_t>(c)];
    const auto& v = iou.per_class[static_cast<std::size_t>(c)];
    e["iou"] = v ? json(*v) : json(nullptr);
    e["gt_count"] = cm.counts().row(c).sum();
    per_class.push_back(e);
  }
  j["per_class"] = per_class;
  j["miou"] = iou.mean;
  j["accuracy"] = mvseg::accuracy(cm);
  j["fwiou"] = mvseg::fwiou(cm);
  j["points"] = cm.total();
  return j;
}

std::vector<std::uint8_t> range_plot(const mvseg::RangeImage& img) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(img.features.pixels()), 0);
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j) {
      if (img.point_index(i, j) < 0) continue;
      const double r = img.features(i, j, 3);
      px[static_cast<std::size_t>(img.features.index(i, j))] =
          static_cast<std::uint8_t>(255.0 - std::min(254.0, r / 80.0 * 254.0));
    }
  return px;
}

std::vector<std::uint8_t> height_plot(const mvseg::BevImage& img, const mvseg::BevGridConfig& g) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(img.features.pixels()), 0);
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j) {
      if (img.representative_index(i, j) < 0) continue;
      const double z = img.features(i, j, 5);
      px[static_cast<std::size_t>(img.features.index(i, j))] =
          static_cast<std::uint8_t>(1.0 + std::clamp((z - g.z_min) / (g.z_max - g.z_min), 0.0, 1.0) * 254.0);
    }
  return px;
}

/// Row-normalized confusion heatmap, 8x8 pixels per cell.
void confusion_plot(const fs::path& path, const mvseg::ConfusionMatrix& cm) {
  constexpr int cell = 8;
  const int c = cm.num_classes();
  std::vector<std::uint8_t> px(static_cast<std::size_t>(c * cell * c * cell), 0);
  for (int g = 0; g < c; ++g) {
    const auto row = cm.counts().row(g).sum();
    for (int p = 0; p < c; ++p) {
      const double frac = row > 0 ? static_cast<double>(cm.counts()(g, p)) / static_cast<double>(row) : 0.0;
      const auto v = static_cast<std::uint8_t>(std::lround(frac * 255.0));
      for (int y = 0; y < cell; ++y)
        for (int x = 0; x < cell; ++x)
          px[static_cast<std::size_t>((g * cell + y) * c * cell + p * cell + x)] = v;
    }
  }
  write_pgm(path, c * cell, c * cell, px);
}

mvseg::LossWeights parse_lambda(const std::string& text) {
  const auto v = parse_doubles(text, "--lambda");
  if (v.size() != 5) throw UsageError("--lambda needs five comma separated weights");
  mvseg::LossWeights w{v[0], v[1], v[2], v[3], v[4]};
  w.check();
  return w;
}

mvseg::AttentionGate parse_gate(const std::string& g) {
  if (g == "softmax") return mvseg::AttentionGate::Softmax;
  if (g == "sigmoid") return mvseg::AttentionGate::Sigmoid;
  throw UsageError("--gate must be softmax or sigmoid, got '" + g + "'");
}

struct AttentionPair {
  mvseg::AttentionParams<float> rv, bev;
};

AttentionPair attention_for_level(const mvseg::TensorBlocks* blocks, int level, int channels, std::uint64_t seed,
                                  bool zero, mvseg::AttentionGate gate) {
  AttentionPair p;
  if (blocks) {
    const std::string scoped = "s" + std::to_string(level);
    const bool per_level = blocks->count(scoped + ".rv.mu.weight") > 0;
    try {
      p.rv = mvseg::get_attention<float>(*blocks, per_level ? scoped + ".rv" : "rv");
      p.bev = mvseg::get_attention<float>(*blocks, per_level ? scoped + ".bev" : "bev");
    } catch (const mvseg::Error& e) {
      throw mvseg::ConfigError(std::string("--params: ") + e.what());
    }
    for (const auto* q : {&p.rv, &p.bev})
      if (q->target_channels() != channels || q->source_channels() != channels)
        throw mvseg::ConfigError("--params: attention expects " + std::to_string(q->target_channels()) + "+" +
                                 std::to_string(q->source_channels()) + " channels but the flow runs with " +
                                 std::to_string(channels));
    return p;
  }
  if (zero) {
    p.rv = mvseg::AttentionParams<float>::zero(channels, channels);
    p.bev = mvseg::AttentionParams<float>::zero(channels, channels);
  } else {
    p.rv = mvseg::AttentionParams<float>::random(channels, channels, derive_seed(seed, 16 + 2 * level));
    p.bev = mvseg::AttentionParams<float>::random(channels, channels, derive_seed(seed, 17 + 2 * level));
  }
  p.rv.gate = p.bev.gate = gate;
  return p;
}

/// Per-pixel class probabilities: softmax of Gaussian logits plus a bump on the raster label.
mvseg::FeatureMap<double> noisy_scores(const mvseg::LabelRaster& labels, int classes, double noise,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  auto gauss = [&] { return std::sqrt(-2.0 * std::log(unit())) * std::cos(2.0 * std::numbers::pi * unit()); };
  const int h = static_cast<int>(labels.rows()), w = static_cast<int>(labels.cols());
  mvseg::FeatureMap<double> m(h, w, classes);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      auto row = m.pixel(i, j);
      for (int c = 0; c < classes; ++c) row(c) = noise * gauss();
      const auto l = labels(i, j);
      if (l >= 0 && l < classes) row(l) += 2.0;
      row.array() = (row.array() - row.maxCoeff()).exp();
      row /= row.sum();
    }
  return m;
}

/// Points a view does not hold get the uniform distribution.
void fill_missing(mvseg::PointScores<double>& f, const mvseg::PointPixelMap& pix) {
  for (Eigen::Index n = 0; n < f.rows(); ++n)
    if (!pix.valid(n)) f.row(n).setConstant(1.0 / static_cast<double>(f.cols()));
}

void softmax_rows(mvseg::PointScores<double>& f) {
  for (Eigen::Index n = 0; n < f.rows(); ++n) {
    auto row = f.row(n);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
}

struct StageStats {
  std::vector<double> samples;

  json summary() const {
    json j;
    j["samples"] = samples.size();
    if (samples.empty()) {
      j["skipped"] = true;
      return j;
    }
    auto s = samples;
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    const double median = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    double sum = 0.0;
    for (double v : s) sum += v;
    j["median_ms"] = median;
    j["p95_ms"] = n == 1 ? median : s[std::max<std::size_t>(rank, 1) - 1];
    j["mean_ms"] = sum / static_cast<double>(n);
    j["min_ms"] = s.front();
    j["max_ms"] = s.back();
    return j;
  }
};

}  // namespace

// ---------------------------------------------------------------------------

int run_synth(const CommonOptions& common, const SynthOptions& opt) {
  if (opt.count < 1) throw UsageError("--count must be >= 1");
  auto cfg = load_config(common);
  if (opt.dropout >= 0.0) cfg.synth.dropout = opt.dropout;
  cfg.synth.check();
  ensure_dir(common.out);
  json rows = json::array();
  for (int i = 0; i < opt.count; ++i) {
    const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(i);
    const auto cloud = mvseg::synth_scan(cfg.synth, seed);
    const auto name = numbered("scan", i);
    mvseg::write_file(fs::path(common.out) / (name + ".bin"), mvseg::write_scan(cloud));
    const auto words = encode_labels(cloud.labels, cfg.classes);
    mvseg::write_file(fs::path(common.out) / (name + ".label"), mvseg::write_label_words(words));
    std::cout << name << ".bin points " << cloud.size() << " seed " << seed << "\n";
    rows.push_back({{"scan", name + ".bin"}, {"labels", name + ".label"}, {"points", cloud.size()}, {"seed", seed}});
  }
  write_json(fs::path(common.out) / "synth.json", {{"preset", cfg.preset}, {"scans", rows}});
  return kExitOk;
}

int run_project(const CommonOptions& common, const ProjectOptions& opt) {
  if (opt.scans.empty()) throw UsageError("project needs at least one scan file");
  if (opt.view != "rv" && opt.view != "bev") throw UsageError("--view must be rv or bev, got '" + opt.view + "'");
  const auto variant = parse_variant(opt.variant);
  require_files(opt.scans);
  const auto cfg = load_config(common);
  ensure_dir(common.out);
  const fs::path out(common.out);

  int failures = 0;
  json rows = json::array();
  for (const auto& path : opt.scans) {
    const auto stem = stem_of(path);
    try {
      const auto cloud = mvseg::load_scan(path);
      json row{{"scan", path}, {"points", cloud.size()}};
      if (opt.view == "rv") {
        const auto img = mvseg::project_rv(cloud, cfg.rv, variant, cfg.classes.ignore_id);
        mvseg::write_file(out / (stem + ".rv.gfvw"), mvseg::encode_view(img.features, &img.point_index));
        const double rate = mvseg::valid_projection_rate(img);
        row["valid_projection_rate"] = rate;
        row["valid_pixels"] = (img.point_index.array() >= 0).count();
        row["dropped"] = img.dropped;
        if (opt.plot) write_pgm(out / (stem + ".rv.pgm"), img.height(), img.width(), range_plot(img));
        std::cout << path << " rv " << opt.variant << " points " << cloud.size() << " rate " << fixed(rate) << "\n";
      } else {
        const auto img = mvseg::project_bev(cloud, cfg.bev, cfg.classes.ignore_id);
        mvseg::write_file(out / (stem + ".bev.gfvw"), mvseg::encode_view(img.features, &img.representative_index));
        const auto cells = (img.representative_index.array() >= 0).count();
        const auto in_grid = (img.point_pixels.coords.col(0).array() >= 0).count();
        row["occupied_cells"] = cells;
        row["points_in_grid"] = in_grid;
        if (opt.plot) write_pgm(out / (stem + ".bev.pgm"), img.height(), img.width(), height_plot(img, cfg.bev));
        std::cout << path << " bev points " << cloud.size() << " in_grid " << in_grid << " cells " << cells << "\n";
      }
      rows.push_back(row);
    } catch (const mvseg::Error& e) {
      ++failures;
      std::cerr << "error: " << path << ": " << e.what() << "\n";
      rows.push_back({{"scan", path}, {"error", e.what()}});
    }
  }
  json summary{{"view", opt.view}, {"preset", cfg.preset}, {"scans", rows}, {"failures", failures}};
  if (opt.view == "rv") summary["variant"] = opt.variant;
  write_json(out / ("project_" + opt.view + ".json"), summary);
  return failures ? kExitFailure : kExitOk;
}

int run_flow(const CommonOptions& common, const FlowOptions& opt) {
  require_file(opt.scan);
  if (!opt.params.empty()) require_file(opt.params);
  if (!opt.params.empty() && opt.zero_attention) throw UsageError("--params and --zero-attention are exclusive");
  const auto variant = parse_variant(opt.variant);
  const auto gate = parse_gate(opt.gate);
  const auto scales = parse_doubles(opt.scales, "--scales");
  if (opt.channels < 1) throw UsageError("--channels must be >= 1");
  const auto cfg = load_config(common);
  for (double s : scales) {
    mvflow::scaled_size(cfg.rv.height, s);  // validates the range
  }

  std::optional<mvseg::TensorBlocks> blocks;
  if (!opt.params.empty()) {
    try {
      blocks = mvseg::decode_blocks(mvseg::read_file(opt.params));
    } catch (const mvseg::Error& e) {
      throw mvseg::ConfigError(std::string("--params: ") + e.what());
    }
  }

  ensure_dir(common.out);
  const fs::path out(common.out);
  json timing;
  Stopwatch total;

  const auto cloud = mvseg::load_scan(opt.scan);
  Stopwatch sw;
  const auto rv = mvseg::project_rv(cloud, cfg.rv, variant, cfg.classes.ignore_id);
  timing["project_rv_ms"] = sw.ms();
  sw = Stopwatch();
  const auto bev = mvseg::project_bev(cloud, cfg.bev, cfg.classes.ignore_id);
  timing["project_bev_ms"] = sw.ms();
  sw = Stopwatch();
  const auto r2b = mvseg::compose_r2b(rv, bev);
  timing["compose_r2b_ms"] = sw.ms();
  sw = Stopwatch();
  const auto b2r = mvseg::compose_b2r(bev, rv);
  timing["compose_b2r_ms"] = sw.ms();

  const auto m_r = lift_features(rv.features, rv.point_index, opt.channels, derive_seed(opt.seed, 0));
  const auto m_b = lift_features(bev.features, bev.representative_index, opt.channels, derive_seed(opt.seed, 1));

  json levels = json::array();
  json level_timing = json::array();
  for (std::size_t k = 0; k < scales.size(); ++k) {
    const int level = static_cast<int>(k);
    const auto params = attention_for_level(blocks ? &*blocks : nullptr, level, opt.channels, opt.seed,
                                            opt.zero_attention, gate);
    sw = Stopwatch();
    const auto l = make_level(m_r, m_b, r2b, b2r, scales[k]);
    const double scale_ms = sw.ms();
    sw = Stopwatch();
    const auto [fused_r, fused_b] = mvseg::gfm_forward(l.m_r, l.m_b, l.r2b, l.b2r, params.rv, params.bev);
    const double flow_ms = sw.ms();

    const auto tag = "s" + std::to_string(level);
    mvseg::write_file(out / ("input_rv_" + tag + ".gfvw"), mvseg::encode_view(l.m_r));
    mvseg::write_file(out / ("input_bev_" + tag + ".gfvw"), mvseg::encode_view(l.m_b));
    mvseg::write_file(out / ("fused_rv_" + tag + ".gfvw"), mvseg::encode_view(fused_r));
    mvseg::write_file(out / ("fused_bev_" + tag + ".gfvw"), mvseg::encode_view(fused_b));
    mvseg::write_file(out / ("r2b_" + tag + ".gfvw"), mvseg::encode_correspondence(l.r2b));
    mvseg::write_file(out / ("b2r_" + tag + ".gfvw"), mvseg::encode_correspondence(l.b2r));

    levels.push_back({{"level", level},
                      {"scale", scales[k]},
                      {"rv_shape", {l.m_r.height, l.m_r.width, l.m_r.channels()}},
                      {"bev_shape", {l.m_b.height, l.m_b.width, l.m_b.channels()}},
                      {"r2b_valid", l.r2b.valid_count()},
                      {"b2r_valid", l.b2r.valid_count()},
                      {"rv_delta_max", (fused_r.data - l.m_r.data).cwiseAbs().maxCoeff()},
                      {"bev_delta_max", (fused_b.data - l.m_b.data).cwiseAbs().maxCoeff()}});
    level_timing.push_back({{"level", level}, {"scale_ms", scale_ms}, {"align_fuse_ms", flow_ms}});
    std::cout << "level " << level << " scale " << scales[k] << " rv " << l.m_r.height << "x" << l.m_r.width
              << " bev " << l.m_b.height << "x" << l.m_b.width << " r2b_valid " << l.r2b.valid_count()
              << " b2r_valid " << l.b2r.valid_count() << "\n";
  }
  timing["levels"] = level_timing;
  timing["total_ms"] = total.ms();
  timing["jobs"] = mvseg::num_jobs();

  write_json(out / "flow.json", {{"scan", opt.scan},
                                 {"preset", cfg.preset},
                                 {"variant", opt.variant},
                                 {"seed", opt.seed},
                                 {"channels", opt.channels},
                                 {"zero_attention", opt.zero_attention},
                                 {"params", opt.params},
                                 {"levels", levels}});
  write_json(out / "timing.json", timing);
  return kExitOk;
}

int run_eval(const CommonOptions& common, const EvalOptions& opt) {
  if (opt.pred.empty() || opt.gt.empty()) throw UsageError("eval needs at least one --pred and one --gt file");
  if (opt.pred.size() != opt.gt.size())
    throw UsageError("got " + std::to_string(opt.pred.size()) + " prediction files but " +
                     std::to_string(opt.gt.size()) + " ground-truth files");
  if (!opt.scores.empty() && opt.scores.size() != opt.gt.size())
    throw UsageError("--scores needs one file per ground-truth file");
  require_files(opt.pred);
  require_files(opt.gt);
  require_files(opt.scores);

  const auto cfg = load_config(common);
  mvseg::ClassMap classes = cfg.classes;
  if (!opt.classmap.empty()) {
    std::error_code ec;
    classes = fs::is_regular_file(opt.classmap, ec) ? mvseg::ClassMap::load(opt.classmap)
                                                    : mvseg::ClassMap::preset(opt.classmap);
  }

  mvseg::ConfusionMatrix cm(classes.num_classes);
  std::vector<std::int32_t> all_gt;
  std::vector<mvseg::RowMatrix<double>> probs;
  json scans = json::array();
  for (std::size_t i = 0; i < opt.gt.size(); ++i) {
    const auto pred = mvseg::read_labels(mvseg::read_file(opt.pred[i]), classes);
    const auto gt = mvseg::read_labels(mvseg::read_file(opt.gt[i]), classes);
    if (pred.size() != gt.size())
      throw mvseg::MalformedInput(opt.pred[i] + ": " + std::to_string(pred.size()) + " predicted labels but " +
                                  opt.gt[i] + " has " + std::to_string(gt.size()));
    mvseg::ConfusionMatrix one(classes.num_classes);
    try {
      one.accumulate(pred, gt, classes.ignore_id);
    } catch (const mvseg::Error& e) {
      throw mvseg::MalformedInput("scan " + opt.gt[i] + ": " + e.what());
    }
    cm += one;
    scans.push_back({{"pred", opt.pred[i]}, {"gt", opt.gt[i]}, {"points", gt.size()}, {"evaluated", one.total()}});
    if (!opt.scores.empty()) {
      const auto view = mvseg::decode_view(mvseg::read_file(opt.scores[i]));
      if (std::size_t(view.height) * view.width != gt.size() || view.channels != std::uint32_t(classes.num_classes))
        throw mvseg::MalformedInput("scores " + opt.scores[i] + ": expected " + std::to_string(gt.size()) +
                                    " rows of " + std::to_string(classes.num_classes) + " classes");
      probs.push_back(view.dtype == mvseg::DType::F64 ? view.as_f64().data : view.as_f32().data.cast<double>());
      all_gt.insert(all_gt.end(), gt.begin(), gt.end());
    }
  }

  json report = metrics_json(cm, classes);
  report["scans"] = scans;
  report["confusion"] = json::array();
  for (int g = 0; g < cm.num_classes(); ++g) {
    json row = json::array();
    for (int p = 0; p < cm.num_classes(); ++p) row.push_back(cm.counts()(g, p));
    report["confusion"].push_back(row);
  }
  if (!probs.empty()) {
    Eigen::Index rows = 0;
    for (const auto& p : probs) rows += p.rows();
    mvseg::RowMatrix<double> all(rows, classes.num_classes);
    Eigen::Index at = 0;
    for (const auto& p : probs) {
      all.middleRows(at, p.rows()) = p;
      at += p.rows();
    }
    const double ce = mvseg::cross_entropy(all, all_gt, classes.ignore_id);
    const double ls = mvseg::lovasz_softmax(all, all_gt, classes.ignore_id);
    report["losses"] = {{"cross_entropy", ce}, {"lovasz_softmax", ls}, {"cl", ce + ls}};
  }

  ensure_dir(common.out);
  write_json(fs::path(common.out) / "eval.json", report);
  if (opt.plot) confusion_plot(fs::path(common.out) / "confusion.pgm", cm);
  std::cout << "points " << cm.total() << " mIoU " << fixed(report["miou"].get<double>()) << " accuracy "
            << fixed(report["accuracy"].get<double>()) << " fwIoU " << fixed(report["fwiou"].get<double>()) << "\n";
  return kExitOk;
}

int run_bench(const CommonOptions& common, const BenchOptions& opt) {
  if (opt.scans < 1 || opt.repeat < 1) throw UsageError("--scans and --repeat must be >= 1");
  if (opt.head != "kpconv" && opt.head != "knn" && opt.head != "none")
    throw UsageError("--head must be kpconv, knn or none");
  const auto variant = parse_variant(opt.variant);
  const auto cfg = load_config(common);

  static const std::vector<double> kScales{1.0, 0.5, 0.25, 0.125};
  const std::vector<std::string> names{"project_rv",     "project_bev",     "compose_r2b", "compose_b2r",
                                       "flow_s1",        "flow_s2",         "flow_s4",     "flow_s8",
                                       "grid_sample_rv", "grid_sample_bev", "head"};
  std::map<std::string, StageStats> stats;
  StageStats pipeline;

  const int classes = cfg.classes.num_classes;
  const auto head_params = mvseg::KpconvParams::uniform(
      (mvseg::RowMatrix<double>(2 * classes, classes) << mvseg::RowMatrix<double>::Identity(classes, classes) * 0.5,
       mvseg::RowMatrix<double>::Identity(classes, classes) * 0.5)
          .finished());
  std::mt19937_64 proj_rng(derive_seed(opt.seed, 3));
  mvseg::RowMatrix<double> to_classes(opt.channels, classes);
  for (Eigen::Index r = 0; r < to_classes.rows(); ++r)
    for (Eigen::Index c = 0; c < to_classes.cols(); ++c)
      to_classes(r, c) = static_cast<double>(proj_rng() >> 11) * 0x1.0p-53 - 0.5;

  std::vector<AttentionPair> params;
  for (std::size_t k = 0; k < kScales.size(); ++k)
    params.push_back(attention_for_level(nullptr, static_cast<int>(k), opt.channels, opt.seed, false,
                                         mvseg::AttentionGate::Softmax));

  json points = json::array();
  for (int s = 0; s < opt.scans; ++s) {
    const auto cloud = mvseg::synth_scan(cfg.synth, derive_seed(opt.seed, 100 + static_cast<std::uint64_t>(s)));
    points.push_back(cloud.size());
    for (int r = 0; r < opt.repeat; ++r) {
      std::map<std::string, double> t;
      Stopwatch sw;
      const auto rv = mvseg::project_rv(cloud, cfg.rv, variant, cfg.classes.ignore_id);
      t["project_rv"] = sw.ms();
      sw = Stopwatch();
      const auto bev = mvseg::project_bev(cloud, cfg.bev, cfg.classes.ignore_id);
      t["project_bev"] = sw.ms();
      sw = Stopwatch();
      const auto r2b = mvseg::compose_r2b(rv, bev);
      t["compose_r2b"] = sw.ms();
      sw = Stopwatch();
      const auto b2r = mvseg::compose_b2r(bev, rv);
      t["compose_b2r"] = sw.ms();

      // stand-ins for decoder features; not part of the measured pipeline
      const auto m_r = lift_features(rv.features, rv.point_index, opt.channels, derive_seed(opt.seed, 0));
      const auto m_b = lift_features(bev.features, bev.representative_index, opt.channels, derive_seed(opt.seed, 1));

      mvseg::FeatureMap<float> top_r, top_b;
      for (std::size_t k = 0; k < kScales.size(); ++k) {
        const int hr = scaled_size(m_r.height, kScales[k]), wr = scaled_size(m_r.width, kScales[k]);
        const int hb = scaled_size(m_b.height, kScales[k]), wb = scaled_size(m_b.width, kScales[k]);
        const auto in_r = downsample(m_r, hr, wr);
        const auto in_b = downsample(m_b, hb, wb);
        sw = Stopwatch();
        const auto c_r2b = mvseg::scale_correspondence(r2b, hr, wr, hb, wb);
        const auto c_b2r = mvseg::scale_correspondence(b2r, hb, wb, hr, wr);
        auto fused = mvseg::gfm_forward(in_r, in_b, c_r2b, c_b2r, params[k].rv, params[k].bev);
        t[names[4 + k]] = sw.ms();
        if (k == 0) {
          top_r = std::move(fused.first);
          top_b = std::move(fused.second);
        }
      }

      sw = Stopwatch();
      const auto f_r = mvseg::grid_sample(top_r, rv.point_pixels);
      t["grid_sample_rv"] = sw.ms();
      sw = Stopwatch();
      const auto f_b = mvseg::grid_sample(top_b, bev.point_pixels);
      t["grid_sample_bev"] = sw.ms();

      double sum = 0.0;
      for (const auto& [name, ms] : t) sum += ms;
      pipeline.samples.push_back(sum);

      if (opt.head != "none") {
        mvseg::PointScores<double> s_r = f_r.cast<double>() * to_classes;
        mvseg::PointScores<double> s_b = f_b.cast<double>() * to_classes;
        softmax_rows(s_r);
        softmax_rows(s_b);
        sw = Stopwatch();
        if (opt.head == "kpconv") {
          const auto f_f = mvseg::fuse_predictions(s_r, s_b, cloud, head_params);
          (void)f_f;
        } else {
          const auto labels = mvseg::argmax_labels(s_r + s_b);
          const auto smoothed = mvseg::knn_postprocess(cloud, labels, mvseg::point_ranges(cloud), 5, 1.0);
          (void)smoothed;
        }
        t["head"] = sw.ms();
      }
      for (const auto& [name, ms] : t) stats[name].samples.push_back(ms);
    }
  }

  json stages;
  for (const auto& name : names) stages[name] = stats[name].summary();
  json report{{"preset", cfg.preset},
              {"variant", opt.variant},
              {"scans", opt.scans},
              {"repeat", opt.repeat},
              {"jobs", mvseg::num_jobs()},
              {"channels", opt.channels},
              {"scales", kScales},
              {"head", opt.head},
              {"points", points},
              {"stages", stages},
              {"pipeline", pipeline.summary()}};

  ensure_dir(common.out);
  write_json(fs::path(common.out) / "bench.json", report);
  for (const auto& name : names) {
    const auto& s = stages[name];
    if (s.contains("skipped")) {
      std::cout << name << " skipped\n";
      continue;
    }
    std::cout << name << " median_ms " << fixed(s["median_ms"].get<double>(), 3) << " p95_ms "
              << fixed(s["p95_ms"].get<double>(), 3) << "\n";
  }
  const auto& p = report["pipeline"];
  std::cout << "pipeline median_ms " << fixed(p["median_ms"].get<double>(), 3) << " p95_ms "
            << fixed(p["p95_ms"].get<double>(), 3) << " samples " << p["samples"].get<std::size_t>() << "\n";
  return kExitOk;
}

int run_fuse(const CommonOptions& common, const FuseOptions& opt) {
  require_file(opt.scan);
  require_file(opt.labels);
  if (!opt.params.empty()) require_file(opt.params);
  if (opt.head != "kpconv" && opt.head != "knn") throw UsageError("--head must be kpconv or knn");
  if (opt.k < 1) throw UsageError("--k must be >= 1");
  if (!(opt.noise >= 0.0)) throw UsageError("--noise must be non-negative");
  const auto weights = parse_lambda(opt.lambda);
  const auto variant = parse_variant(opt.variant);
  const auto cfg = load_config(common);
  const auto& classes = cfg.classes;
  const int c = classes.num_classes;

  std::optional<mvseg::KpconvParams> learned;
  if (!opt.params.empty() && opt.head == "kpconv") {
    try {
      learned = mvseg::get_kpconv(mvseg::decode_blocks(mvseg::read_file(opt.params)), "head");
    } catch (const mvseg::Error& e) {
      throw mvseg::ConfigError(std::string("--params: ") + e.what());
    }
    if (learned->in_channels() != 2 * c || learned->out_channels() != c)
      throw mvseg::ConfigError("--params: head maps " + std::to_string(learned->in_channels()) + " -> " +
                               std::to_string(learned->out_channels()) + " channels, expected " +
                               std::to_string(2 * c) + " -> " + std::to_string(c));
  }

  auto cloud = mvseg::load_scan(opt.scan);
  mvseg::attach_labels(cloud, mvseg::read_labels(mvseg::read_file(opt.labels), classes));
  const auto rv = mvseg::project_rv(cloud, cfg.rv, variant, classes.ignore_id);
  const auto bev = mvseg::project_bev(cloud, cfg.bev, classes.ignore_id);

  const auto m_r = noisy_scores(rv.labels, c, opt.noise, derive_seed(opt.seed, 4));
  const auto m_b = noisy_scores(bev.labels, c, opt.noise, derive_seed(opt.seed, 5));
  auto f_r = mvseg::grid_sample(m_r, rv.point_pixels);
  auto f_b = mvseg::grid_sample(m_b, bev.point_pixels);
  fill_missing(f_r, rv.point_pixels);
  fill_missing(f_b, bev.point_pixels);

  mvseg::PointScores<double> f_f;
  std::vector<std::int32_t> fused_labels;
  if (opt.head == "kpconv") {
    if (learned) {
      f_f = mvseg::fuse_predictions(f_r, f_b, cloud, *learned);
      softmax_rows(f_f);  // a learned head emits logits
    } else {
      mvseg::RowMatrix<double> w(2 * c, c);
      w << mvseg::RowMatrix<double>::Identity(c, c) * 0.5, mvseg::RowMatrix<double>::Identity(c, c) * 0.5;
      f_f = mvseg::fuse_predictions(f_r, f_b, cloud, mvseg::KpconvParams::uniform(w));
    }
    fused_labels = mvseg::argmax_labels(f_f);
  } else {
    f_f = 0.5 * (f_r + f_b);
    fused_labels = mvseg::knn_postprocess(cloud, mvseg::argmax_labels(f_f), mvseg::point_ranges(cloud), opt.k,
                                          opt.cutoff);
  }

  mvseg::LossInputs<double> in;
  in.m_r = &m_r.data;
  in.q_r = {rv.labels.data(), static_cast<std::size_t>(rv.labels.size())};
  in.m_b = &m_b.data;
  in.q_b = {bev.labels.data(), static_cast<std::size_t>(bev.labels.size())};
  in.f_r = &f_r;
  in.f_b = &f_b;
  in.f_f = &f_f;
  in.q = cloud.labels;
  in.ignore_id = classes.ignore_id;
  const auto loss = mvseg::loss_total(in, weights);

  auto evaluate = [&](const std::vector<std::int32_t>& pred) {
    mvseg::ConfusionMatrix cm(c);
    cm.accumulate(pred, cloud.labels, classes.ignore_id);
    return metrics_json(cm, classes);
  };

  json report{{"scan", opt.scan},
              {"labels", opt.labels},
              {"head", opt.head},
              {"seed", opt.seed},
              {"points", cloud.size()},
              {"lambda", {weights.alpha, weights.beta, weights.gamma, weights.rho, weights.sigma}},
              {"loss",
               {{"ce_fused", loss.terms.ce_fused},
                {"ce_rv", loss.terms.ce_rv},
                {"ce_bev", loss.terms.ce_bev},
                {"cl_rv", loss.terms.cl_rv},
                {"cl_bev", loss.terms.cl_bev},
                {"loss_2d", loss.loss_2d},
                {"loss_3d", loss.loss_3d},
                {"total", loss.total}}},
              {"metrics",
               {{"rv", evaluate(mvseg::argmax_labels(f_r))},
                {"bev", evaluate(mvseg::argmax_labels(f_b))},
                {"fused", evaluate(fused_labels)}}}};
  if (opt.head == "knn") report["knn"] = {{"k", opt.k}, {"cutoff", opt.cutoff}};

  ensure_dir(common.out);
  write_json(fs::path(common.out) / "fuse.json", report);
  mvseg::write_file(fs::path(common.out) / "fused.label",
                    mvseg::write_label_words(encode_labels(fused_labels, classes)));
  std::cout << "head " << opt.head << " total_loss " << fixed(loss.total) << " fused_mIoU "
            << fixed(report["metrics"]["fused"]["miou"].get<double>()) << " rv_mIoU "
            << fixed(report["metrics"]["rv"]["miou"].get<double>()) << " bev_mIoU "
            << fixed(report["metrics"]["bev"]["miou"].get<double>()) << "\n";
  return kExitOk;
}

}  // namespace mvflow
