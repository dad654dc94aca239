#pragma once

// Experiment drivers: unimodal baselines, fused-image classification, the
// five-strategy comparison and the feature-length sweep.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tif/codec/png.hpp"
#include "tif/codec/raster.hpp"
#include "tif/codec/superpixel.hpp"
#include "tif/fusion/early_fusion.hpp"
#include "tif/fusion/late_fusion.hpp"
#include "tif/image/mini_cnn.hpp"
#include "tif/pipeline/experiment_config.hpp"
#include "tif/pipeline/manifest.hpp"
#include "tif/pipeline/synthetic.hpp"
#include "tif/text/text_model.hpp"

namespace tif::pipeline {

struct Split {
  std::vector<std::string> texts;
  std::vector<codec::RasterImage> images;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct Dataset {
  ClassTable classes;
  Split train;
  Split test;
};

inline Split load_split(const DatasetManifest& m, const ClassTable& classes, std::size_t side) {
  Split s;
  for (const auto& r : m.records) {
    s.texts.push_back(r.text);
    s.images.push_back(codec::resize_bilinear(codec::read_png(m.resolve(r).string()), side, side));
    s.labels.push_back(classes.index(r.label));
  }
  return s;
}

/// Reads and validates both manifests before any image is decoded.
inline Dataset load_dataset(const fs::path& train_manifest, const fs::path& test_manifest, std::size_t side) {
  const DatasetManifest train = read_manifest(train_manifest);
  const DatasetManifest test = read_manifest(test_manifest);
  if (train.records.empty()) throw ManifestError("train split is empty");
  Dataset ds{ClassTable::from(train), {}, {}};
  validate_manifest(train, ds.classes, "train");
  validate_manifest(test, ds.classes, "test");
  require_disjoint(train, test);
  ds.train = load_split(train, ds.classes, side);
  ds.test = load_split(test, ds.classes, side);
  return ds;
}

inline Dataset to_dataset(const SyntheticDataset& synth, const SyntheticSpec& spec) {
  std::vector<std::string> names;
  for (const auto& c : spec.classes) names.push_back(c.name);
  Dataset ds{ClassTable(names), {}, {}};
  auto convert = [&](const std::vector<SyntheticSample>& samples, Split& out) {
    for (const auto& s : samples) {
      out.texts.push_back(s.text);
      out.images.push_back(s.image);
      out.labels.push_back(ds.classes.index(spec.classes[s.label].name));
    }
  };
  convert(synth.train, ds.train);
  convert(synth.test, ds.test);
  return ds;
}

inline std::vector<nn::Tensor> to_tensors(std::span<const codec::RasterImage> images) {
  std::vector<nn::Tensor> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(image::to_tensor(img));
  return out;
}

inline double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (labels.empty()) throw std::invalid_argument("accuracy: no samples");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------

struct TextRun {
  text::TextArtifact artifact;
  std::vector<nn::EpochStats> trace;
  double test_accuracy = 0.0;
};

inline double evaluate_text(const text::TextArtifact& art, const Split& split) {
  std::vector<std::size_t> pred;
  for (const auto& t : split.texts) pred.push_back(art.model.predict(art.encode(t)));
  return accuracy(pred, split.labels);
}

inline TextRun run_text(const Dataset& ds, const ExperimentConfig& cfg, std::uint64_t seed) {
  text::TextModelConfig tc = cfg.text;
  tc.classes = ds.classes.size();
  auto trained = text::train_text_model(tc, ds.train.texts, ds.train.labels, cfg.train_options(seed), cfg.min_frequency);
  trained.artifact.geometry = cfg.geometry().to_kv().serialize();
  TextRun run{std::move(trained.artifact), std::move(trained.trace), 0.0};
  run.test_accuracy = evaluate_text(run.artifact, ds.test);
  return run;
}

struct ImageRun {
  image::MiniCnn model;
  std::vector<nn::EpochStats> trace;
  double test_accuracy = 0.0;
};

inline double evaluate_image(const image::MiniCnn& model, std::span<const nn::Tensor> images,
                             std::span<const std::size_t> labels) {
  std::vector<std::size_t> pred;
  for (const auto& x : images) pred.push_back(model.predict(x));
  return accuracy(pred, labels);
}

/// The same hyperparameters serve plain and fused images.
inline ImageRun run_image(std::span<const codec::RasterImage> train_images, std::span<const std::size_t> train_labels,
                          std::span<const codec::RasterImage> test_images, std::span<const std::size_t> test_labels,
                          std::size_t classes, const ExperimentConfig& cfg, std::uint64_t seed) {
  image::MiniCnnConfig ic = cfg.image;
  ic.classes = classes;
  const auto train_x = to_tensors(train_images);
  const auto test_x = to_tensors(test_images);
  auto trained = image::train_image_model(ic, train_x, train_labels, cfg.train_options(seed));
  ImageRun run{std::move(trained.model), std::move(trained.trace), 0.0};
  run.test_accuracy = evaluate_image(run.model, test_x, test_labels);
  return run;
}

/// Resize to `side`, then paint the quantized text features at the geometry's
/// anchor. Quantization uses the artifact's (training-split) NormStats.
inline codec::RasterImage fuse_record(const codec::RasterImage& base, const text::FeatureVector& features,
                                      const text::NormStats& stats, const codec::EncodingGeometry& geom,
                                      std::size_t side) {
  const auto resized = codec::resize_bilinear(base, side, side);
  return codec::paint_encoding(resized, codec::quantize(features, stats), geom);
}

inline std::vector<codec::RasterImage> fuse_images(const text::TextArtifact& art, const Split& split,
                                                   const codec::EncodingGeometry& geom, std::size_t side) {
  if (!art.norm) throw std::invalid_argument("fuse: text model has no normalisation statistics");
  if (geom.vector_length() != art.model.config().feature_length()) {
    throw std::invalid_argument("fuse: geometry holds " + std::to_string(geom.vector_length()) +
                                " values, text features have " + std::to_string(art.model.config().feature_length()));
  }
  geom.require_fit(side, side);
  const auto features = art.extract_features(split.texts);
  std::vector<codec::RasterImage> out;
  out.reserve(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) out.push_back(fuse_record(split.images[i], features[i], *art.norm, geom, side));
  return out;
}

class RegionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FuseReport {
  fs::path manifest;
  std::size_t written = 0;
  std::vector<std::string> failures;  // "<record>: <reason>"
};

/// Pixels outside the encoding region must match the resized base image.
inline bool only_region_changed(const codec::RasterImage& resized, const codec::RasterImage& fused,
                                const codec::EncodingGeometry& geom) {
  const std::size_t x0 = geom.anchor.x, y0 = geom.anchor.y;
  const std::size_t x1 = x0 + geom.region_width(), y1 = y0 + geom.region_height();
  for (std::size_t y = 0; y < resized.height(); ++y)
    for (std::size_t x = 0; x < resized.width(); ++x)
      if ((x < x0 || x >= x1 || y < y0 || y >= y1) && resized.pixel(x, y) != fused.pixel(x, y)) return false;
  return true;
}

/// Writes one fused PNG per record under out_dir/images and a manifest
/// `<split>.tsv` pointing at them. Records that fail are skipped and listed;
/// more than 10% failures aborts. Ten records chosen by `seed` are checked
/// for changes outside the encoding region.
inline FuseReport fuse_dataset(const DatasetManifest& manifest, const text::TextArtifact& art,
                               const codec::EncodingGeometry& geom, std::size_t side, const fs::path& out_dir,
                               const std::string& split, std::uint64_t seed) {
  if (!art.norm) throw std::invalid_argument("fuse: text model has no normalisation statistics");
  if (geom.vector_length() != art.model.config().feature_length()) {
    throw std::invalid_argument("fuse: geometry holds " + std::to_string(geom.vector_length()) +
                                " values, text features have " + std::to_string(art.model.config().feature_length()));
  }
  geom.require_fit(side, side);
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const std::size_t n = manifest.records.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  nn::Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<bool> spot(n, false);
  for (std::size_t i = 0; i < std::min<std::size_t>(10, n); ++i) spot[order[i]] = true;

  FuseReport report;
  DatasetManifest out;
  out.base_dir = out_dir;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = manifest.records[i];
    try {
      const auto resized = codec::resize_bilinear(codec::read_png(manifest.resolve(r).string()), side, side);
      const std::string texts[1] = {r.text};
      const auto fused = codec::paint_encoding(resized, codec::quantize(art.extract_features(texts)[0], *art.norm), geom);
      if (spot[i] && !only_region_changed(resized, fused, geom)) {
        throw RegionViolation("fuse: " + r.image_path + ": pixels outside the encoding region changed");
      }
      char name[32];
      std::snprintf(name, sizeof name, "images/%s_%05zu.png", split.c_str(), i);
      codec::write_png(fused, (out_dir / name).string());
      out.records.push_back({r.label, name, r.text});
      ++report.written;
    } catch (const RegionViolation&) {
      throw;
    } catch (const std::exception& e) {
      report.failures.push_back(r.image_path + ": " + e.what());
    }
  }
  if (n > 0 && report.failures.size() * 10 > n) {
    throw std::runtime_error("fuse: " + std::to_string(report.failures.size()) + " of " + std::to_string(n) +
                             " records failed (limit 10%); first: " + report.failures.front());
  }
  report.manifest = out_dir / (split + ".tsv");
  write_manifest(out, report.manifest);
  return report;
}

// ---------------------------------------------------------------------------

enum class ExperimentKind { TextOnly, ImageOnly, Fused, Compare };

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  if (s == "text-only") return ExperimentKind::TextOnly;
  if (s == "image-only") return ExperimentKind::ImageOnly;
  if (s == "fused") return ExperimentKind::Fused;
  if (s == "compare") return ExperimentKind::Compare;
  throw std::invalid_argument("unknown experiment '" + s + "' (text-only, image-only, fused, compare)");
}

struct MetricsRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string split;
  double accuracy = 0.0;
};

inline double run_fused(const Dataset& ds, const ExperimentConfig& cfg, std::uint64_t seed, const TextRun& text_run) {
  const auto geom = cfg.geometry();
  const auto train = fuse_images(text_run.artifact, ds.train, geom, cfg.image.side);
  const auto test = fuse_images(text_run.artifact, ds.test, geom, cfg.image.side);
  return run_image(train, ds.train.labels, test, ds.test.labels, ds.classes.size(), cfg, seed).test_accuracy;
}

// ---------------------------------------------------------------------------
// Five-strategy comparison. Cells are ordered early, late, proposed,
// text-only, image-only for every seed, followed by one mean row each.

inline const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names{"early", "late", "proposed", "text-only", "image-only"};
  return names;
}

struct ComparisonCell {
  std::string strategy;
  std::string seed;  // decimal seed, or "mean"
  std::optional<double> accuracy;
  std::string error;
};

struct ComparisonTable {
  std::vector<ComparisonCell> cells;

  std::optional<double> get(const std::string& strategy, const std::string& seed) const {
    for (const auto& c : cells)
      if (c.strategy == strategy && c.seed == seed) return c.accuracy;
    return std::nullopt;
  }
};

inline ComparisonTable compare_strategies(const Dataset& ds, const ExperimentConfig& cfg,
                                          std::span<const std::uint64_t> seeds) {
  if (ds.test.size() == 0) throw std::invalid_argument("compare: test split is empty");
  const std::size_t classes = ds.classes.size();
  ComparisonTable table;
  for (std::uint64_t seed : seeds) {
    const std::string tag = std::to_string(seed);
    std::optional<double> acc[5];
    std::string err[5];
    auto attempt = [&](int slot, auto&& fn) {
      try {
        acc[slot] = fn();
      } catch (const std::exception& e) {
        err[slot] = e.what();
      }
    };
    std::optional<TextRun> text_run;
    std::optional<ImageRun> image_run;
    attempt(3, [&] {
      text_run = run_text(ds, cfg, seed);
      return text_run->test_accuracy;
    });
    attempt(4, [&] {
      image_run = run_image(ds.train.images, ds.train.labels, ds.test.images, ds.test.labels, classes, cfg, seed);
      return image_run->test_accuracy;
    });
    attempt(0, [&]() -> double {
      if (!text_run || !image_run) throw std::runtime_error("needs both unimodal models");
      auto image_features = [&](const Split& s) {
        std::vector<std::vector<double>> f;
        for (const auto& img : s.images) f.push_back(image_run->model.features(img));
        return f;
      };
      const auto tr_t = text_run->artifact.extract_features(ds.train.texts);
      const auto tr_i = image_features(ds.train);
      const auto lm = fusion::early_fusion_train(tr_t, tr_i, ds.train.labels, classes, cfg.early_options(seed));
      const auto te_t = text_run->artifact.extract_features(ds.test.texts);
      const auto te_i = image_features(ds.test);
      std::vector<std::size_t> pred;
      for (std::size_t i = 0; i < ds.test.size(); ++i) {
        const auto post = fusion::early_fusion_predict(lm.model, fusion::concat_features(te_t[i], te_i[i]));
        pred.push_back(nn::argmax(post.data()));
      }
      return accuracy(pred, ds.test.labels);
    });
    attempt(1, [&]() -> double {
      if (!text_run || !image_run) throw std::runtime_error("needs both unimodal models");
      const fusion::FusionWeights w{cfg.late_alpha};
      std::vector<std::size_t> pred;
      for (std::size_t i = 0; i < ds.test.size(); ++i) {
        const auto pt = text_run->artifact.model.posteriors(text_run->artifact.encode(ds.test.texts[i]));
        const auto pi = image_run->model.posteriors(ds.test.images[i]);
        const std::vector<std::vector<double>> both{pt.values(), pi.values()};
        pred.push_back(nn::argmax(fusion::late_fusion_combine(both, w)));
      }
      return accuracy(pred, ds.test.labels);
    });
    attempt(2, [&]() -> double {
      if (!text_run) throw std::runtime_error("needs the text model");
      return run_fused(ds, cfg, seed, *text_run);
    });
    for (int s = 0; s < 5; ++s) table.cells.push_back({strategy_names()[static_cast<std::size_t>(s)], tag, acc[s], err[s]});
  }
  for (const auto& name : strategy_names()) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : table.cells) {
      if (c.strategy == name && c.accuracy) {
        sum += *c.accuracy;
        ++n;
      }
    }
    table.cells.push_back({name, "mean", n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt,
                           n ? "" : "no successful runs"});
  }
  return table;
}

inline std::vector<MetricsRow> run_experiment(ExperimentKind kind, const Dataset& ds, const ExperimentConfig& cfg,
                                              std::span<const std::uint64_t> seeds) {
  if (ds.test.size() == 0) throw std::invalid_argument("experiment: test split is empty");
  if (ds.train.size() == 0) throw std::invalid_argument("experiment: train split is empty");
  std::vector<MetricsRow> rows;
  if (kind == ExperimentKind::Compare) {
    const auto table = compare_strategies(ds, cfg, seeds);
    for (const auto& c : table.cells) {
      if (c.seed == "mean") continue;
      if (!c.accuracy) throw std::runtime_error("compare/" + c.strategy + " seed " + c.seed + ": " + c.error);
      rows.push_back({"compare/" + c.strategy, std::stoull(c.seed), "test", *c.accuracy});
    }
    return rows;
  }
  for (std::uint64_t seed : seeds) {
    try {
      switch (kind) {
        case ExperimentKind::TextOnly:
          rows.push_back({"text-only", seed, "test", run_text(ds, cfg, seed).test_accuracy});
          break;
        case ExperimentKind::ImageOnly:
          rows.push_back({"image-only", seed, "test",
                          run_image(ds.train.images, ds.train.labels, ds.test.images, ds.test.labels,
                                    ds.classes.size(), cfg, seed)
                              .test_accuracy});
          break;
        case ExperimentKind::Fused:
          rows.push_back({"fused", seed, "test", run_fused(ds, cfg, seed, run_text(ds, cfg, seed))});
          break;
        case ExperimentKind::Compare: break;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("experiment seed " + std::to_string(seed) + ": " + e.what());
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Feature-length sweep: for each L the text grid becomes the most square
// Ht x Wt with Ht * Wt = L / 3.

struct SweepRow {
  std::size_t feature_length = 0;
  std::uint64_t seed = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t superpixel = 0;
  std::optional<double> text_only;
  std::optional<double> fused;
  std::string status;  // "ok", or why the row is unfit / failed
};

inline std::vector<SweepRow> sweep_embedding(const Dataset& ds, const ExperimentConfig& cfg,
                                             std::span<const std::size_t> lengths, std::span<const std::uint64_t> seeds) {
  if (ds.test.size() == 0) throw std::invalid_argument("sweep: test split is empty");
  std::vector<SweepRow> rows;
  for (std::size_t L : lengths) {
    for (std::uint64_t seed : seeds) {
      SweepRow row;
      row.feature_length = L;
      row.seed = seed;
      row.superpixel = cfg.superpixel;
      if (L == 0 || L % 3 != 0) {
        row.status = "unfit: length not a positive multiple of 3";
        rows.push_back(row);
        continue;
      }
      std::tie(row.grid_h, row.grid_w) = codec::factor_grid(L / 3);
      ExperimentConfig c = cfg;
      c.text.grid_h = row.grid_h;
      c.text.grid_w = row.grid_w;
      if (!c.geometry().fits(c.image.side, c.image.side)) {
        row.status = "unfit: " + std::to_string(c.geometry().region_width()) + "x" +
                     std::to_string(c.geometry().region_height()) + " region exceeds image";
        rows.push_back(row);
        continue;
      }
      try {
        const TextRun tr = run_text(ds, c, seed);
        row.text_only = tr.test_accuracy;
        row.fused = run_fused(ds, c, seed, tr);
        row.status = "ok";
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace tif::pipeline
