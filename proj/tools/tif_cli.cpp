// tif: command-line front end for the text-in-image fusion pipeline.
//
// On failure the last line on stderr is `error<TAB><kind><TAB><message>` and
// the exit status is nonzero (2 for usage errors, 1 otherwise).

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tif/codec/png.hpp"
#include "tif/nn/checkpoint.hpp"
#include "tif/nn/sgd.hpp"
#include "tif/pipeline/experiment_config.hpp"
#include "tif/pipeline/experiments.hpp"
#include "tif/pipeline/manifest.hpp"
#include "tif/pipeline/reports.hpp"
#include "tif/pipeline/synthetic.hpp"

namespace fs = std::filesystem;
using namespace tif;
using namespace tif::pipeline;

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::string config_path;
  std::string out;
};

struct LoadedConfig {
  ExperimentConfig cfg;
  ConfigEcho echo;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LoadedConfig load_config(const Common& c, const std::string& command) {
  LoadedConfig lc;
  if (!c.config_path.empty()) {
    lc.echo.source = c.config_path;
    lc.echo.verbatim = read_file(c.config_path);
    lc.cfg = ExperimentConfig::from_kv(KvConfig::parse(lc.echo.verbatim));
  }
  lc.echo.command = command;
  return lc;
}

void set_classes(LoadedConfig& lc, std::size_t classes) {
  lc.cfg.text.classes = classes;
  lc.cfg.image.classes = classes;
}

void finish_echo(LoadedConfig& lc) { lc.echo.effective = lc.cfg.to_kv(); }

fs::path out_dir(const Common& c) {
  if (c.out.empty()) throw std::invalid_argument("--out is required");
  fs::create_directories(c.out);
  return c.out;
}

std::string join_classes(const ClassTable& t) {
  std::string s;
  for (const auto& n : t.names()) s += n + "\n";
  return s;
}

ClassTable classes_from(const nn::Checkpoint& ck) {
  const auto it = ck.sections.find("classes");
  if (it == ck.sections.end()) throw nn::CheckpointError("checkpoint has no class table");
  std::vector<std::string> names;
  std::istringstream in(it->second);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) names.push_back(line);
  return ClassTable(names);
}

std::string trace_csv(const std::vector<nn::EpochStats>& trace, const ConfigEcho& echo) {
  std::string out = comment_block(echo) + "epoch,mean_loss,accuracy\n";
  for (const auto& e : trace)
    out += std::to_string(e.epoch) + "," + format_double(e.mean_loss) + "," + format_double(e.accuracy) + "\n";
  return out;
}

Split load_for(const DatasetManifest& m, const ClassTable& classes, std::size_t side, const std::string& split) {
  validate_manifest(m, classes, split);
  return load_split(m, classes, side);
}

std::vector<std::uint64_t> seed_list(const std::vector<std::uint64_t>& seeds, std::uint64_t seed) {
  return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
}

// ---------------------------------------------------------------------------

int cmd_gen_synth(const Common& c, const std::string& kind, double ambiguity, std::size_t train_n, std::size_t test_n,
                  std::size_t side) {
  SyntheticSpec spec;
  if (kind == "xor") spec = SyntheticSpec::xor_spec(c.seed);
  else if (kind == "soft") spec = SyntheticSpec::soft_spec(ambiguity, c.seed);
  else throw std::invalid_argument("--kind must be xor or soft");
  spec.train_per_class = train_n;
  spec.test_per_class = test_n;
  spec.side = side;
  const auto written = generate_synthetic(spec, out_dir(c));
  std::cout << "wrote " << written.train_manifest.string() << " and " << written.test_manifest.string() << "\n";
  return 0;
}

int cmd_build_vocab(const Common& c, const std::string& manifest, std::optional<std::size_t> min_freq) {
  auto lc = load_config(c, "build-vocab");
  const auto m = read_manifest(manifest);
  std::vector<std::string> texts;
  for (const auto& r : m.records) texts.push_back(r.text);
  const auto vocab = text::Vocabulary::build(texts, min_freq.value_or(lc.cfg.min_frequency));
  const fs::path path = out_dir(c) / "vocab.txt";
  write_text_file(path, vocab.serialize());
  std::cout << "vocabulary: " << vocab.size() << " tokens -> " << path.string() << "\n";
  return 0;
}

int cmd_train_text(const Common& c, const std::string& train_path, const std::string& test_path,
                   const std::string& vocab_path) {
  auto lc = load_config(c, "train-text " + train_path + (test_path.empty() ? "" : " " + test_path));
  const auto train = read_manifest(train_path);
  if (train.records.empty()) throw ManifestError("train split is empty");
  const auto classes = ClassTable::from(train);
  std::optional<DatasetManifest> test;
  if (!test_path.empty()) {
    test = read_manifest(test_path);
    validate_manifest(*test, classes, "test");
    require_disjoint(train, *test);
  }
  set_classes(lc, classes.size());
  finish_echo(lc);
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
  for (const auto& r : train.records) {
    if (!classes.contains(r.label)) throw ManifestError("unknown label '" + r.label + "'");
    texts.push_back(r.text);
    labels.push_back(classes.index(r.label));
  }
  auto result = vocab_path.empty()
                    ? text::train_text_model(lc.cfg.text, texts, labels, lc.cfg.train_options(c.seed), lc.cfg.min_frequency)
                    : text::train_text_model(lc.cfg.text, text::Vocabulary::deserialize(read_file(vocab_path)), texts,
                                             labels, lc.cfg.train_options(c.seed));
  const fs::path dir = out_dir(c);
  auto ck = result.artifact.to_checkpoint();
  ck.sections["classes"] = join_classes(classes);
  nn::save_checkpoint(ck, (dir / "text.ckpt").string());
  write_text_file(dir / "text_trace.csv", trace_csv(result.trace, lc.echo));
  std::cout << "text model: " << result.trace.size() << " epochs, final train accuracy "
            << (result.trace.empty() ? std::string("n/a") : format_double(result.trace.back().accuracy)) << "\n";
  if (test) {
    Split s;
    for (const auto& r : test->records) {
      s.texts.push_back(r.text);
      s.labels.push_back(classes.index(r.label));
    }
    const MetricsRow row{"text-only", c.seed, "test", evaluate_text(result.artifact, s)};
    write_text_file(dir / "metrics.csv", format_metrics_csv(std::span(&row, 1), lc.echo));
    std::cout << "test accuracy " << format_double(row.accuracy) << "\n";
  }
  return 0;
}

int cmd_extract(const Common& c, const std::string& ckpt, const std::string& manifest) {
  auto lc = load_config(c, "extract " + ckpt + " " + manifest);
  const auto ck = nn::load_checkpoint(ckpt);
  const auto art = text::TextArtifact::from_checkpoint(ck);
  lc.cfg.text = art.model.config();
  finish_echo(lc);
  const auto m = read_manifest(manifest);
  std::vector<std::string> texts;
  for (const auto& r : m.records) texts.push_back(r.text);
  const auto feats = art.extract_features(texts);
  std::string out = comment_block(lc.echo) + "index,label";
  for (std::size_t j = 0; j < art.model.config().feature_length(); ++j) out += ",f" + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < feats.size(); ++i) {
    out += std::to_string(i) + "," + m.records[i].label;
    for (double v : feats[i]) out += "," + format_double(v);
    out += "\n";
  }
  const fs::path path = out_dir(c) / "features.csv";
  write_text_file(path, out);
  std::cout << "features: " << feats.size() << " x " << art.model.config().feature_length() << " -> " << path.string()
            << "\n";
  return 0;
}

int cmd_fuse(const Common& c, const std::string& ckpt, const std::string& train_path, const std::string& test_path) {
  auto lc = load_config(c, "fuse");
  auto ck = nn::load_checkpoint(ckpt);
  auto art = text::TextArtifact::from_checkpoint(ck);
  lc.cfg.text = art.model.config();
  const auto geom = lc.cfg.geometry();
  geom.validate();
  const fs::path dir = out_dir(c);
  int failures = 0;
  auto run = [&](const std::string& path, const std::string& split) {
    if (path.empty()) return;
    const auto m = read_manifest(path);
    const auto report = fuse_dataset(m, art, geom, lc.cfg.image.side, dir, split, c.seed);
    for (const auto& f : report.failures) std::cerr << "warn\tfuse\t" << f << "\n";
    failures += static_cast<int>(report.failures.size());
    std::cout << "fused " << split << ": " << report.written << " written, " << report.failures.size()
              << " skipped -> " << report.manifest.string() << "\n";
  };
  run(train_path, "train");
  run(test_path, "test");
  const std::string geometry_text = geom.to_kv().serialize() + "image.side = " + std::to_string(lc.cfg.image.side) + "\n";
  write_text_file(dir / "geometry.cfg", geometry_text);
  art.geometry = geometry_text;
  auto out_ck = art.to_checkpoint();
  if (auto it = ck.sections.find("classes"); it != ck.sections.end()) out_ck.sections["classes"] = it->second;
  nn::save_checkpoint(out_ck, (dir / "text.ckpt").string());
  return 0;
}

int cmd_train_image(const Common& c, const std::string& train_path, const std::string& test_path) {
  auto lc = load_config(c, "train-image " + train_path + (test_path.empty() ? "" : " " + test_path));
  const auto train = read_manifest(train_path);
  if (train.records.empty()) throw ManifestError("train split is empty");
  const auto classes = ClassTable::from(train);
  std::optional<DatasetManifest> test;
  if (!test_path.empty()) {
    test = read_manifest(test_path);
    validate_manifest(*test, classes, "test");
    require_disjoint(train, *test);
  }
  set_classes(lc, classes.size());
  finish_echo(lc);
  const Split tr = load_for(train, classes, lc.cfg.image.side, "train");
  const auto trained = image::train_image_model(lc.cfg.image, to_tensors(tr.images), tr.labels, lc.cfg.train_options(c.seed));
  const fs::path dir = out_dir(c);
  auto ck = trained.model.to_checkpoint();
  ck.sections["classes"] = join_classes(classes);
  nn::save_checkpoint(ck, (dir / "image.ckpt").string());
  write_text_file(dir / "image_trace.csv", trace_csv(trained.trace, lc.echo));
  std::cout << "image model: " << trained.trace.size() << " epochs, final train accuracy "
            << (trained.trace.empty() ? std::string("n/a") : format_double(trained.trace.back().accuracy)) << "\n";
  if (test) {
    const Split te = load_split(*test, classes, lc.cfg.image.side);
    const MetricsRow row{"image", c.seed, "test", evaluate_image(trained.model, to_tensors(te.images), te.labels)};
    write_text_file(dir / "metrics.csv", format_metrics_csv(std::span(&row, 1), lc.echo));
    std::cout << "test accuracy " << format_double(row.accuracy) << "\n";
  }
  return 0;
}

int cmd_eval_checkpoint(const Common& c, const std::string& ckpt, const std::string& manifest) {
  auto lc = load_config(c, "eval " + ckpt + " " + manifest);
  const auto ck = nn::load_checkpoint(ckpt);
  const auto classes = classes_from(ck);
  const auto m = read_manifest(manifest);
  if (m.records.empty()) throw ManifestError("evaluation split is empty");
  MetricsRow row{ck.model_kind, c.seed, "eval", 0.0};
  if (ck.model_kind == "mini-cnn") {
    const auto model = image::MiniCnn::from_checkpoint(ck);
    lc.cfg.image = model.config();
    const Split s = load_for(m, classes, model.config().side, "eval");
    row.accuracy = evaluate_image(model, to_tensors(s.images), s.labels);
  } else {
    const auto art = text::TextArtifact::from_checkpoint(ck);
    lc.cfg.text = art.model.config();
    Split s;
    for (const auto& r : m.records) {
      s.texts.push_back(r.text);
      s.labels.push_back(classes.index(r.label));
    }
    row.accuracy = evaluate_text(art, s);
  }
  finish_echo(lc);
  write_text_file(out_dir(c) / "metrics.csv", format_metrics_csv(std::span(&row, 1), lc.echo));
  std::cout << row.experiment << " accuracy " << format_double(row.accuracy) << "\n";
  return 0;
}

Dataset load_pair(LoadedConfig& lc, const std::string& train, const std::string& test) {
  if (train.empty() || test.empty()) throw std::invalid_argument("--train and --test are required");
  Dataset ds = load_dataset(train, test, lc.cfg.image.side);
  if (ds.test.size() == 0) throw ManifestError("test split is empty");
  set_classes(lc, ds.classes.size());
  finish_echo(lc);
  return ds;
}

int cmd_eval_experiment(const Common& c, const std::string& kind, const std::string& train, const std::string& test,
                        const std::vector<std::uint64_t>& seeds) {
  const auto k = parse_experiment_kind(kind);
  auto lc = load_config(c, "eval --experiment " + kind + " " + train + " " + test);
  const Dataset ds = load_pair(lc, train, test);
  const auto list = seed_list(seeds, c.seed);
  const auto rows = run_experiment(k, ds, lc.cfg, list);
  write_text_file(out_dir(c) / "metrics.csv", format_metrics_csv(rows, lc.echo));
  for (const auto& r : rows) std::cout << r.experiment << " seed " << r.seed << " accuracy " << format_double(r.accuracy) << "\n";
  return 0;
}

int cmd_compare(const Common& c, const std::string& train, const std::string& test,
                const std::vector<std::uint64_t>& seeds) {
  auto lc = load_config(c, "compare " + train + " " + test);
  const Dataset ds = load_pair(lc, train, test);
  const auto list = seed_list(seeds, c.seed);
  const auto table = compare_strategies(ds, lc.cfg, list);
  const fs::path path = out_dir(c) / "compare.csv";
  write_text_file(path, format_comparison_csv(table, lc.echo));
  for (const auto& cell : table.cells)
    std::cout << cell.strategy << " " << cell.seed << " " << format_accuracy(cell.accuracy) << "\n";
  return 0;
}

int cmd_sweep(const Common& c, const std::string& train, const std::string& test,
              const std::vector<std::size_t>& lengths, const std::vector<std::uint64_t>& seeds) {
  auto lc = load_config(c, "sweep " + train + " " + test);
  const Dataset ds = load_pair(lc, train, test);
  const auto list = seed_list(seeds, c.seed);
  const auto rows = sweep_embedding(ds, lc.cfg, lengths, list);
  const fs::path path = out_dir(c) / "sweep.csv";
  write_text_file(path, format_sweep_csv(rows, lc.echo));
  for (const auto& r : rows)
    std::cout << "L=" << r.feature_length << " seed " << r.seed << " text-only "
              << (r.text_only ? format_double(*r.text_only) : "-") << " fused "
              << (r.fused ? format_double(*r.fused) : "-") << " " << r.status << "\n";
  return 0;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ManifestError*>(&e)) return "manifest";
  if (dynamic_cast<const codec::PngError*>(&e)) return "png";
  if (dynamic_cast<const nn::CheckpointError*>(&e)) return "checkpoint";
  if (dynamic_cast<const nn::ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const nn::NonFiniteGradient*>(&e)) return "numeric";
  if (dynamic_cast<const nn::TrainingError*>(&e)) return "training";
  if (dynamic_cast<const RegionViolation*>(&e)) return "fuse";
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return "io";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid";
  return "runtime";
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\t') ch = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-in-image multimodal fusion: train, fuse, evaluate"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "random seed")->capture_default_str();
    sub->add_option("--config", common.config_path, "key = value configuration file");
    sub->add_option("--out", common.out, "output directory");
  };

  std::string kind = "xor", manifest, train, test, ckpt, vocab, experiment;
  double ambiguity = 0.3;
  std::size_t train_n = 50, test_n = 20, side = 64;
  std::optional<std::size_t> min_freq;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> lengths{30, 75, 150, 300};

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic paired dataset");
  add_common(gen);
  gen->add_option("--kind", kind, "xor or soft")->capture_default_str();
  gen->add_option("--ambiguity", ambiguity, "per-modality ambiguity rate (soft)")->capture_default_str();
  gen->add_option("--train-per-class", train_n)->capture_default_str();
  gen->add_option("--test-per-class", test_n)->capture_default_str();
  gen->add_option("--side", side, "image side in pixels")->capture_default_str();

  auto* bv = app.add_subcommand("build-vocab", "build a vocabulary from a manifest's texts");
  add_common(bv);
  bv->add_option("--manifest", manifest)->required();
  bv->add_option("--min-frequency", min_freq);

  auto* tt = app.add_subcommand("train-text", "train the text CNN");
  add_common(tt);
  tt->add_option("--train", train)->required();
  tt->add_option("--test", test);
  tt->add_option("--vocab", vocab, "vocabulary file from build-vocab");

  auto* ex = app.add_subcommand("extract", "write text feature vectors as CSV");
  add_common(ex);
  ex->add_option("--ckpt", ckpt)->required();
  ex->add_option("--manifest", manifest)->required();

  auto* fu = app.add_subcommand("fuse", "paint text features onto images");
  add_common(fu);
  fu->add_option("--ckpt", ckpt, "text checkpoint")->required();
  fu->add_option("--train", train)->required();
  fu->add_option("--test", test);

  auto* ti = app.add_subcommand("train-image", "train the image CNN on plain or fused images");
  add_common(ti);
  ti->add_option("--train", train)->required();
  ti->add_option("--test", test);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint, or run a whole experiment");
  add_common(ev);
  ev->add_option("--ckpt", ckpt);
  ev->add_option("--manifest", manifest);
  ev->add_option("--experiment", experiment, "text-only, image-only, fused or compare");
  ev->add_option("--train", train);
  ev->add_option("--test", test);
  ev->add_option("--seeds", seeds)->delimiter(',');

  auto* cm = app.add_subcommand("compare", "five-strategy comparison table");
  add_common(cm);
  cm->add_option("--train", train)->required();
  cm->add_option("--test", test)->required();
  cm->add_option("--seeds", seeds)->delimiter(',');

  auto* sw = app.add_subcommand("sweep", "text feature length sweep");
  add_common(sw);
  sw->add_option("--train", train)->required();
  sw->add_option("--test", test)->required();
  sw->add_option("--lengths", lengths)->delimiter(',')->capture_default_str();
  sw->add_option("--seeds", seeds)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error\tusage\t" << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (*gen) return cmd_gen_synth(common, kind, ambiguity, train_n, test_n, side);
    if (*bv) return cmd_build_vocab(common, manifest, min_freq);
    if (*tt) return cmd_train_text(common, train, test, vocab);
    if (*ex) return cmd_extract(common, ckpt, manifest);
    if (*fu) return cmd_fuse(common, ckpt, train, test);
    if (*ti) return cmd_train_image(common, train, test);
    if (*ev) {
      if (!experiment.empty()) return cmd_eval_experiment(common, experiment, train, test, seeds);
      if (ckpt.empty() || manifest.empty()) throw std::invalid_argument("eval needs --ckpt and --manifest, or --experiment");
      return cmd_eval_checkpoint(common, ckpt, manifest);
    }
    if (*cm) return cmd_compare(common, train, test, seeds);
    if (*sw) return cmd_sweep(common, train, test, lengths, seeds);
  } catch (const std::exception& e) {
    std::cerr << "error\t" << error_kind(e) << "\t" << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
