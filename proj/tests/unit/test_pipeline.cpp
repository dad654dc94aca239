#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "support.hpp"
#include "tif/codec/png.hpp"
#include "tif/pipeline/experiments.hpp"
#include "tif/pipeline/reports.hpp"
#include "tif/pipeline/synthetic.hpp"

using namespace tif;
using namespace tif::pipeline;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Small 4-class XOR data at a 16-pixel side.
SyntheticSpec tiny_xor(std::size_t per_class) {
  auto s = SyntheticSpec::xor_spec(3);
  s.train_per_class = per_class;
  s.test_per_class = 2;
  s.side = 16;
  return s;
}

/// Fast settings with a 2x5 grid (L = 30) that fits a 16-pixel image at P = 3.
ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.text.seq_len = 12;
  c.text.embed_width = 6;
  c.text.filters_per_size = 3;
  c.text.grid_h = 2;
  c.text.grid_w = 5;
  c.image.side = 16;
  c.image.hidden = 8;
  c.epochs = 2;
  c.early_epochs = 2;
  return c;
}

text::TextArtifact tiny_text_artifact(const Dataset& ds) { return run_text(ds, tiny_config(), 1).artifact; }

struct ProcessResult {
  int exit_code;
  std::string err;
};

ProcessResult run_cli(const std::string& args, const fs::path& err_file) {
  const std::string cmd = std::string(TIF_CLI_PATH) + " " + args + " 2>" + err_file.string() + " >/dev/null";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err_file)};
}

}  // namespace

TEST(Manifest, EscapingRoundTrip) {
  DatasetManifest m;
  m.records.push_back({"a", "x.png", "tab\there\nnewline \\ slash"});
  m.records.push_back({"b", "y.png", ""});
  const auto back = parse_manifest(format_manifest(m), ".");
  EXPECT_EQ(back.records, m.records);
}

TEST(Manifest, ParseErrors) {
  EXPECT_THROW(parse_manifest("a\tb\n", "."), ManifestError);
  EXPECT_THROW(parse_manifest("a\tb\tc\td\n", "."), ManifestError);
  EXPECT_THROW(parse_manifest("\tb\tc\n", "."), ManifestError);
  EXPECT_THROW(parse_manifest("a\t\tc\n", "."), ManifestError);
  const auto ok = parse_manifest("a\tb\tc\r\n\n", "/base");
  ASSERT_EQ(ok.records.size(), 1u);
  EXPECT_EQ(ok.records[0].text, "c");
  EXPECT_EQ(ok.resolve(ok.records[0]), fs::path("/base/b"));
  EXPECT_THROW(read_manifest("/nonexistent/manifest.tsv"), ManifestError);
}

TEST(Manifest, ClassTableIsSortedAndUnique) {
  const ClassTable t({"zeta", "alpha", "mid", "alpha"});
  EXPECT_EQ(t.names(), (std::vector<std::string>{"alpha", "mid", "zeta"}));
  EXPECT_EQ(t.index("mid"), 1u);
  EXPECT_THROW(t.index("other"), ManifestError);
}

TEST(Manifest, ValidationNamesTheProblem) {
  tif::testing::TempDir dir("manifest");
  codec::write_png(codec::RasterImage(4, 4), (dir.path() / "ok.png").string());
  std::ofstream(dir.path() / "fake.png") << "plain text";
  const ClassTable classes({"a"});
  auto make = [&](std::string label, std::string path) {
    DatasetManifest m;
    m.base_dir = dir.path();
    m.records.push_back({std::move(label), std::move(path), "t"});
    return m;
  };
  EXPECT_NO_THROW(validate_manifest(make("a", "ok.png"), classes, "train"));
  try {
    validate_manifest(make("a", "missing.png"), classes, "test");
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.png"), std::string::npos);
  }
  EXPECT_THROW(validate_manifest(make("a", "fake.png"), classes, "test"), ManifestError);
  EXPECT_THROW(validate_manifest(make("b", "ok.png"), classes, "test"), ManifestError);
  EXPECT_THROW(require_disjoint(make("a", "ok.png"), make("a", "./ok.png")), ManifestError);
  EXPECT_NO_THROW(require_disjoint(make("a", "ok.png"), make("a", "fake.png")));
}

TEST(Synthetic, SameSeedGivesIdenticalFiles) {
  tif::testing::TempDir a("synth_a"), b("synth_b");
  const auto spec = tiny_xor(2);
  const auto wa = generate_synthetic(spec, a.path());
  const auto wb = generate_synthetic(spec, b.path());
  EXPECT_EQ(slurp(wa.train_manifest), slurp(wb.train_manifest));
  EXPECT_EQ(slurp(wa.test_manifest), slurp(wb.test_manifest));
  std::size_t pngs = 0;
  for (const auto& e : fs::directory_iterator(a.path() / "images")) {
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / "images" / e.path().filename())) << e.path();
    ++pngs;
  }
  EXPECT_EQ(pngs, 16u);
  auto other = spec;
  other.seed = 4;
  EXPECT_NE(generate_synthetic_samples(other).train[0].text, generate_synthetic_samples(spec).train[0].text);
}

// Bayes-optimal accuracy from counts: for each observed cue value, the best
// guess is its most frequent label.
TEST(Synthetic, XorModalitiesAreIndividuallyUninformative) {
  auto spec = SyntheticSpec::xor_spec(5);
  spec.train_per_class = 50;
  spec.test_per_class = 0;
  spec.side = 32;
  const auto ds = generate_synthetic_samples(spec);
  std::map<std::string, std::map<std::size_t, std::size_t>> by_text, by_colour, by_both;
  for (const auto& s : ds.train) {
    const bool alpha = s.text.find("alpha") != std::string::npos;
    ASSERT_NE(alpha, s.text.find("beta") != std::string::npos) << s.text;
    const auto centre = s.image.pixel(16, 16);
    const std::string colour = centre[0] > centre[2] ? "red" : "blue";
    const std::string t = alpha ? "alpha" : "beta";
    ++by_text[t][s.label];
    ++by_colour[colour][s.label];
    ++by_both[t + "/" + colour][s.label];
  }
  auto bayes = [&](const auto& table) {
    std::size_t best = 0;
    for (const auto& [cue, counts] : table) {
      std::size_t m = 0;
      for (const auto& [label, n] : counts) m = std::max(m, n);
      best += m;
    }
    return static_cast<double>(best) / static_cast<double>(ds.train.size());
  };
  EXPECT_DOUBLE_EQ(bayes(by_text), 0.5);
  EXPECT_DOUBLE_EQ(bayes(by_colour), 0.5);
  EXPECT_DOUBLE_EQ(bayes(by_both), 1.0);
}

TEST(Synthetic, AmbiguityRates) {
  auto spec = SyntheticSpec::soft_spec(0.0, 2);
  for (const auto& s : generate_synthetic_samples(spec).train) {
    EXPECT_FALSE(s.text_ambiguous || s.image_ambiguous);
    EXPECT_NE(s.text.find(spec.classes[s.label].keyword), std::string::npos);
  }
  spec = SyntheticSpec::soft_spec(0.3, 2);
  spec.train_per_class = 250;
  std::size_t text_amb = 0, image_amb = 0;
  const auto ds = generate_synthetic_samples(spec);
  for (const auto& s : ds.train) {
    text_amb += s.text_ambiguous;
    image_amb += s.image_ambiguous;
    EXPECT_FALSE(s.text_ambiguous && s.image_ambiguous);
    if (s.text_ambiguous) {
      EXPECT_EQ(s.text.find(spec.classes[s.label].keyword), std::string::npos);
    }
  }
  EXPECT_NEAR(static_cast<double>(text_amb) / 1000.0, 0.3, 0.05);
  EXPECT_NEAR(static_cast<double>(image_amb) / 1000.0, 0.3, 0.05);
  spec.text_ambiguity = 0.8;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(Fuse, DecodedRegionEqualsQuantizedFeatures) {
  tif::testing::TempDir src("fuse_src"), out("fuse_out");
  const auto spec = tiny_xor(3);
  const auto written = generate_synthetic(spec, src.path());
  const Dataset ds = load_dataset(written.train_manifest, written.test_manifest, 16);
  const auto art = tiny_text_artifact(ds);
  const auto geom = tiny_config().geometry();
  const auto manifest = read_manifest(written.test_manifest);
  const auto rep = fuse_dataset(manifest, art, geom, 16, out.path(), "test", 1);
  EXPECT_TRUE(rep.failures.empty());
  ASSERT_EQ(rep.written, manifest.records.size());
  const auto fused = read_manifest(rep.manifest);
  for (std::size_t i = 0; i < fused.records.size(); ++i) {
    const auto img = codec::read_png(fused.resolve(fused.records[i]).string());
    const std::string t[1] = {manifest.records[i].text};
    EXPECT_EQ(codec::decode_superpixels(img, geom), codec::quantize(art.extract_features(t)[0], *art.norm)) << i;
    const auto base = codec::resize_bilinear(codec::read_png(manifest.resolve(manifest.records[i]).string()), 16, 16);
    EXPECT_TRUE(only_region_changed(base, img, geom));
  }
}

TEST(Fuse, FootprintIndependentOfTextLength) {
  auto spec = tiny_xor(3);
  const Dataset ds = to_dataset(generate_synthetic_samples(spec), spec);
  const auto art = tiny_text_artifact(ds);
  const auto geom = tiny_config().geometry();
  std::string long_text;
  for (int i = 0; i < 500; ++i) long_text += i % 2 ? "alpha " : "great ";
  Split split;
  split.texts = {"alpha new with the for", long_text, "alpha new with the for"};
  const codec::RasterImage base(16, 16, codec::Rgb{128, 128, 128});
  split.images = {base, base, base};
  split.labels = {0, 0, 0};
  const auto fused = fuse_images(art, split, geom, 16);
  for (const auto& img : fused) {
    EXPECT_EQ(img.width(), 16u);
    EXPECT_TRUE(only_region_changed(base, img, geom));
  }
  EXPECT_EQ(fused[0], fused[2]);
}

TEST(Fuse, TooManyFailuresAbort) {
  tif::testing::TempDir src("fuse_fail"), out("fuse_fail_out");
  auto spec = tiny_xor(3);
  const auto written = generate_synthetic(spec, src.path());
  const Dataset ds = load_dataset(written.train_manifest, written.test_manifest, 16);
  const auto art = tiny_text_artifact(ds);
  auto manifest = read_manifest(written.train_manifest);
  manifest.records.resize(10);
  auto one_bad = manifest;
  one_bad.records[3].image_path = "images/missing.png";
  const auto rep = fuse_dataset(one_bad, art, tiny_config().geometry(), 16, out.path(), "train", 1);
  EXPECT_EQ(rep.written, 9u);
  ASSERT_EQ(rep.failures.size(), 1u);
  EXPECT_NE(rep.failures[0].find("missing.png"), std::string::npos);
  auto two_bad = one_bad;
  two_bad.records[7].image_path = "images/missing2.png";
  EXPECT_THROW(fuse_dataset(two_bad, art, tiny_config().geometry(), 16, out.path(), "train", 1), std::runtime_error);
}

TEST(Experiments, EmptySplitsRejected) {
  auto spec = tiny_xor(2);
  Dataset ds = to_dataset(generate_synthetic_samples(spec), spec);
  const std::uint64_t seeds[] = {1};
  Dataset no_test = ds;
  no_test.test = {};
  EXPECT_THROW(run_experiment(ExperimentKind::TextOnly, no_test, tiny_config(), seeds), std::invalid_argument);
  EXPECT_THROW(compare_strategies(no_test, tiny_config(), seeds), std::invalid_argument);
  const std::size_t lengths[] = {30};
  EXPECT_THROW(sweep_embedding(no_test, tiny_config(), lengths, seeds), std::invalid_argument);
  Dataset no_train = ds;
  no_train.train = {};
  EXPECT_THROW(run_experiment(ExperimentKind::ImageOnly, no_train, tiny_config(), seeds), std::invalid_argument);
  EXPECT_THROW(parse_experiment_kind("both"), std::invalid_argument);
}

TEST(Experiments, SweepRowsAndUnfitLengths) {
  auto spec = tiny_xor(2);
  const Dataset ds = to_dataset(generate_synthetic_samples(spec), spec);
  const std::uint64_t one_seed[] = {1};
  const std::size_t one_length[] = {30};
  const auto rows = sweep_embedding(ds, tiny_config(), one_length, one_seed);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_EQ(rows[0].grid_h * rows[0].grid_w * 3, 30u);
  EXPECT_TRUE(rows[0].text_only && rows[0].fused);

  const std::size_t bad[] = {10, 750};
  const auto unfit = sweep_embedding(ds, tiny_config(), bad, one_seed);
  ASSERT_EQ(unfit.size(), 2u);
  EXPECT_NE(unfit[0].status.find("multiple of 3"), std::string::npos);
  EXPECT_NE(unfit[1].status.find("exceeds"), std::string::npos);
  EXPECT_FALSE(unfit[1].fused.has_value());
  const auto csv = format_sweep_csv(unfit, {});
  EXPECT_NE(csv.find("L,seed,grid_h,grid_w,superpixel,text_only_accuracy,fused_accuracy,status\n"), std::string::npos);
}

TEST(Experiments, ComparisonTableShape) {
  auto spec = tiny_xor(2);
  const Dataset ds = to_dataset(generate_synthetic_samples(spec), spec);
  const std::uint64_t seeds[] = {1, 2};
  const auto table = compare_strategies(ds, tiny_config(), seeds);
  ASSERT_EQ(table.cells.size(), 15u);
  for (const auto& name : strategy_names()) {
    for (const char* seed : {"1", "2", "mean"}) EXPECT_TRUE(table.get(name, seed).has_value()) << name << seed;
    EXPECT_DOUBLE_EQ(*table.get(name, "mean"), (*table.get(name, "1") + *table.get(name, "2")) / 2);
  }
  const auto csv = format_comparison_csv(table, {});
  EXPECT_NE(csv.find("\nstrategy,seed,accuracy\n"), std::string::npos);
  EXPECT_EQ(format_accuracy(std::nullopt), "failed");
}

TEST(Config, UnknownKeysAndRoundTrip) {
  ExperimentConfig c = tiny_config();
  c.late_alpha = {0.25, 0.75};
  const auto back = ExperimentConfig::from_kv(c.to_kv());
  EXPECT_EQ(back.to_kv().serialize(), c.to_kv().serialize());
  EXPECT_THROW(ExperimentConfig::from_kv(KvConfig::parse("text.grid = 3\n")), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_kv(KvConfig::parse("train.epochs = 61\n")), ConfigError);
}

TEST(Cli, ErrorLinesAreMachineReadable) {
  tif::testing::TempDir dir("cli");
  const auto err = dir.path() / "stderr.txt";
  auto r = run_cli("train-text --train " + (dir.path() / "none.tsv").string() + " --out " + dir.path().string(), err);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.err.rfind("error\tmanifest\t", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  r = run_cli("train-text --bogus", err);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(r.err.rfind("error\tusage\t", 0), 0u) << r.err;
  std::ofstream(dir.path() / "bad.cfg") << "text.nonsense = 1\n";
  r = run_cli("train-text --train " + (dir.path() / "none.tsv").string() + " --config " +
                  (dir.path() / "bad.cfg").string() + " --out " + dir.path().string(),
              err);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.err.rfind("error\tconfig\t", 0), 0u) << r.err;
}
