#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "support.hpp"
#include "tif/nn/checkpoint.hpp"
#include "tif/text/text_model.hpp"
#include "tif/text/vocabulary.hpp"

using namespace tif;
using text::Vocabulary;

TEST(Vocabulary, OrderingRule) {
  const std::vector<std::string> corpus{"bike bike helmet"};
  const auto v = Vocabulary::build(corpus, 1);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.id("<pad>"), 0u);
  EXPECT_EQ(v.id("<oov>"), 1u);
  EXPECT_EQ(v.id("bike"), 2u);
  EXPECT_EQ(v.id("helmet"), 3u);
}

TEST(Vocabulary, MinFrequencyExcludesRareTokens) {
  const std::vector<std::string> corpus{"bike bike helmet"};
  const auto v = Vocabulary::build(corpus, 2);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.id("helmet"), Vocabulary::kOov);
}

TEST(Vocabulary, TiesBreakLexicographically) {
  const std::vector<std::string> corpus{"zeta alpha", "mid alpha zeta mid"};
  const auto v = Vocabulary::build(corpus, 1);
  EXPECT_EQ(v.id("alpha"), 2u);
  EXPECT_EQ(v.id("mid"), 3u);
  EXPECT_EQ(v.id("zeta"), 4u);
}

TEST(Vocabulary, DeterministicAndSerialisable) {
  const std::vector<std::string> corpus{"The red ladder", "a red bike, a blue bike"};
  const auto a = Vocabulary::build(corpus, 1), b = Vocabulary::build(corpus, 1);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_EQ(Vocabulary::deserialize(a.serialize()), a);
  EXPECT_THROW(Vocabulary::deserialize("garbage"), std::exception);
}

TEST(Vocabulary, EmptyCorpusRejected) {
  const std::vector<std::string> none;
  EXPECT_THROW(Vocabulary::build(none, 1), std::invalid_argument);
}

TEST(Tokenize, PadsLowercasesAndMapsOov) {
  const std::vector<std::string> corpus{"bike bike helmet"};
  const auto v = Vocabulary::build(corpus, 1);
  EXPECT_EQ(v.encode("Bike helmet", 4), (std::vector<std::size_t>{2, 3, 0, 0}));
  EXPECT_EQ(v.encode("ladder", 2), (std::vector<std::size_t>{1, 0}));
}

TEST(Tokenize, TruncatesToSequenceLength) {
  const std::vector<std::string> corpus{"w"};
  const auto v = Vocabulary::build(corpus, 1);
  std::string long_text;
  for (int i = 0; i < 150; ++i) long_text += (i < 100 ? "w " : "zz ");
  const auto ids = v.encode(long_text, 100);
  ASSERT_EQ(ids.size(), 100u);
  for (std::size_t id : ids) EXPECT_EQ(id, 2u);
}

TEST(Tokenize, SplitsOnPunctuationKeepsUtf8) {
  EXPECT_EQ(text::split_words("Caf\xC3\xA9, bike-helmet!"),
            (std::vector<std::string>{"caf\xC3\xA9", "bike", "helmet"}));
}

TEST(TextModel, DefaultShapes) {
  const text::TextModelConfig cfg;
  EXPECT_EQ(cfg.concat_width(), 384u);
  EXPECT_EQ(cfg.feature_length(), 300u);
  text::TextModelConfig other_grid = cfg;
  other_grid.grid_h = 2;
  other_grid.grid_w = 5;
  EXPECT_EQ(other_grid.feature_length(), 30u);
  other_grid.grid_h = 10;
  other_grid.grid_w = 25;
  EXPECT_EQ(other_grid.feature_length(), 750u);

  const auto shapes = nn::infer_shapes(text::TextCnn(cfg, 20, 1).plan(), {100});
  EXPECT_EQ(shapes.back(), (nn::Shape{2}));
}

TEST(TextModel, ConfigRoundTripAndValidation) {
  text::TextModelConfig cfg;
  cfg.seq_len = 17;
  cfg.filter_sizes = {2, 6};
  const auto back = text::TextModelConfig::from_kv(cfg.to_kv());
  EXPECT_EQ(back.seq_len, 17u);
  EXPECT_EQ(back.filter_sizes, (std::vector<std::size_t>{2, 6}));
  cfg.filter_sizes = {20};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

namespace {

text::TextModelConfig small_config() {
  text::TextModelConfig c;
  c.seq_len = 12;
  c.embed_width = 8;
  c.filters_per_size = 4;
  c.grid_h = 2;
  c.grid_w = 2;
  c.classes = 2;
  return c;
}

/// 20 samples; class is decided by which keyword appears.
void keyword_corpus(std::vector<std::string>& texts, std::vector<std::size_t>& labels) {
  const char* filler[] = {"the", "new", "with", "for", "and", "great"};
  nn::Rng rng(99);
  for (int i = 0; i < 20; ++i) {
    std::string t;
    for (int w = 0; w < 4; ++w) t += std::string(filler[rng.below(6)]) + " ";
    t += i % 2 ? "ladder" : "helmet";
    texts.push_back(t);
    labels.push_back(static_cast<std::size_t>(i % 2));
  }
}

}  // namespace

TEST(TextModel, LearnsSeparableToyCorpus) {
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
  keyword_corpus(texts, labels);
  const auto r = text::train_text_model(small_config(), texts, labels, {60, 0.01, 3, true});
  ASSERT_FALSE(r.trace.empty());
  EXPECT_LE(r.trace.size(), 60u);
  EXPECT_EQ(r.trace.back().accuracy, 1.0);
  EXPECT_LT(r.trace.back().mean_loss, r.trace.front().mean_loss);
}

TEST(TextModel, ZeroEpochsLeavesInitialisation) {
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
  keyword_corpus(texts, labels);
  const auto r = text::train_text_model(small_config(), texts, labels, {0, 0.01, 5, true});
  EXPECT_TRUE(r.trace.empty());
  const text::TextCnn fresh(small_config(), r.artifact.vocab.size(), 5);
  const auto a = r.artifact.model.parameters(), b = fresh.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
}

TEST(TextModel, SameSeedGivesIdenticalCheckpointBytes) {
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
  keyword_corpus(texts, labels);
  const auto a = text::train_text_model(small_config(), texts, labels, {5, 0.01, 8, false});
  const auto b = text::train_text_model(small_config(), texts, labels, {5, 0.01, 8, false});
  EXPECT_EQ(nn::serialize(a.artifact.to_checkpoint()), nn::serialize(b.artifact.to_checkpoint()));
  const auto c = text::train_text_model(small_config(), texts, labels, {5, 0.01, 9, false});
  EXPECT_NE(nn::serialize(a.artifact.to_checkpoint()), nn::serialize(c.artifact.to_checkpoint()));
}

TEST(TextModel, FeaturesShapeDeterminismAndNonNegativity) {
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
  keyword_corpus(texts, labels);
  const auto r = text::train_text_model(small_config(), texts, labels, {3, 0.01, 2, false});
  const std::vector<std::string> probe{"great helmet", "great helmet", "ladder ladder"};
  const auto f = r.artifact.extract_features(probe);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].size(), 12u);
  EXPECT_EQ(f[0], f[1]);
  for (double v : f[2]) EXPECT_GE(v, 0.0);
}

TEST(TextModel, CheckpointRoundTripPreservesPredictions) {
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
  keyword_corpus(texts, labels);
  const auto r = text::train_text_model(small_config(), texts, labels, {4, 0.01, 4, false});
  const auto ck = nn::deserialize_checkpoint(nn::serialize(r.artifact.to_checkpoint()));
  const auto back = text::TextArtifact::from_checkpoint(ck);
  EXPECT_EQ(back.vocab, r.artifact.vocab);
  ASSERT_TRUE(back.norm.has_value());
  EXPECT_EQ(back.norm->min, r.artifact.norm->min);
  EXPECT_EQ(back.extract_features(texts), r.artifact.extract_features(texts));
}

TEST(TextModel, VocabularyMismatchRejected) {
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
  keyword_corpus(texts, labels);
  auto r = text::train_text_model(small_config(), texts, labels, {1, 0.01, 4, false});
  const std::vector<std::string> other{"completely different words here"};
  r.artifact.vocab = Vocabulary::build(other, 1);
  EXPECT_THROW(r.artifact.extract_features(texts), std::invalid_argument);
}

TEST(NormStats, Examples) {
  const std::vector<text::FeatureVector> two{{0, 2}, {1, 1}};
  const auto s = text::compute_norm_stats(two);
  EXPECT_EQ(s.min, (std::vector<double>{0, 1}));
  EXPECT_EQ(s.max, (std::vector<double>{1, 2}));
  const std::vector<text::FeatureVector> one{{3, -4}};
  const auto d = text::compute_norm_stats(one);
  EXPECT_EQ(d.min, d.max);
  EXPECT_EQ(text::NormStats::deserialize(s.serialize()).max, s.max);
  const std::vector<text::FeatureVector> none;
  EXPECT_THROW(text::compute_norm_stats(none), std::invalid_argument);
}
