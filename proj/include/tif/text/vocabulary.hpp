#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tif::text {

/// Lowercased word tokens. ASCII whitespace and ASCII punctuation separate
/// tokens; bytes >= 0x80 (UTF-8 multibyte sequences) are word characters.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                      (c >= 'A' && c <= 'Z') || c == '_';
    if (word) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kOov = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kOovToken = "<oov>";

  Vocabulary() : tokens_{std::string(kPadToken), std::string(kOovToken)} { reindex(); }

  /// Tokens with frequency >= min_frequency, ordered by frequency descending
  /// then lexicographically.
  static Vocabulary build(std::span<const std::string> corpus, std::size_t min_frequency = 1) {
    if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
    std::map<std::string, std::size_t> counts;
    for (const auto& doc : corpus)
      for (auto& tok : split_words(doc)) ++counts[tok];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary v;
    v.min_frequency_ = min_frequency;
    for (auto& [tok, n] : ranked)
      if (n >= min_frequency) v.tokens_.push_back(tok);
    v.reindex();
    return v;
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t min_frequency() const noexcept { return min_frequency_; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  std::size_t id(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kOov : it->second;
  }

  /// First `seq_len` tokens as ids, right-padded with kPad.
  std::vector<std::size_t> encode(std::string_view text, std::size_t seq_len) const {
    std::vector<std::size_t> ids(seq_len, kPad);
    const auto words = split_words(text);
    for (std::size_t i = 0; i < std::min(seq_len, words.size()); ++i) ids[i] = id(words[i]);
    return ids;
  }

  /// One token per line in id order, preceded by a `min_frequency N` line.
  std::string serialize() const {
    std::string out = "min_frequency " + std::to_string(min_frequency_) + "\n";
    for (const auto& t : tokens_) out += t + "\n";
    return out;
  }

  static Vocabulary deserialize(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    Vocabulary v;
    v.tokens_.clear();
    if (!std::getline(in, line) || line.rfind("min_frequency ", 0) != 0) {
      throw std::invalid_argument("vocabulary: missing min_frequency header");
    }
    v.min_frequency_ = std::stoull(line.substr(14));
    while (std::getline(in, line)) v.tokens_.push_back(line);
    if (v.tokens_.size() < 2 || v.tokens_[kPad] != kPadToken || v.tokens_[kOov] != kOovToken) {
      throw std::invalid_argument("vocabulary: reserved tokens missing");
    }
    v.reindex();
    if (v.index_.size() != v.tokens_.size()) throw std::invalid_argument("vocabulary: duplicate token");
    return v;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.min_frequency_ == b.min_frequency_;
  }

 private:
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t min_frequency_ = 1;
};

}  // namespace tif::text
