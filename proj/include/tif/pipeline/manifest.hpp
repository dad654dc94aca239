#pragma once

// Tab-separated dataset manifests: `label<TAB>image_path<TAB>text` per line,
// no header, UTF-8. In the text field a backslash escapes tab (\t), newline
// (\n), carriage return (\r) and itself (\\). Relative image paths resolve
// against the manifest's directory.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tif::pipeline {

namespace fs = std::filesystem;

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestRecord {
  std::string label;
  std::string image_path;
  std::string text;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  fs::path base_dir;  // directory relative image paths are resolved against

  fs::path resolve(const ManifestRecord& r) const {
    const fs::path p(r.image_path);
    return p.is_absolute() ? p : base_dir / p;
  }
};

inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case '\\': out += '\\'; break;
      default:
        out += '\\';
        out += s[i];
    }
  }
  return out;
}

inline DatasetManifest parse_manifest(std::string_view content, fs::path base_dir) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  std::size_t line_no = 0, start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
      throw ManifestError("manifest line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    }
    ManifestRecord r{std::string(line.substr(0, t1)), std::string(line.substr(t1 + 1, t2 - t1 - 1)),
                     unescape_field(line.substr(t2 + 1))};
    if (r.label.empty()) throw ManifestError("manifest line " + std::to_string(line_no) + ": empty label");
    if (r.image_path.empty()) throw ManifestError("manifest line " + std::to_string(line_no) + ": empty image path");
    m.records.push_back(std::move(r));
  }
  return m;
}

inline DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot read manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

inline std::string format_manifest(const DatasetManifest& m) {
  std::string out;
  for (const auto& r : m.records) out += r.label + "\t" + r.image_path + "\t" + escape_field(r.text) + "\n";
  return out;
}

inline void write_manifest(const DatasetManifest& m, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ManifestError("cannot write manifest " + path.string());
  out << format_manifest(m);
}

/// Class names in sorted order; index = position.
class ClassTable {
 public:
  ClassTable() = default;
  explicit ClassTable(std::vector<std::string> names) : names_(std::move(names)) {
    std::sort(names_.begin(), names_.end());
    names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
  }

  static ClassTable from(const DatasetManifest& m) {
    std::vector<std::string> names;
    for (const auto& r : m.records) names.push_back(r.label);
    return ClassTable(std::move(names));
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::size_t index(const std::string& label) const {
    const auto it = std::lower_bound(names_.begin(), names_.end(), label);
    if (it == names_.end() || *it != label) throw ManifestError("unknown label '" + label + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  bool contains(const std::string& label) const { return std::binary_search(names_.begin(), names_.end(), label); }

 private:
  std::vector<std::string> names_;
};

/// Every record's label is in `classes` and its image is a readable PNG file.
inline void validate_manifest(const DatasetManifest& m, const ClassTable& classes, const std::string& split) {
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    const std::string where = split + " record " + std::to_string(i + 1);
    if (!classes.contains(r.label)) throw ManifestError(where + ": unknown label '" + r.label + "'");
    const fs::path p = m.resolve(r);
    std::ifstream in(p, std::ios::binary);
    unsigned char sig[8] = {};
    if (!in || !in.read(reinterpret_cast<char*>(sig), 8)) {
      throw ManifestError(where + ": image " + p.string() + " is missing or unreadable");
    }
    static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (!std::equal(sig, sig + 8, kPngSig)) throw ManifestError(where + ": " + p.string() + " is not a PNG");
  }
}

/// Train and test must not share a record (identified by resolved image path).
inline void require_disjoint(const DatasetManifest& train, const DatasetManifest& test) {
  std::set<std::string> seen;
  for (const auto& r : train.records) seen.insert(fs::weakly_canonical(train.resolve(r)).string());
  for (const auto& r : test.records) {
    if (seen.count(fs::weakly_canonical(test.resolve(r)).string())) {
      throw ManifestError("record " + r.image_path + " appears in both train and test splits");
    }
  }
}

}  // namespace tif::pipeline
