#pragma once

// CSV output. Every file opens with `#` comment lines echoing the config file
// verbatim and the effective configuration, so each row can be reproduced
// from the file alone together with its seed column.

#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tif/pipeline/experiments.hpp"
#include "tif/util/kv_config.hpp"

namespace tif::pipeline {

struct ConfigEcho {
  std::string source;    // config file path, or empty for built-in defaults
  std::string verbatim;  // file content as read
  KvConfig effective;
  std::string command;   // subcommand and its data arguments
};

inline std::string comment_block(const ConfigEcho& echo) {
  std::ostringstream out;
  if (!echo.command.empty()) out << "# command: " << echo.command << "\n";
  out << "# config-file: " << (echo.source.empty() ? "(defaults)" : echo.source) << "\n";
  std::istringstream lines(echo.verbatim);
  for (std::string line; std::getline(lines, line);) out << "#| " << line << "\n";
  out << "# effective:\n";
  for (const auto& [k, v] : echo.effective.entries()) out << "#   " << k << " = " << v << "\n";
  return out.str();
}

inline std::string format_accuracy(const std::optional<double>& a) { return a ? format_double(*a) : "failed"; }

inline std::string format_metrics_csv(std::span<const MetricsRow> rows, const ConfigEcho& echo) {
  std::string out = comment_block(echo);
  out += "experiment,seed,split,accuracy\n";
  for (const auto& r : rows)
    out += r.experiment + "," + std::to_string(r.seed) + "," + r.split + "," + format_double(r.accuracy) + "\n";
  return out;
}

inline std::string format_comparison_csv(const ComparisonTable& table, const ConfigEcho& echo) {
  std::string out = comment_block(echo);
  out += "# early: multinomial logistic regression on [text features | image CNN hidden layer]\n";
  out += "# late: logarithmic opinion pool of the text CNN and image CNN posteriors\n";
  out += "# proposed: image CNN trained on images carrying the painted text features\n";
  for (const auto& c : table.cells)
    if (!c.accuracy) out += "# error: " + c.strategy + " seed " + c.seed + ": " + c.error + "\n";
  out += "strategy,seed,accuracy\n";
  for (const auto& c : table.cells) out += c.strategy + "," + c.seed + "," + format_accuracy(c.accuracy) + "\n";
  return out;
}

inline std::string format_sweep_csv(std::span<const SweepRow> rows, const ConfigEcho& echo) {
  std::string out = comment_block(echo);
  out += "L,seed,grid_h,grid_w,superpixel,text_only_accuracy,fused_accuracy,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& ch : status)
      if (ch == ',' || ch == '\n') ch = ';';
    out += std::to_string(r.feature_length) + "," + std::to_string(r.seed) + "," + std::to_string(r.grid_h) + "," +
           std::to_string(r.grid_w) + "," + std::to_string(r.superpixel) + "," +
           (r.text_only ? format_double(*r.text_only) : "") + "," + (r.fused ? format_double(*r.fused) : "") + "," +
           status + "\n";
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(content.data(), static_cast<std::streamsize>(content.size()))) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

}  // namespace tif::pipeline
