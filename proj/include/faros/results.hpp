#pragma once

// Result files for a simulation run.
//
// CSV: one row per evaluated round under a fixed header; id lists are
// semicolon-separated, reals use 9 significant digits.
// JSON: {"config": {...}, "records": [...], "summary": {...}}; reals rounded
// to 9 significant digits, NaN written as null.
//
// wall_ms is written as 0 unless timing is requested, so files stay a pure
// function of the configuration.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "faros/config.hpp"
#include "faros/errors.hpp"
#include "faros/sim.hpp"

namespace faros {

inline constexpr std::string_view kResultsCsvHeader =
    "round,acc,asr,d_t,phi_t,accepted,malicious_selected,tp,fp,fn,wall_ms";

enum class ResultFormat { kCsv, kJson, kBoth };

inline ResultFormat parse_result_format(std::string_view s) {
  if (s == "csv") return ResultFormat::kCsv;
  if (s == "json") return ResultFormat::kJson;
  if (s == "both") return ResultFormat::kBoth;
  throw ConfigError("unknown output format '" + std::string(s) + "'", "format");
}

struct RunSummary {
  double final_acc = std::numeric_limits<double>::quiet_NaN();
  double final_asr = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> mean_detection_precision;
  std::optional<double> mean_detection_recall;
};

/// Per-round precision tp/(tp+fp) and recall tp/(tp+fn), averaged over the
/// records (with round > after_round) where each is defined.
inline RunSummary summarize(std::span<const RoundRecord> records, int after_round = 0) {
  RunSummary s;
  if (!records.empty()) {
    s.final_acc = records.back().acc;
    s.final_asr = records.back().asr;
  }
  double p = 0.0, r = 0.0;
  int np = 0, nr = 0;
  for (const auto& rec : records) {
    if (rec.round <= after_round) continue;
    if (rec.tp + rec.fp > 0) {
      p += static_cast<double>(rec.tp) / (rec.tp + rec.fp);
      ++np;
    }
    if (rec.tp + rec.fn > 0) {
      r += static_cast<double>(rec.tp) / (rec.tp + rec.fn);
      ++nr;
    }
  }
  if (np) s.mean_detection_precision = p / np;
  if (nr) s.mean_detection_recall = r / nr;
  return s;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// `v` rounded to 9 significant digits.
inline double round9(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format_real(v).c_str(), nullptr);
}

inline std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(ids[i]);
  }
  return out;
}

inline std::string results_csv(std::span<const RoundRecord> records, bool with_timing = false) {
  std::string out(kResultsCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.round) + ',' + format_real(r.acc) + ',' + format_real(r.asr) + ',' +
           format_real(r.d_t) + ',' + format_real(r.phi_t) + ',' + join_ids(r.accepted) + ',' +
           join_ids(r.malicious_selected) + ',' + std::to_string(r.tp) + ',' +
           std::to_string(r.fp) + ',' + std::to_string(r.fn) + ',' +
           format_real(with_timing ? r.wall_ms : 0.0) + '\n';
  }
  return out;
}

namespace detail {

inline nlohmann::json json_real(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round9(v);
}

inline nlohmann::json json_opt(const std::optional<double>& v) {
  return v ? json_real(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json results_json(const SimConfig& cfg, std::span<const RoundRecord> records,
                                   bool with_timing = false) {
  using nlohmann::json;
  json doc;
  json config = json::object();
  for (const auto& [k, v] : config_echo(cfg)) config[k] = v;
  doc["config"] = std::move(config);
  json recs = json::array();
  for (const auto& r : records) {
    recs.push_back({{"round", r.round},
                    {"acc", detail::json_real(r.acc)},
                    {"asr", detail::json_real(r.asr)},
                    {"d_t", detail::json_real(r.d_t)},
                    {"phi_t", detail::json_real(r.phi_t)},
                    {"accepted", r.accepted},
                    {"malicious_selected", r.malicious_selected},
                    {"tp", r.tp},
                    {"fp", r.fp},
                    {"fn", r.fn},
                    {"fallback", r.fallback},
                    {"wall_ms", detail::json_real(with_timing ? r.wall_ms : 0.0)}});
  }
  doc["records"] = std::move(recs);
  const RunSummary s = summarize(records);
  doc["summary"] = {{"final_acc", detail::json_real(s.final_acc)},
                    {"final_asr", detail::json_real(s.final_asr)},
                    {"mean_detection_precision", detail::json_opt(s.mean_detection_precision)},
                    {"mean_detection_recall", detail::json_opt(s.mean_detection_recall)}};
  return doc;
}

/// Writes `content` to a sibling temp file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move results into '" + path.string() + "': " + ec.message());
  }
}

/// Writes results.csv and/or results.json under `dir`.
inline void write_results(const SimConfig& cfg, std::span<const RoundRecord> records,
                          const std::filesystem::path& dir, ResultFormat format,
                          bool with_timing = false) {
  if (format != ResultFormat::kJson)
    write_file_atomic(dir / "results.csv", results_csv(records, with_timing));
  if (format != ResultFormat::kCsv)
    write_file_atomic(dir / "results.json", results_json(cfg, records, with_timing).dump(2) + "\n");
}

}  // namespace faros
