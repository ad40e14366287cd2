#pragma once

// Multi-run drivers behind the command-line tool: single run, one-axis sweep
// and the attack x defense comparison matrix.

#include <algorithm>
#include <cctype>
#include <exception>
#include <filesystem>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "faros/config.hpp"
#include "faros/results.hpp"
#include "faros/sim.hpp"

namespace faros {

struct RunOutput {
  std::vector<RoundRecord> records;
  RunSummary summary;
  std::vector<std::string> warnings;
};

inline RunOutput run_experiment(const SimConfig& cfg, const std::filesystem::path& out_dir,
                                ResultFormat format, bool with_timing = false) {
  Simulation sim(cfg);
  RunOutput out;
  out.warnings = sim.warnings();
  out.records = sim.run();
  out.summary = summarize(out.records);
  write_results(sim.config(), out.records, out_dir, format, with_timing);
  return out;
}

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

/// Parses `key=v1,v2,...`. The key must be a config key.
inline SweepAxis parse_sweep_axis(std::string_view spec) {
  const auto eq = spec.find('=');
  if (eq == std::string_view::npos) throw ConfigError("sweep axis must be key=v1,v2,...", "axis");
  SweepAxis axis;
  axis.key = std::string(detail::trim(spec.substr(0, eq)));
  find_config_key(axis.key);
  for (auto v : detail::split_list(spec.substr(eq + 1))) axis.values.emplace_back(v);
  if (axis.values.empty()) throw ConfigError("sweep axis has no values", axis.key);
  return axis;
}

struct SweepRow {
  std::string axis_value;
  double final_acc = 0.0;
  double final_asr = 0.0;
};

struct SweepFailure {
  std::string axis_value;
  std::string message;
  bool config_error = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepFailure> failures;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "axis_value,final_acc,final_asr\n";
  for (const auto& r : rows)
    out += r.axis_value + ',' + format_real(r.final_acc) + ',' + format_real(r.final_asr) + '\n';
  return out;
}

/// Directory name for one sweep value: index plus the value with path-hostile
/// characters replaced.
inline std::string sweep_dir_name(std::size_t index, std::string_view value) {
  std::string clean;
  for (char c : value)
    clean += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
  return "sweep_" + std::to_string(index) + "_" + clean;
}

/// Value i runs with master_seed + i. A failing value is recorded and the
/// sweep moves on; sweep.csv is rewritten after every completed value.
inline SweepResult run_sweep(const SimConfig& base, const SweepAxis& axis,
                             const std::filesystem::path& out_dir, ResultFormat format,
                             bool with_timing = false) {
  SweepResult result;
  write_file_atomic(out_dir / "sweep.csv", sweep_csv(result.rows));
  for (std::size_t i = 0; i < axis.values.size(); ++i) {
    const std::string& value = axis.values[i];
    try {
      SimConfig cfg = base;
      apply_override(cfg, axis.key + "=" + value);
      cfg.master_seed = base.master_seed + i;
      const RunOutput run =
          run_experiment(cfg, out_dir / sweep_dir_name(i, value), format, with_timing);
      result.rows.push_back({value, run.summary.final_acc, run.summary.final_asr});
      write_file_atomic(out_dir / "sweep.csv", sweep_csv(result.rows));
    } catch (const ConfigError& e) {
      result.failures.push_back({value, e.what(), true});
    } catch (const std::exception& e) {
      result.failures.push_back({value, e.what(), false});
    }
  }
  return result;
}

struct CompareRow {
  std::string attack;
  std::string defense;
  double final_acc = 0.0;
  double final_asr = 0.0;
};

inline std::string compare_csv(std::vector<CompareRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const CompareRow& a, const CompareRow& b) {
    return std::tie(a.attack, a.defense) < std::tie(b.attack, b.defense);
  });
  std::string out = "attack,defense,final_acc,final_asr\n";
  for (const auto& r : rows)
    out += r.attack + ',' + r.defense + ',' + format_real(r.final_acc) + ',' +
           format_real(r.final_asr) + '\n';
  return out;
}

/// Every (attack, defense) pair of cfg.compare_attacks x cfg.compare_defenses
/// under the same master seed. Writes compare.csv under `out_dir`.
inline std::vector<CompareRow> run_compare(const SimConfig& base,
                                           const std::filesystem::path& out_dir) {
  if (base.compare_attacks.empty() || base.compare_defenses.empty())
    throw ConfigError("compare needs at least one attack and one defense", "compare.attacks");
  std::vector<CompareRow> rows;
  for (AttackKind a : base.compare_attacks) {
    for (DefenseKind d : base.compare_defenses) {
      SimConfig cfg = base;
      cfg.attack.kind = a;
      cfg.defense.kind = d;
      const auto records = run_simulation(cfg);
      const RunSummary s = summarize(records);
      rows.push_back({std::string(to_string(a)), std::string(to_string(d)), s.final_acc, s.final_asr});
    }
  }
  write_file_atomic(out_dir / "compare.csv", compare_csv(rows));
  std::sort(rows.begin(), rows.end(), [](const CompareRow& x, const CompareRow& y) {
    return std::tie(x.attack, x.defense) < std::tie(y.attack, y.defense);
  });
  return rows;
}

}  // namespace faros
