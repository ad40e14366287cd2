// faros: run federated backdoor simulations from flat config files.
//
//   faros run --config base.cfg --set defense.kind=faros --out out/
//   faros sweep --config base.cfg --axis data.dirichlet_q=0.1,0.4,1.0
//   faros compare --config base.cfg
//   faros validate-config --config base.cfg
//
// Exit codes: 0 ok, 1 runtime error, 2 configuration error.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "faros/faros.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string format = "both";
  std::string axis;
  bool timing = false;
};

std::filesystem::path resolve_out_dir(const Options& o) {
  if (!o.out_dir.empty()) return o.out_dir;
  if (const char* env = std::getenv("FAROS_OUT_DIR"); env && *env) return env;
  return "out";
}

faros::SimConfig load(const Options& o) {
  faros::SimConfig cfg = faros::load_config(o.config_path);
  for (const auto& s : o.overrides) faros::apply_override(cfg, s);
  if (o.seed) cfg.master_seed = *o.seed;
  return cfg;
}

void print_warnings(const std::vector<std::string>& ws) {
  for (const auto& w : ws) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int cmd_run(const Options& o) {
  const faros::SimConfig cfg = load(o);
  const auto format = faros::parse_result_format(o.format);
  const auto out = faros::run_experiment(cfg, resolve_out_dir(o), format, o.timing);
  print_warnings(out.warnings);
  std::printf("final_acc=%s final_asr=%s\n", faros::format_real(out.summary.final_acc).c_str(),
              faros::format_real(out.summary.final_asr).c_str());
  return kExitOk;
}

int cmd_sweep(const Options& o) {
  const faros::SimConfig cfg = load(o);
  const auto format = faros::parse_result_format(o.format);
  if (o.axis.empty()) throw faros::ConfigError("sweep needs --axis key=v1,v2,...", "axis");
  const auto axis = faros::parse_sweep_axis(o.axis);
  const auto res = faros::run_sweep(cfg, axis, resolve_out_dir(o), format, o.timing);
  for (const auto& r : res.rows)
    std::printf("%s=%s final_acc=%s final_asr=%s\n", axis.key.c_str(), r.axis_value.c_str(),
                faros::format_real(r.final_acc).c_str(), faros::format_real(r.final_asr).c_str());
  bool config_failure = false;
  for (const auto& f : res.failures) {
    std::fprintf(stderr, "error: %s=%s: %s\n", axis.key.c_str(), f.axis_value.c_str(),
                 f.message.c_str());
    config_failure |= f.config_error;
  }
  if (res.failures.empty()) return kExitOk;
  return config_failure ? kExitConfig : kExitRuntime;
}

int cmd_compare(const Options& o) {
  const faros::SimConfig cfg = load(o);
  const auto rows = faros::run_compare(cfg, resolve_out_dir(o));
  for (const auto& r : rows)
    std::printf("%s %s final_acc=%s final_asr=%s\n", r.attack.c_str(), r.defense.c_str(),
                faros::format_real(r.final_acc).c_str(), faros::format_real(r.final_asr).c_str());
  return kExitOk;
}

int cmd_validate(const Options& o) {
  faros::SimConfig cfg = load(o);
  print_warnings(cfg.resolve());
  std::printf("ok: %s\n", o.config_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated backdoor attack and defense simulator"};
  app.require_subcommand(1);
  Options opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "Config file (key = value lines)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--set", opts.overrides, "Override, key=value (repeatable; last wins)");
    sub->add_option("--seed", opts.seed, "Master seed override");
  };
  auto add_output = [&](CLI::App* sub) {
    sub->add_option("--out", opts.out_dir, "Output directory (default: $FAROS_OUT_DIR or ./out)");
    sub->add_option("--format", opts.format, "Result files: csv, json or both")
        ->check(CLI::IsMember({"csv", "json", "both"}));
    sub->add_flag("--timing", opts.timing, "Write measured wall_ms instead of 0");
  };

  auto* run = app.add_subcommand("run", "Run one simulation");
  add_common(run);
  add_output(run);
  auto* sweep = app.add_subcommand("sweep", "One simulation per value of a config key");
  add_common(sweep);
  add_output(sweep);
  sweep->add_option("--axis", opts.axis, "key=v1,v2,...")->required();
  auto* compare = app.add_subcommand("compare", "Attack x defense matrix");
  add_common(compare);
  compare->add_option("--out", opts.out_dir, "Output directory (default: $FAROS_OUT_DIR or ./out)");
  auto* validate = app.add_subcommand("validate-config", "Parse and check a config");
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(opts);
    if (sweep->parsed()) return cmd_sweep(opts);
    if (compare->parsed()) return cmd_compare(opts);
    return cmd_validate(opts);
  } catch (const faros::ConfigError& e) {
    if (e.key().empty())
      std::fprintf(stderr, "config error: %s\n", e.what());
    else
      std::fprintf(stderr, "config error [%s]: %s\n", e.key().c_str(), e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
