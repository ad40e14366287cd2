// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Thresholds and tolerances are pinned below.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "faros/faros.hpp"
#include "../gen.hpp"
#include "../oracles.hpp"
#include "../scenario.hpp"

using namespace faros;
namespace fs = std::filesystem;

namespace {

// criterion 1
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 10.0;
// criterion 2
constexpr double kLawSeconds = 5.0;
constexpr int kProjectionUlps = 1;  // 0.2 * 3 is 0.6000000000000001 in binary
// criterion 3
constexpr double kKrumSeconds = 30.0;
// criterion 5
constexpr double kCleanAccFloor = 0.90;
constexpr double kCleanAccGap = 0.01;
constexpr double kCleanSeconds = 60.0;
// criterion 6
constexpr double kPotencyAsr = 0.80;
// criterion 7
constexpr double kDefendedAsr = 0.10;
constexpr double kDefendedAccGap = 0.02;
// criterion 9
constexpr double kScopeCaptureRate = 0.50;
constexpr double kFarosCleanRate = 0.95;
// criterion 10
constexpr double kRecallFloor = 0.90;
constexpr double kPrecisionFloor = 0.80;
constexpr int kDetectionAfterRound = 20;
constexpr int kDetectionAcceptCount = 8;
// criterion 12
constexpr double kOverheadRatio = 1.5;

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool ulp_close(double a, double b, int ulps) {
  for (int i = 0; i < ulps; ++i) a = std::nextafter(a, b);
  return a == b;
}

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const double cls = oracle::worst_class_grad_error(101, 100);
  const double cos = oracle::worst_cosine_grad_error(102, 100);
  const double s = seconds_since(t0);
  report(1, cls <= kGradTol && cos <= kGradTol && s < kGradSeconds,
         fmt("worst rel err: loss %.3g, cosine term %.3g; %.2f s", cls, cos, s));
}

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> broken;
  auto check = [&](bool ok, const char* what) {
    if (!ok) broken.emplace_back(what);
  };
  for (double phi : {1.0, 1.5, 2.0, 3.0, 10.0})
    check(differential_scale(ParamVector{-1, 0, 1}, phi) == ParamVector{-1, 0, 1}, "scaling fixpoints");
  check(differential_scale(ParamVector{0.5, -0.5}, 2.0) == ParamVector{0.25, -0.25}, "scaling 0.5");
  check(adaptive_phi(0.0, 3.0, 50.0) == 3.0, "phi(0) = phi_max");
  gen::Source g(201);
  for (int i = 0; i < 10000; ++i) {
    const double d = std::exp(g.uniform(-12, 1));
    const double p = adaptive_phi(d, 3.0, 50.0);
    check(p > 1.0 || d * 50.0 > 36.0, "phi range lower");
    check(p <= 3.0, "phi range upper");
    const auto a = g.vec(7), b = g.vec(7);
    const double c = cosine_distance(a, b);
    check(c >= 0.0 && c <= 2.0, "cosine range");
    check(std::abs(cosine_distance(a, a)) <= 1e-15, "cosine self-zero");
  }
  const auto p = pgd_project(ParamVector{3, 4}, ParamVector{0, 0}, 1.0);
  check(ulp_close(p[0], 0.6, kProjectionUlps) && ulp_close(p[1], 0.8, kProjectionUlps),
        "projection 3-4-5");
  const auto k = multi_krum(std::vector<ClientUpdate>{{0, {0}, 1}, {1, {0}, 1}, {2, {0}, 1}, {3, {10}, 1}}, 0, 2);
  check(k.accepted == std::vector<int>{0, 1} && k.aggregated_delta == ParamVector{0}, "krum outlier");
  const double s = seconds_since(t0);
  std::sort(broken.begin(), broken.end());
  broken.erase(std::unique(broken.begin(), broken.end()), broken.end());
  std::string detail = fmt("%.2f s", s);
  for (const auto& b : broken) detail += "; broken: " + b;
  report(2, broken.empty() && s < kLawSeconds, detail);
}

void criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  gen::Source g(301);
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const int k = g.integer(1, 8);
    const int f = g.integer(0, std::max(0, (k - 1) / 2));
    const int select = g.integer(1, k);
    const auto ups = g.updates(k, g.integer(1, 6));
    const auto got = multi_krum(ups, f, select);
    const auto want = oracle::brute_force_krum(ups, f, select);
    if (got.diagnostics.client_ids != want.ids || got.diagnostics.scores != want.scores ||
        got.accepted != want.selected)
      ++mismatches;
  }
  const double s = seconds_since(t0);
  report(3, mismatches == 0 && s < kKrumSeconds, fmt("%d/200 mismatches; %.2f s", mismatches, s));
}

void criterion4() {
  gen::Source g(401);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const int k = g.integer(2, 20);
    const auto ups = g.updates(k, g.integer(1, 200));
    DefenseConfig c;
    c.core_size = g.integer(1, k);
    c.accept_count = k;
    if (faros_aggregate(ups, c).aggregated_delta != fedavg(ups).aggregated_delta) ++mismatches;
  }
  report(4, mismatches == 0, fmt("%d/100 sets differ", mismatches));
}

struct Clean {
  double fedavg_acc = 0.0;
  double faros_acc = 0.0;
};

Clean criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  auto c = scenario::clean();
  c.defense.kind = DefenseKind::kFedAvg;
  const double fa = summarize(run_simulation(c)).final_acc;
  c.defense.kind = DefenseKind::kFaros;
  const double fr = summarize(run_simulation(c)).final_acc;
  const double s = seconds_since(t0);
  report(5, fa >= kCleanAccFloor && fr >= kCleanAccFloor && std::abs(fa - fr) <= kCleanAccGap &&
                s <= kCleanSeconds,
         fmt("clean ACC fedavg %.4f, faros %.4f; %.2f s", fa, fr, s));
  return {fa, fr};
}

void criterion6() {
  double worst = 1.0;
  std::string per;
  for (auto seed : kSeeds) {
    auto c = scenario::standard(seed);
    c.defense.kind = DefenseKind::kFedAvg;
    const double asr = summarize(run_simulation(c)).final_asr;
    worst = std::min(worst, asr);
    per += fmt(" %.3f", asr);
  }
  report(6, worst >= kPotencyAsr, "fedavg final ASR per seed:" + per);
}

void criterion7(const Clean& clean) {
  bool ok = true;
  std::string per;
  for (auto seed : kSeeds) {
    const auto s = summarize(run_simulation(scenario::standard(seed)));
    ok = ok && s.final_asr <= kDefendedAsr && std::abs(s.final_acc - clean.faros_acc) <= kDefendedAccGap;
    per += fmt(" (%.3f, %.3f)", s.final_acc, s.final_asr);
  }
  report(7, ok, fmt("clean ACC %.4f; faros (ACC, ASR) per seed:", clean.faros_acc) + per);
}

void criterion8() {
  double d_sum[2] = {0, 0}, phi_sum[2] = {0, 0};
  int n[2] = {0, 0};
  const double alphas[2] = {0.9, 0.1};
  for (auto seed : kSeeds) {
    for (int a = 0; a < 2; ++a) {
      auto c = scenario::standard(seed);
      c.attack.kind = AttackKind::kConstrainAndScale;
      c.attack.alpha = alphas[a];
      for (const auto& r : run_simulation(c)) {
        d_sum[a] += r.d_t;
        phi_sum[a] += r.phi_t;
        ++n[a];
      }
    }
  }
  const double d9 = d_sum[0] / n[0], d1 = d_sum[1] / n[1];
  const double p9 = phi_sum[0] / n[0], p1 = phi_sum[1] / n[1];
  report(8, d9 < d1 && p9 > p1,
         fmt("mean D_t %.6g (alpha 0.9) vs %.6g (alpha 0.1); mean phi_t %.6g vs %.6g", d9, d1, p9, p1));
}

void criterion9() {
  DefenseConfig c;
  c.core_size = 4;
  c.accept_count = 6;
  c.phi_static = 2.0;
  int scope_hits = 0, faros_clean = 0;
  auto has_malicious = [](const std::vector<int>& ids) {
    return std::any_of(ids.begin(), ids.end(), [](int id) { return id < oracle::kBridgeMalicious; });
  };
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto ups = oracle::bridge_round(seed);
    scope_hits += has_malicious(scope_static_aggregate(ups, c).accepted);
    faros_clean += !has_malicious(faros_aggregate(ups, c).accepted);
  }
  report(9, scope_hits >= kScopeCaptureRate * 100 && faros_clean >= kFarosCleanRate * 100,
         fmt("scope_static accepts a malicious id in %d/100; faros accepts none in %d/100", scope_hits,
             faros_clean));
}

void criterion10() {
  double p = 0, r = 0;
  int np = 0, nr = 0;
  double p_default = 0, r_default = 0;
  for (auto seed : kSeeds) {
    auto c = scenario::standard(seed);
    c.attack.kind = AttackKind::kEdgeCasePgd;
    c.attack.pgd_radius = 2.0;
    c.defense.accept_count = kDetectionAcceptCount;
    const auto s = summarize(run_simulation(c), kDetectionAfterRound);
    if (s.mean_detection_precision) p += *s.mean_detection_precision, ++np;
    if (s.mean_detection_recall) r += *s.mean_detection_recall, ++nr;
    c.defense.accept_count = 0;
    const auto d = summarize(run_simulation(c), kDetectionAfterRound);
    p_default += d.mean_detection_precision.value_or(0.0) / std::size(kSeeds);
    r_default += d.mean_detection_recall.value_or(0.0) / std::size(kSeeds);
  }
  const double prec = np ? p / np : 0.0, rec = nr ? r / nr : 0.0;
  report(10, rec >= kRecallFloor && prec >= kPrecisionFloor,
         fmt("accept_count %d: recall %.3f, precision %.3f (default accept_count: %.3f, %.3f)",
             kDetectionAcceptCount, rec, prec, r_default, p_default));
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + FAROS_CLI_PATH + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion11() {
  const fs::path dir = fs::temp_directory_path() / "faros_acceptance_compare";
  fs::remove_all(dir);
  const std::string base = std::string("compare --config '") + FAROS_CONFIG_DIR +
                           "/compare.cfg' --set threads=4 --out '";
  const int a = run_cli(base + (dir / "a").string() + "'");
  const int b = run_cli(base + (dir / "b").string() + "'");
  const std::string ca = slurp(dir / "a" / "compare.csv"), cb = slurp(dir / "b" / "compare.csv");
  const bool ok = a == 0 && b == 0 && !ca.empty() && ca == cb;
  const auto rows = std::count(ca.begin(), ca.end(), '\n') - 1;
  fs::remove_all(dir);
  report(11, ok, fmt("exit codes %d/%d; %ld rows; files %s", a, b, static_cast<long>(rows),
                     ca == cb ? "identical" : "differ"));
}

void criterion12() {
  auto timed = [](DefenseKind kind) {
    std::vector<double> t;
    for (int i = 0; i < 5; ++i) {
      auto c = scenario::standard(1);
      c.defense.kind = kind;
      const auto t0 = std::chrono::steady_clock::now();
      run_simulation(c);
      t.push_back(seconds_since(t0));
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
  };
  const double fa = timed(DefenseKind::kFedAvg), fr = timed(DefenseKind::kFaros);
  report(12, fr <= kOverheadRatio * fa,
         fmt("median full run: fedavg %.3f s, faros %.3f s, ratio %.3f", fa, fr, fr / fa));
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  const Clean clean = criterion5();
  criterion6();
  criterion7(clean);
  criterion8();
  criterion9();
  criterion10();
  criterion11();
  criterion12();
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
