#pragma once

// Round orchestration: client sampling, honest/malicious local training,
// server-side defense, global update and metric collection.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "faros/attacks.hpp"
#include "faros/data.hpp"
#include "faros/defenses.hpp"
#include "faros/errors.hpp"
#include "faros/linalg.hpp"
#include "faros/model.hpp"
#include "faros/rng.hpp"

namespace faros {

struct DataConfig {
  int num_classes = 10;
  int feature_dim = 16;
  int n_per_class = 400;
  int test_per_class = 100;
  double class_sep = 6.0;
  double dirichlet_q = 0.4;
  int edge_aux_size = 200;  // attacker-held samples of the edge-case source class
  TriggerSpec trigger{{0, 1, 2}, {12.0, 12.0, 12.0}, 0};
};

struct SimConfig {
  int total_clients = 200;
  int clients_per_round = 20;
  /// Clients 0..malicious_count-1 form the malicious roster.
  int malicious_count = 0;
  /// When > 0, every round samples exactly this many roster members plus
  /// k - force_c_per_round honest clients.
  int force_c_per_round = 0;
  int rounds = 100;
  int eval_every = 1;
  std::uint64_t master_seed = 1;
  int threads = 1;

  ModelSpec model{16, 10, 0};
  TrainSpec train{2, 16, 0.05, 0};
  DataConfig data;
  AttackConfig attack;
  double attack_boost = 0.0;  // 0 means boost = clients_per_round
  DefenseConfig defense;

  std::vector<AttackKind> compare_attacks{AttackKind::kNone, AttackKind::kModelReplacement};
  std::vector<DefenseKind> compare_defenses{DefenseKind::kFedAvg, DefenseKind::kFaros};

  /// Copies data dimensions into the model spec and resolves defaults.
  /// Throws ConfigError on inconsistent settings; returns warnings.
  std::vector<std::string> resolve() {
    std::vector<std::string> warnings;
    model.input_dim = data.feature_dim;
    model.num_classes = data.num_classes;
    model.validate();
    train.validate();
    defense.validate();
    if (total_clients < 1) throw ConfigError("total_clients must be >= 1", "total_clients");
    if (clients_per_round < 1 || clients_per_round > total_clients)
      throw ConfigError("clients_per_round must be in [1, total_clients]", "clients_per_round");
    if (malicious_count < 0 || malicious_count > total_clients)
      throw ConfigError("malicious_count must be in [0, total_clients]", "malicious_count");
    if (rounds < 1) throw ConfigError("rounds must be >= 1", "rounds");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1", "eval_every");
    if (threads < 1) throw ConfigError("threads must be >= 1", "threads");
    if (data.test_per_class < 1) throw ConfigError("test_per_class must be >= 1", "data.test_per_class");
    if (data.edge_aux_size < 0) throw ConfigError("edge_aux_size must be >= 0", "data.edge_aux_size");
    if (data.trigger.target_label < 0 || data.trigger.target_label >= data.num_classes)
      throw ConfigError("target_label outside [0, num_classes)", "data.target_label");
    data.trigger.validate(static_cast<std::size_t>(data.feature_dim));
    if (attack.edge_source_label < 0 || attack.edge_source_label >= data.num_classes)
      throw ConfigError("edge_source_label outside [0, num_classes)", "attack.edge_source_label");
    if (force_c_per_round < 0 || force_c_per_round > malicious_count ||
        force_c_per_round > clients_per_round ||
        clients_per_round - force_c_per_round > total_clients - malicious_count)
      throw ConfigError("force_c_per_round incompatible with roster and sample sizes",
                        "force_c_per_round");
    attack.trigger = data.trigger;
    attack.boost = attack_boost > 0.0 ? attack_boost : static_cast<double>(clients_per_round);
    attack.validate();
    const int k = clients_per_round;
    if (defense.resolved_core_size(k) > k)
      throw ConfigError("core_size exceeds clients_per_round", "defense.core_size");
    if (defense.resolved_accept_count(k) > k)
      throw ConfigError("accept_count exceeds clients_per_round", "defense.accept_count");
    if (2 * force_c_per_round >= k && force_c_per_round > 0)
      warnings.push_back("forced malicious count is not a minority of each round");
    if (malicious_count > 0 && 2 * malicious_count >= total_clients)
      warnings.push_back("malicious roster is not a minority of the population");
    return warnings;
  }
};

struct RoundRecord {
  int round = 0;
  double acc = std::numeric_limits<double>::quiet_NaN();
  double asr = std::numeric_limits<double>::quiet_NaN();
  double d_t = std::numeric_limits<double>::quiet_NaN();
  double phi_t = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> accepted;
  std::vector<int> malicious_selected;
  int tp = 0;  // malicious and rejected
  int fp = 0;  // honest and rejected
  int fn = 0;  // malicious and accepted
  double wall_ms = 0.0;
  bool fallback = false;

  /// Comparison excluding wall-clock time.
  bool same_outcome(const RoundRecord& o) const {
    auto eq = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return round == o.round && eq(acc, o.acc) && eq(asr, o.asr) && eq(d_t, o.d_t) &&
           eq(phi_t, o.phi_t) && accepted == o.accepted &&
           malicious_selected == o.malicious_selected && tp == o.tp && fp == o.fp &&
           fn == o.fn && fallback == o.fallback;
  }
};

/// k distinct ids from [0, total), ascending, from a stream keyed by
/// (master_seed, round).
inline std::vector<int> sample_clients(int total, int k, int round, std::uint64_t master_seed) {
  if (k < 1 || k > total)
    throw ConfigError("cannot sample " + std::to_string(k) + " of " + std::to_string(total) +
                          " clients",
                      "clients_per_round");
  std::vector<int> ids(total);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng = make_rng(master_seed, {stream::kSampling, static_cast<std::uint64_t>(round)});
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, total - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Sampling that pins exactly `forced` roster members (ids below `roster`)
/// into every round.
inline std::vector<int> sample_clients_forced(int total, int k, int roster, int forced, int round,
                                              std::uint64_t master_seed) {
  if (forced > roster || forced > k || k - forced > total - roster)
    throw ConfigError("forced sampling impossible", "force_c_per_round");
  const std::uint64_t r = static_cast<std::uint64_t>(round);
  std::vector<int> out;
  if (forced > 0) {
    for (int id : sample_clients(roster, forced, round, derive_seed(master_seed, {r, 1})))
      out.push_back(id);
  }
  if (k - forced > 0) {
    for (int id : sample_clients(total - roster, k - forced, round, derive_seed(master_seed, {r, 2})))
      out.push_back(id + roster);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct SimState {
  ParamVector global;
  ParamVector last_update;  // eta * aggregated delta of the previous round
  int round = 0;            // rounds completed
};

/// Holds the generated population (datasets, partition) for one SimConfig.
class Simulation {
 public:
  explicit Simulation(SimConfig cfg) : cfg_(std::move(cfg)) {
    warnings_ = cfg_.resolve();
    const std::uint64_t seed = cfg_.master_seed;
    const auto& d = cfg_.data;
    const auto centers = blob_centers(d.num_classes, d.feature_dim, d.class_sep, seed);
    train_ = sample_blobs(centers, d.n_per_class, derive_seed(seed, {stream::kTrainData}));
    test_ = sample_blobs(centers, d.test_per_class, derive_seed(seed, {stream::kTestData}));
    if (d.edge_aux_size > 0) {
      std::vector<ParamVector> source{centers[cfg_.attack.edge_source_label]};
      edge_data_ = sample_blobs(source, d.edge_aux_size, derive_seed(seed, {stream::kEdgeData}));
      for (auto& e : edge_data_) e.label = cfg_.attack.edge_source_label;
    }
    const auto labels = labels_of(train_);
    partition_ = dirichlet_partition(labels, cfg_.total_clients, d.dirichlet_q,
                                     derive_seed(seed, {stream::kPartition}));
    client_data_.reserve(cfg_.total_clients);
    for (const auto& a : partition_.assignments) client_data_.push_back(subset(train_, a));
  }

  const SimConfig& config() const { return cfg_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const Dataset& train_set() const { return train_; }
  const Dataset& test_set() const { return test_; }
  const Partition& partition() const { return partition_; }
  const Dataset& client_data(int id) const { return client_data_.at(id); }
  bool is_malicious(int id) const { return id < cfg_.malicious_count; }

  SimState initial_state() const {
    SimState s;
    s.global = init_params(cfg_.model, derive_seed(cfg_.master_seed, {stream::kInit}));
    s.last_update.assign(s.global.size(), 0.0);
    return s;
  }

  std::vector<int> sample(int round) const {
    if (cfg_.force_c_per_round > 0)
      return sample_clients_forced(cfg_.total_clients, cfg_.clients_per_round,
                                   cfg_.malicious_count, cfg_.force_c_per_round, round,
                                   cfg_.master_seed);
    return sample_clients(cfg_.total_clients, cfg_.clients_per_round, round, cfg_.master_seed);
  }

  /// Local models of the sampled clients, computed on up to cfg.threads
  /// threads. Output order follows `ids` regardless of thread count.
  std::vector<ParamVector> train_clients(const SimState& state, std::span<const int> ids,
                                         int round) const {
    std::vector<ParamVector> out(ids.size());
    std::vector<std::exception_ptr> errors(ids.size());
    auto work = [&](std::size_t i) {
      try {
        const int id = ids[i];
        TrainSpec ts = cfg_.train;
        ts.seed = derive_seed(cfg_.master_seed, {stream::kClientTrain,
                                                 static_cast<std::uint64_t>(round),
                                                 static_cast<std::uint64_t>(id)});
        if (is_malicious(id)) {
          AttackContext ctx{edge_data_, state.last_update};
          out[i] = malicious_local_train(state.global, cfg_.model, client_data_[id], ts,
                                         cfg_.attack, ctx);
        } else {
          out[i] = local_train(state.global, cfg_.model, client_data_[id], ts);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    const int threads = std::min<int>(cfg_.threads, static_cast<int>(ids.size()));
    if (threads <= 1) {
      for (std::size_t i = 0; i < ids.size(); ++i) work(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < ids.size(); i = next++) work(i);
        });
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return out;
  }

  /// Advances `state` by one round (round number state.round + 1).
  RoundRecord run_round(SimState& state) const {
    const auto t0 = std::chrono::steady_clock::now();
    const int round = state.round + 1;
    const auto ids = sample(round);
    const auto local = train_clients(state, ids, round);

    std::vector<ClientUpdate> updates;
    updates.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ClientUpdate u;
      u.client_id = ids[i];
      u.num_samples = static_cast<int>(client_data_[ids[i]].size());
      u.delta.resize(state.global.size());
      for (std::size_t j = 0; j < u.delta.size(); ++j) u.delta[j] = local[i][j] - state.global[j];
      updates.push_back(std::move(u));
    }
    const DefenseOutcome outcome = aggregate(
        updates, cfg_.defense,
        derive_seed(cfg_.master_seed, {stream::kDpNoise, static_cast<std::uint64_t>(round)}));

    const double eta = cfg_.defense.global_lr;
    for (std::size_t j = 0; j < state.global.size(); ++j) {
      state.last_update[j] = eta * outcome.aggregated_delta[j];
      state.global[j] += state.last_update[j];
    }
    state.round = round;

    RoundRecord rec;
    rec.round = round;
    rec.d_t = outcome.diagnostics.d_t;
    rec.phi_t = outcome.diagnostics.phi_t;
    rec.accepted = outcome.accepted;
    rec.fallback = outcome.diagnostics.fallback_to_fedavg;
    for (int id : ids) {
      const bool accepted = std::binary_search(rec.accepted.begin(), rec.accepted.end(), id);
      if (is_malicious(id)) {
        rec.malicious_selected.push_back(id);
        (accepted ? rec.fn : rec.tp) += 1;
      } else if (!accepted) {
        rec.fp += 1;
      }
    }
    if (round % cfg_.eval_every == 0) {
      rec.acc = evaluate_acc(state.global, cfg_.model, test_);
      rec.asr = evaluate_asr(state.global, cfg_.model, test_, cfg_.data.trigger);
    }
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }

  /// All rounds from a fresh model. Only evaluated rounds (round divisible by
  /// eval_every) are returned.
  std::vector<RoundRecord> run() const {
    SimState state = initial_state();
    std::vector<RoundRecord> records;
    for (int r = 0; r < cfg_.rounds; ++r) {
      RoundRecord rec = run_round(state);
      if (rec.round % cfg_.eval_every == 0) records.push_back(std::move(rec));
    }
    return records;
  }

 private:
  SimConfig cfg_;
  std::vector<std::string> warnings_;
  Dataset train_;
  Dataset test_;
  Dataset edge_data_;
  Partition partition_;
  std::vector<Dataset> client_data_;
};

inline std::vector<RoundRecord> run_simulation(const SimConfig& cfg) {
  return Simulation(cfg).run();
}

}  // namespace faros
