#pragma once

// The standard desk scenario used by end-to-end tests: 10-class blobs in 16
// dims (class_sep 6), 50 clients with 10 per round, Dirichlet q = 0.4,
// softmax regression, 100 rounds, 10 malicious clients in the roster.

#include "faros/sim.hpp"

namespace scenario {

inline faros::SimConfig standard(std::uint64_t seed = 1) {
  faros::SimConfig c;
  c.total_clients = 50;
  c.clients_per_round = 10;
  c.malicious_count = 10;
  c.rounds = 100;
  c.master_seed = seed;
  c.model.hidden_dim = 0;
  c.data.num_classes = 10;
  c.data.feature_dim = 16;
  c.data.class_sep = 6.0;
  c.data.dirichlet_q = 0.4;
  c.attack.kind = faros::AttackKind::kModelReplacement;
  c.attack_boost = 10;
  c.defense.kind = faros::DefenseKind::kFaros;
  return c;
}

inline faros::SimConfig clean(std::uint64_t seed = 1) {
  faros::SimConfig c = standard(seed);
  c.malicious_count = 0;
  c.attack.kind = faros::AttackKind::kNone;
  return c;
}

}  // namespace scenario
