#pragma once

// Flat `key = value` configuration files for SimConfig.
//
//   # comment
//   rounds = 100
//   defense.kind = faros
//   data.trigger_positions = 0,1,2
//
// Keys are dot paths mirroring SimConfig fields (see config_keys()). Blank
// lines and text after `#` are ignored. Later assignments of the same key win,
// so command-line overrides are simply applied after the file.

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faros/errors.hpp"
#include "faros/sim.hpp"

namespace faros {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_int(std::string_view s, const std::string& key) {
  s = trim(s);
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw ConfigError("bad integer '" + std::string(s) + "' for key '" + key + "'", key);
  return v;
}

inline double parse_double(std::string_view s, const std::string& key) {
  s = trim(s);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || std::isnan(v))
    throw ConfigError("bad number '" + std::string(s) + "' for key '" + key + "'", key);
  return v;
}

inline bool parse_bool(std::string_view s, const std::string& key) {
  s = trim(s);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("bad boolean '" + std::string(s) + "' for key '" + key + "'", key);
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += f(xs[i]);
  }
  return out;
}

// Rethrows ConfigErrors from enum parsers with the key the user wrote.
template <typename F>
auto keyed(const std::string& key, F f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), key);
  }
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::function<void(SimConfig&, std::string_view)> set;
  std::function<std::string(const SimConfig&)> get;
};

/// Every accepted key, in echo order.
inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto int_key = [&](std::string name, auto member) {
      k.push_back({name,
                   [=](SimConfig& c, std::string_view v) {
                     member(c) = parse_int<int>(v, name);
                   },
                   [=](const SimConfig& c) { return std::to_string(member(c)); }});
    };
    auto dbl_key = [&](std::string name, auto member) {
      k.push_back({name,
                   [=](SimConfig& c, std::string_view v) { member(c) = parse_double(v, name); },
                   [=](const SimConfig& c) { return fmt_double(member(c)); }});
    };
    auto bool_key = [&](std::string name, auto member) {
      k.push_back({name,
                   [=](SimConfig& c, std::string_view v) { member(c) = parse_bool(v, name); },
                   [=](const SimConfig& c) {
                     return std::string(member(c) ? "true" : "false");
                   }});
    };

    int_key("total_clients", [](auto& c) -> auto& { return c.total_clients; });
    int_key("clients_per_round", [](auto& c) -> auto& { return c.clients_per_round; });
    int_key("malicious_count", [](auto& c) -> auto& { return c.malicious_count; });
    int_key("force_c_per_round", [](auto& c) -> auto& { return c.force_c_per_round; });
    int_key("rounds", [](auto& c) -> auto& { return c.rounds; });
    int_key("eval_every", [](auto& c) -> auto& { return c.eval_every; });
    k.push_back({"master_seed",
                 [](SimConfig& c, std::string_view v) {
                   c.master_seed = parse_int<std::uint64_t>(v, "master_seed");
                 },
                 [](const SimConfig& c) { return std::to_string(c.master_seed); }});
    int_key("threads", [](auto& c) -> auto& { return c.threads; });

    int_key("model.hidden_dim", [](auto& c) -> auto& { return c.model.hidden_dim; });
    int_key("train.local_epochs", [](auto& c) -> auto& { return c.train.local_epochs; });
    int_key("train.batch_size", [](auto& c) -> auto& { return c.train.batch_size; });
    dbl_key("train.learning_rate", [](auto& c) -> auto& { return c.train.learning_rate; });

    int_key("data.num_classes", [](auto& c) -> auto& { return c.data.num_classes; });
    int_key("data.feature_dim", [](auto& c) -> auto& { return c.data.feature_dim; });
    int_key("data.n_per_class", [](auto& c) -> auto& { return c.data.n_per_class; });
    int_key("data.test_per_class", [](auto& c) -> auto& { return c.data.test_per_class; });
    dbl_key("data.class_sep", [](auto& c) -> auto& { return c.data.class_sep; });
    dbl_key("data.dirichlet_q", [](auto& c) -> auto& { return c.data.dirichlet_q; });
    int_key("data.edge_aux_size", [](auto& c) -> auto& { return c.data.edge_aux_size; });
    k.push_back({"data.trigger_positions",
                 [](SimConfig& c, std::string_view v) {
                   c.data.trigger.positions.clear();
                   for (auto item : split_list(v))
                     c.data.trigger.positions.push_back(
                         parse_int<std::size_t>(item, "data.trigger_positions"));
                 },
                 [](const SimConfig& c) {
                   return join(c.data.trigger.positions,
                               [](std::size_t p) { return std::to_string(p); });
                 }});
    k.push_back({"data.trigger_values",
                 [](SimConfig& c, std::string_view v) {
                   c.data.trigger.values.clear();
                   for (auto item : split_list(v))
                     c.data.trigger.values.push_back(parse_double(item, "data.trigger_values"));
                 },
                 [](const SimConfig& c) { return join(c.data.trigger.values, fmt_double); }});
    int_key("data.target_label", [](auto& c) -> auto& { return c.data.trigger.target_label; });

    k.push_back({"attack.kind",
                 [](SimConfig& c, std::string_view v) {
                   c.attack.kind = keyed("attack.kind", [&] { return parse_attack_kind(trim(v)); });
                 },
                 [](const SimConfig& c) { return std::string(to_string(c.attack.kind)); }});
    dbl_key("attack.poison_rate", [](auto& c) -> auto& { return c.attack.poison_rate; });
    dbl_key("attack.boost", [](auto& c) -> auto& { return c.attack_boost; });
    dbl_key("attack.alpha", [](auto& c) -> auto& { return c.attack.alpha; });
    dbl_key("attack.pgd_radius", [](auto& c) -> auto& { return c.attack.pgd_radius; });
    bool_key("attack.pgd_per_step", [](auto& c) -> auto& { return c.attack.pgd_per_step; });
    dbl_key("attack.edge_fraction", [](auto& c) -> auto& { return c.attack.edge_fraction; });
    int_key("attack.edge_source_label", [](auto& c) -> auto& { return c.attack.edge_source_label; });
    k.push_back({"attack.cos_operand",
                 [](SimConfig& c, std::string_view v) {
                   c.attack.cos_operand =
                       keyed("attack.cos_operand", [&] { return parse_cos_operand(trim(v)); });
                 },
                 [](const SimConfig& c) { return std::string(to_string(c.attack.cos_operand)); }});
    int_key("attack.local_epochs", [](auto& c) -> auto& { return c.attack.local_epochs; });

    k.push_back({"defense.kind",
                 [](SimConfig& c, std::string_view v) {
                   c.defense.kind = keyed("defense.kind", [&] { return parse_defense_kind(trim(v)); });
                 },
                 [](const SimConfig& c) { return std::string(to_string(c.defense.kind)); }});
    dbl_key("defense.phi_max", [](auto& c) -> auto& { return c.defense.phi_max; });
    dbl_key("defense.kappa", [](auto& c) -> auto& { return c.defense.kappa; });
    int_key("defense.core_size", [](auto& c) -> auto& { return c.defense.core_size; });
    int_key("defense.accept_count", [](auto& c) -> auto& { return c.defense.accept_count; });
    int_key("defense.krum_f", [](auto& c) -> auto& { return c.defense.krum_f; });
    int_key("defense.krum_select", [](auto& c) -> auto& { return c.defense.krum_select; });
    dbl_key("defense.clip_norm", [](auto& c) -> auto& { return c.defense.clip_norm; });
    dbl_key("defense.noise_std", [](auto& c) -> auto& { return c.defense.noise_std; });
    dbl_key("defense.phi_static", [](auto& c) -> auto& { return c.defense.phi_static; });
    dbl_key("defense.global_lr", [](auto& c) -> auto& { return c.defense.global_lr; });
    k.push_back({"defense.norm",
                 [](SimConfig& c, std::string_view v) {
                   c.defense.norm = keyed("defense.norm", [&] { return parse_norm_strategy(trim(v)); });
                 },
                 [](const SimConfig& c) { return std::string(to_string(c.defense.norm)); }});
    bool_key("defense.weight_by_samples",
             [](auto& c) -> auto& { return c.defense.weight_by_samples; });

    k.push_back({"compare.attacks",
                 [](SimConfig& c, std::string_view v) {
                   c.compare_attacks.clear();
                   for (auto item : split_list(v))
                     c.compare_attacks.push_back(
                         keyed("compare.attacks", [&] { return parse_attack_kind(item); }));
                 },
                 [](const SimConfig& c) {
                   return join(c.compare_attacks, [](AttackKind a) { return std::string(to_string(a)); });
                 }});
    k.push_back({"compare.defenses",
                 [](SimConfig& c, std::string_view v) {
                   c.compare_defenses.clear();
                   for (auto item : split_list(v))
                     c.compare_defenses.push_back(
                         keyed("compare.defenses", [&] { return parse_defense_kind(item); }));
                 },
                 [](const SimConfig& c) {
                   return join(c.compare_defenses, [](DefenseKind d) { return std::string(to_string(d)); });
                 }});
    return k;
  }();
  return keys;
}

inline const ConfigKey& find_config_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  throw ConfigError("unknown config key '" + std::string(name) + "'", std::string(name));
}

/// Applies one `key=value` assignment.
inline void apply_override(SimConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  const auto key = detail::trim(assignment.substr(0, eq));
  find_config_key(key).set(cfg, assignment.substr(eq + 1));
}

/// Parses config text on top of `base`. Errors carry the 1-based line number.
inline SimConfig parse_config(std::string_view text, SimConfig base = {}) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    try {
      apply_override(base, line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what(), e.key());
    }
  }
  return base;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Every key with its current value, in config_keys() order.
inline std::vector<std::pair<std::string, std::string>> config_echo(const SimConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : config_keys()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

/// Config text that parses back to `cfg`.
inline std::string format_config(const SimConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_echo(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace faros
