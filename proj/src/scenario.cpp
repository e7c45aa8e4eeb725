#include "distb/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "distb/consensus.hpp"

namespace distb {

const char* to_string(VariantSel v) {
  switch (v) {
    case VariantSel::Core: return "core";
    case VariantSel::Distb: return "distb";
    case VariantSel::Both: return "both";
  }
  return "both";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
  }
  if (out > std::numeric_limits<T>::max()) {
    throw ConfigError(fmt::format("{}: value {} is out of range", key, v));
  }
  return static_cast<T>(out);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, v));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, v));
}

std::string parse_string(std::string_view v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return std::string(v);
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

struct KeyDef {
  std::string name;
  std::function<std::string(const Scenario&)> get;
  std::function<void(Scenario&, std::string_view key, std::string_view value)> set;
};

#define DISTB_UINT(NAME, FIELD, T)                                                      \
  KeyDef {                                                                             \
    NAME, [](const Scenario& s) { return fmt::format("{}", s.FIELD); },                \
        [](Scenario& s, std::string_view k, std::string_view v) {                      \
          s.FIELD = parse_uint<T>(k, v);                                               \
        }                                                                              \
  }
#define DISTB_DOUBLE(NAME, FIELD)                                                      \
  KeyDef {                                                                             \
    NAME, [](const Scenario& s) { return fmt::format("{}", s.FIELD); },                \
        [](Scenario& s, std::string_view k, std::string_view v) {                      \
          s.FIELD = parse_double(k, v);                                                \
        }                                                                              \
  }
#define DISTB_STRING(NAME, FIELD)                                                      \
  KeyDef {                                                                             \
    NAME, [](const Scenario& s) { return quote(s.FIELD); },                            \
        [](Scenario& s, std::string_view, std::string_view v) { s.FIELD = parse_string(v); } \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      DISTB_UINT("seed", seed, std::uint64_t),
      DISTB_DOUBLE("duration_s", duration_s),
      KeyDef{"variant", [](const Scenario& s) { return std::string(to_string(s.variant)); },
             [](Scenario& s, std::string_view k, std::string_view v) {
               if (v == "core") s.variant = VariantSel::Core;
               else if (v == "distb") s.variant = VariantSel::Distb;
               else if (v == "both") s.variant = VariantSel::Both;
               else throw ConfigError(fmt::format("{}: expected core, distb or both, got '{}'", k, v));
             }},

      DISTB_DOUBLE("field.width_m", field.width_m),
      DISTB_DOUBLE("field.height_m", field.height_m),

      DISTB_UINT("nodes.sensors", sensors, std::uint32_t),
      DISTB_UINT("nodes.gateways", gateways, std::uint32_t),
      DISTB_UINT("nodes.switches", switches, std::uint32_t),
      DISTB_UINT("nodes.miners", miners, std::uint32_t),

      DISTB_UINT("traffic.packet_size", packet_size, std::uint32_t),
      DISTB_UINT("traffic.gen_interval_ms", gen_interval_ms, std::uint64_t),
      DISTB_DOUBLE("traffic.radio_range_m", radio_range_m),
      DISTB_DOUBLE("traffic.speed_min_mps", waypoint.speed_min_mps),
      DISTB_DOUBLE("traffic.speed_max_mps", waypoint.speed_max_mps),
      DISTB_DOUBLE("traffic.pause_min_s", waypoint.pause_min_s),
      DISTB_DOUBLE("traffic.pause_max_s", waypoint.pause_max_s),
      DISTB_UINT("traffic.mobility_step_ms", mobility_step_ms, std::uint64_t),

      DISTB_UINT("fabric.link_latency_ms", link_latency_ms, std::uint64_t),
      DISTB_DOUBLE("fabric.link_capacity_pps", link_capacity_pps),
      DISTB_UINT("fabric.queue_limit", queue_limit, std::uint32_t),
      DISTB_UINT("fabric.idle_timeout_ms", idle_timeout_ms, std::uint64_t),
      DISTB_UINT("fabric.access_latency_ms", access_latency_ms, std::uint64_t),
      DISTB_UINT("fabric.control_latency_ms", control_latency_ms, std::uint64_t),

      DISTB_DOUBLE("ledger.tau", tau),
      DISTB_UINT("ledger.round_period_ms", round_period_ms, std::uint64_t),
      DISTB_UINT("ledger.vote_window_ms", vote_window_ms, std::uint64_t),
      DISTB_UINT("ledger.max_block_txs", max_block_txs, std::uint32_t),
      KeyDef{"ledger.fast_crypto",
             [](const Scenario& s) { return std::string(s.fast_crypto ? "true" : "false"); },
             [](Scenario& s, std::string_view k, std::string_view v) {
               s.fast_crypto = parse_bool(k, v);
             }},

      DISTB_DOUBLE("attack.tamper_prob", attack.tamper_prob),
      DISTB_DOUBLE("attack.flood_rate", attack.flood_rate),
      DISTB_DOUBLE("attack.compromise_attempt_rate", attack.compromise_attempt_rate),
      DISTB_DOUBLE("attack.compromise_success_core", attack.compromise_success_core),
      DISTB_DOUBLE("attack.compromise_success_distb", attack.compromise_success_distb),
      DISTB_DOUBLE("attack.forge_block_rate", attack.forge_block_rate),
      DISTB_UINT("attack.attacker_count", attack.attacker_count, std::uint32_t),
      DISTB_UINT("attack.compromised_miners", attack.compromised_miners, std::uint32_t),
      KeyDef{"attack.start_s",
             [](const Scenario& s) { return fmt::format("{}", s.attack.start.to_seconds()); },
             [](Scenario& s, std::string_view k, std::string_view v) {
               const double secs = parse_double(k, v);
               if (secs < 0) throw ConfigError(fmt::format("{}: must be >= 0", k));
               s.attack.start = SimTime::seconds(secs);
             }},

      DISTB_UINT("metrics.window_ms", window_ms, std::uint64_t),

      DISTB_STRING("output.csv", csv),
      DISTB_STRING("output.svg", svg),
      DISTB_STRING("output.trace", trace),
      DISTB_STRING("output.audit", audit),
  };
  return table;
}

#undef DISTB_UINT
#undef DISTB_DOUBLE
#undef DISTB_STRING

const KeyDef* find_key(std::string_view key) {
  for (const auto& k : key_table()) {
    if (k.name == key) return &k;
  }
  return nullptr;
}

}  // namespace

void Scenario::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  try {
    check_threshold(tau);
  } catch (const ThresholdError& e) {
    fail(std::string("ledger.tau: ") + e.what());
  }
  if (!allow_nonpaper && packet_size != 256 && packet_size != 800 && packet_size != 1024) {
    fail(fmt::format(
        "traffic.packet_size: {} is not one of 256, 800, 1024 (pass --allow-nonpaper to override)",
        packet_size));
  }
  if (packet_size == 0) fail("traffic.packet_size: must be > 0");
  if (!(duration_s >= 0.0)) fail("duration_s: must be >= 0");
  if (!(field.width_m > 0.0) || !(field.height_m > 0.0)) fail("field: width_m and height_m must be > 0");
  if (switches == 0) fail("nodes.switches: at least one switch is required");
  if (gateways == 0) fail("nodes.gateways: at least one gateway is required");
  if (miners == 0) fail("nodes.miners: at least one miner is required");
  if (gen_interval_ms == 0) fail("traffic.gen_interval_ms: must be > 0");
  if (mobility_step_ms == 0) fail("traffic.mobility_step_ms: must be > 0");
  if (!(radio_range_m >= 0.0)) fail("traffic.radio_range_m: must be >= 0");
  if (!(waypoint.speed_min_mps > 0.0) || waypoint.speed_max_mps < waypoint.speed_min_mps) {
    fail("traffic.speed_min_mps/speed_max_mps: need 0 < min <= max");
  }
  if (!(waypoint.pause_min_s >= 0.0) || waypoint.pause_max_s < waypoint.pause_min_s) {
    fail("traffic.pause_min_s/pause_max_s: need 0 <= min <= max");
  }
  if (!(link_capacity_pps > 0.0)) fail("fabric.link_capacity_pps: must be > 0");
  if (queue_limit == 0) fail("fabric.queue_limit: must be > 0");
  if (idle_timeout_ms == 0) fail("fabric.idle_timeout_ms: must be > 0");
  if (round_period_ms == 0) fail("ledger.round_period_ms: must be > 0");
  if (vote_window_ms == 0 || vote_window_ms > round_period_ms) {
    fail("ledger.vote_window_ms: must be in [1, round_period_ms]");
  }
  if (max_block_txs == 0) fail("ledger.max_block_txs: must be > 0");
  if (window_ms == 0) fail("metrics.window_ms: must be > 0");
  try {
    attack.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (attack.compromised_miners > miners) {
    fail("attack.compromised_miners: cannot exceed nodes.miners");
  }
  if (csv.empty()) fail("output.csv: must not be empty");
}

void set_key(Scenario& s, std::string_view key, std::string_view value) {
  const KeyDef* def = find_key(key);
  if (def == nullptr) throw ConfigError(fmt::format("unknown key '{}'", key));
  def->set(s, key, trim(value));
}

Scenario parse_scenario(std::string_view text, std::string_view origin, bool allow_nonpaper) {
  Scenario s;
  s.allow_nonpaper = allow_nonpaper;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto where = [&] { return fmt::format("{}:{}: ", origin, line_no); };
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known = {"field",  "nodes",   "traffic", "fabric",
                                                  "ledger", "attack",  "metrics", "output"};
      if (known.count(section) == 0) throw ConfigError(where() + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where() + "expected key = value");
    const std::string name(trim(line.substr(0, eq)));
    const std::string key = section.empty() ? name : section + "." + name;
    if (find_key(key) == nullptr) throw ConfigError(where() + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where() + "duplicate key '" + key + "'");
    try {
      set_key(s, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
    if (end == text.size()) break;
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path, bool allow_nonpaper) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open scenario '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string(), allow_nonpaper);
}

std::string dump_scenario(const Scenario& s) {
  std::string out;
  std::string section;
  for (const auto& k : key_table()) {
    const auto dot = k.name.find('.');
    const std::string sec = dot == std::string::npos ? "" : k.name.substr(0, dot);
    const std::string name = dot == std::string::npos ? k.name : k.name.substr(dot + 1);
    if (sec != section) {
      out += fmt::format("\n[{}]\n", sec);
      section = sec;
    }
    out += fmt::format("{} = {}\n", name, k.get(s));
  }
  return out;
}

const std::vector<std::string>& sweepable_keys() {
  static const std::vector<std::string> keys = {
      "nodes",
      "nodes.sensors",
      "nodes.gateways",
      "nodes.switches",
      "nodes.miners",
      "traffic.packet_size",
      "ledger.tau",
      "attack.tamper_prob",
      "attack.flood_rate",
      "attack.compromise_attempt_rate",
      "attack.compromise_success_core",
      "attack.compromise_success_distb",
      "attack.forge_block_rate",
      "attack.attacker_count",
      "attack.compromised_miners",
  };
  return keys;
}

bool is_sweepable(std::string_view key) {
  const auto& keys = sweepable_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

void apply_sweep(Scenario& s, std::string_view key, std::string_view value) {
  if (!is_sweepable(key)) throw ConfigError(fmt::format("'{}' is not a sweepable parameter", key));
  if (key == "nodes") {
    const auto total = parse_uint<std::uint32_t>(key, trim(value));
    const std::uint32_t infra = s.gateways + s.switches + s.miners;
    if (total < infra) {
      throw ConfigError(fmt::format("nodes: {} is below the {} infrastructure nodes", total, infra));
    }
    s.sensors = total - infra;
  } else {
    set_key(s, key, value);
  }
  s.validate();
}

}  // namespace distb
