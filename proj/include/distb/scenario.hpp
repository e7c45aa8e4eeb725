#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "distb/adversary.hpp"
#include "distb/mobility.hpp"

namespace distb {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VariantSel : std::uint8_t { Core, Distb, Both };

struct Scenario {
  std::uint64_t seed = 42;
  double duration_s = 600.0;
  VariantSel variant = VariantSel::Both;

  Field field;

  std::uint32_t sensors = 32;
  std::uint32_t gateways = 4;
  std::uint32_t switches = 9;
  std::uint32_t miners = 5;

  std::uint32_t packet_size = 256;
  std::uint64_t gen_interval_ms = 200;
  double radio_range_m = 250.0;
  WaypointParams waypoint;
  std::uint64_t mobility_step_ms = 1000;

  std::uint64_t link_latency_ms = 2;
  double link_capacity_pps = 1000.0;
  std::uint32_t queue_limit = 64;
  std::uint64_t idle_timeout_ms = 10000;
  std::uint64_t access_latency_ms = 1;
  std::uint64_t control_latency_ms = 2;

  double tau = 0.66;
  std::uint64_t round_period_ms = 1000;
  std::uint64_t vote_window_ms = 500;
  std::uint32_t max_block_txs = 64;
  bool fast_crypto = false;

  AttackProfile attack;

  std::uint64_t window_ms = 10000;

  std::string csv = "metrics.csv";
  std::string svg = "metrics";
  std::string trace;
  std::string audit;

  bool allow_nonpaper = false;

  std::uint32_t nodes_total() const { return sensors + gateways + switches + miners; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses the sectioned key = value format. Unknown keys, duplicate keys and
/// malformed values are ConfigErrors carrying the line number.
Scenario parse_scenario(std::string_view text, std::string_view origin = "<string>",
                        bool allow_nonpaper = false);
Scenario load_scenario(const std::filesystem::path& path, bool allow_nonpaper = false);

/// Every key with its effective value, in a form parse_scenario reads back.
std::string dump_scenario(const Scenario& s);

/// Sets one dotted key ("ledger.tau", "seed", ...). Throws ConfigError.
void set_key(Scenario& s, std::string_view key, std::string_view value);

/// Keys accepted by sweep. "nodes" rescales the sensor count so that the
/// total matches, keeping the infrastructure fixed.
bool is_sweepable(std::string_view key);
void apply_sweep(Scenario& s, std::string_view key, std::string_view value);
const std::vector<std::string>& sweepable_keys();

const char* to_string(VariantSel v);

}  // namespace distb
