#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "distb/kernel.hpp"

namespace distb {

enum class Variant : std::uint8_t { Core, Distb };

const char* to_string(Variant v);

struct Counters {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t delivered_verified = 0;
  std::uint64_t dropped_no_route = 0;
  std::uint64_t dropped_congestion = 0;
  std::uint64_t dropped_security = 0;
  std::uint64_t insecure_delivered = 0;
  std::uint64_t nodes_total = 0;
  std::uint64_t nodes_failed = 0;

  std::uint64_t dropped() const { return dropped_no_route + dropped_congestion + dropped_security; }
  bool operator==(const Counters&) const = default;
};

/// Final fate of one data packet; exactly one per pkt_id.
enum class Outcome : std::uint8_t {
  DeliveredVerified,
  DeliveredInsecure,
  DroppedNoRoute,
  DroppedCongestion,
  DroppedSecurity,
};

struct MetricSample {
  SimTime window_end{};
  Variant variant = Variant::Core;
  Counters window;
  std::uint64_t in_flight = 0;
  std::uint64_t cumulative_sent = 0;
  double throughput_pps = 0.0;
  /// Verified deliveries over packets sent, cumulative up to window_end.
  double security_rate_pct = 0.0;
  double node_failure_pct = 0.0;
};

/// Per-run outcome accounting. Tracks the in-flight set so that double
/// counting a packet is caught and conservation can be checked exactly.
class MetricsRecorder {
 public:
  MetricsRecorder(Variant variant, SimTime window, std::uint64_t nodes_total);

  void on_sent(std::uint64_t pkt_id);
  /// Throws std::logic_error for a packet that is not in flight.
  void record(std::uint64_t pkt_id, Outcome outcome);
  /// Idempotent per node; failures are never undone.
  void on_node_failed(EntityId node);

  /// Closes the window ending at `t` and starts the next one.
  MetricSample close_window(SimTime t);

  /// sent == delivered + drops + in_flight on the cumulative counters.
  bool conserved() const;
  std::uint64_t conservation_violations() const { return violations_; }

  std::uint64_t in_flight() const { return in_flight_.size(); }
  const Counters& cumulative() const { return cumulative_; }
  const Counters& current_window() const { return window_; }
  const std::vector<MetricSample>& samples() const { return samples_; }
  Variant variant() const { return variant_; }
  SimTime window() const { return window_len_; }

 private:
  void bump(Counters& c, Outcome outcome);

  Variant variant_;
  SimTime window_len_;
  SimTime window_start_{};
  Counters window_;
  Counters cumulative_;
  std::unordered_set<std::uint64_t> in_flight_;
  std::unordered_set<EntityId> failed_;
  std::vector<MetricSample> samples_;
  std::uint64_t violations_ = 0;
};

/// Fixed column order used by every CSV this tool writes.
inline constexpr const char* kCsvHeader =
    "variant,window_end_ms,sent,delivered,delivered_verified,dropped_no_route,"
    "dropped_congestion,dropped_security,insecure_delivered,throughput_pps,security_rate_pct,"
    "node_failure_pct";

/// RFC-4180 field quoting: quoted only when it contains , " CR or LF.
std::string csv_field(const std::string& value);
std::string csv_row(const MetricSample& s);
void write_csv(std::ostream& out, const std::vector<MetricSample>& samples);

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Self-contained SVG line chart with axes, ticks and a legend.
void write_svg_chart(std::ostream& out, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<ChartSeries>& series);

}  // namespace distb
