#include "distb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace distb {

const char* to_string(Variant v) { return v == Variant::Core ? "core" : "distb"; }

MetricsRecorder::MetricsRecorder(Variant variant, SimTime window, std::uint64_t nodes_total)
    : variant_(variant), window_len_(window) {
  window_.nodes_total = nodes_total;
  cumulative_.nodes_total = nodes_total;
}

void MetricsRecorder::on_sent(std::uint64_t pkt_id) {
  if (!in_flight_.insert(pkt_id).second) {
    throw std::logic_error(fmt::format("packet {} sent twice", pkt_id));
  }
  ++window_.sent;
  ++cumulative_.sent;
}

void MetricsRecorder::bump(Counters& c, Outcome outcome) {
  switch (outcome) {
    case Outcome::DeliveredVerified:
      ++c.delivered;
      ++c.delivered_verified;
      break;
    case Outcome::DeliveredInsecure:
      ++c.delivered;
      ++c.insecure_delivered;
      break;
    case Outcome::DroppedNoRoute: ++c.dropped_no_route; break;
    case Outcome::DroppedCongestion: ++c.dropped_congestion; break;
    case Outcome::DroppedSecurity: ++c.dropped_security; break;
  }
}

void MetricsRecorder::record(std::uint64_t pkt_id, Outcome outcome) {
  if (in_flight_.erase(pkt_id) == 0) {
    throw std::logic_error(fmt::format("packet {} counted twice or never sent", pkt_id));
  }
  bump(window_, outcome);
  bump(cumulative_, outcome);
}

void MetricsRecorder::on_node_failed(EntityId node) {
  if (!failed_.insert(node).second) return;
  ++window_.nodes_failed;
  ++cumulative_.nodes_failed;
}

bool MetricsRecorder::conserved() const {
  return cumulative_.sent == cumulative_.delivered + cumulative_.dropped() + in_flight_.size();
}

MetricSample MetricsRecorder::close_window(SimTime t) {
  if (!conserved()) ++violations_;
  MetricSample s;
  s.window_end = t;
  s.variant = variant_;
  s.window = window_;
  s.in_flight = in_flight_.size();
  s.cumulative_sent = cumulative_.sent;
  const double secs = (t - window_start_).to_seconds();
  s.throughput_pps = secs > 0.0 ? static_cast<double>(window_.delivered) / secs : 0.0;
  s.security_rate_pct = 100.0 * static_cast<double>(cumulative_.delivered_verified) /
                        static_cast<double>(std::max<std::uint64_t>(cumulative_.sent, 1));
  s.node_failure_pct =
      cumulative_.nodes_total == 0
          ? 0.0
          : 100.0 * static_cast<double>(cumulative_.nodes_failed) /
                static_cast<double>(cumulative_.nodes_total);
  samples_.push_back(s);

  const std::uint64_t total = window_.nodes_total;
  window_ = Counters{};
  window_.nodes_total = total;
  window_start_ = t;
  return s;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_row(const MetricSample& s) {
  const auto& w = s.window;
  return fmt::format("{},{},{},{},{},{},{},{},{},{:.4f},{:.4f},{:.4f}",
                     csv_field(to_string(s.variant)), s.window_end.ticks(), w.sent, w.delivered,
                     w.delivered_verified, w.dropped_no_route, w.dropped_congestion,
                     w.dropped_security, w.insecure_delivered, s.throughput_pps,
                     s.security_rate_pct, s.node_failure_pct);
}

void write_csv(std::ostream& out, const std::vector<MetricSample>& samples) {
  out << kCsvHeader << "\r\n";
  for (const auto& s : samples) out << csv_row(s) << "\r\n";
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span) {
  if (span <= 0.0) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

void write_svg_chart(std::ostream& out, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<ChartSeries>& series) {
  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  static constexpr const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e"};

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = 0.0, y_max = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (!std::isfinite(x_min)) x_min = 0, x_max = 1, y_max = 1;
  if (x_max <= x_min) x_max = x_min + 1;
  if (y_max <= y_min) y_max = y_min + 1;
  const double y_step = nice_step(y_max - y_min);
  y_max = std::ceil(y_max / y_step) * y_step;
  const double x_step = nice_step(x_max - x_min);

  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - y_min) / (y_max - y_min) * ph; };

  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n",
      kW, kH);
  out << fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kW, kH);
  out << fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     kW / 2, xml_escape(title));
  out << fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n"
      "<line x1=\"{0}\" y1=\"{3}\" x2=\"{0}\" y2=\"{1}\" stroke=\"black\"/>\n",
      kLeft, kTop + ph, kLeft + pw, kTop);
  for (double y = y_min; y <= y_max + 1e-9; y += y_step) {
    out << fmt::format(
        "<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>"
        "<text x=\"{3}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:g}</text>\n",
        kLeft, py(y), kLeft + pw, kLeft - 6, py(y) + 4, y);
  }
  for (double x = std::ceil(x_min / x_step) * x_step; x <= x_max + 1e-9; x += x_step) {
    out << fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{:g}</text>\n", px(x),
                       kTop + ph + 18, x);
  }
  out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2,
                     kH - 10, xml_escape(x_label));
  out << fmt::format(
      "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
      kTop + ph / 2, xml_escape(y_label));

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    std::string pts;
    for (const auto& [x, y] : series[i].points) pts += fmt::format("{:.2f},{:.2f} ", px(x), py(y));
    out << fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
                       color, pts);
    const double ly = kTop + 8 + 16.0 * static_cast<double>(i);
    out << fmt::format(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>"
        "<text x=\"{4}\" y=\"{5}\">{6}</text>\n",
        kLeft + 12, ly, kLeft + 32, color, kLeft + 38, ly + 4, xml_escape(series[i].name));
  }
  out << "</svg>\n";
}

}  // namespace distb
