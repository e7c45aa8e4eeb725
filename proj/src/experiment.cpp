#include "distb/experiment.hpp"

#include <fstream>
#include <future>
#include <memory>

#include <fmt/format.h>

namespace distb {

namespace fs = std::filesystem;

const RunResult* Report::find(Variant v) const {
  for (const auto& r : runs) {
    if (r.variant == v) return &r;
  }
  return nullptr;
}

std::vector<Variant> variants_of(const Scenario& s) {
  switch (s.variant) {
    case VariantSel::Core: return {Variant::Core};
    case VariantSel::Distb: return {Variant::Distb};
    case VariantSel::Both: return {Variant::Core, Variant::Distb};
  }
  return {};
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw OutputError(fmt::format("cannot create output directory '{}'", dir.string()));
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

fs::path per_variant(const fs::path& dir, const fs::path& base, Variant v) {
  const fs::path resolved = base.is_absolute() ? base : dir / base;
  fs::path name = resolved.stem();
  name += fmt::format("-{}", to_string(v));
  name += resolved.extension();
  return resolved.parent_path() / name;
}

RunResult run_one(const Scenario& s, Variant v, const RunOptions& opts) {
  Simulation sim(s, v);
  std::unique_ptr<std::ofstream> trace, audit;
  const fs::path trace_base = !opts.trace.empty() ? opts.trace : fs::path(s.trace);
  if (!trace_base.empty()) {
    trace = std::make_unique<std::ofstream>(open_out(per_variant(opts.out_dir, trace_base, v)));
    sim.set_trace(trace.get());
  }
  if (!s.audit.empty()) {
    audit = std::make_unique<std::ofstream>(open_out(per_variant(opts.out_dir, s.audit, v)));
    sim.set_audit(audit.get());
  }
  return sim.run();
}

}  // namespace

Report run_experiment(const Scenario& s, const RunOptions& opts) {
  s.validate();
  if (!s.trace.empty() || !opts.trace.empty() || !s.audit.empty()) ensure_dir(opts.out_dir);
  Report report;
  report.scenario = s;
  const auto vs = variants_of(s);
  if (opts.parallel && vs.size() > 1) {
    std::vector<std::future<RunResult>> futures;
    for (Variant v : vs) {
      futures.push_back(std::async(std::launch::async, [&s, v, &opts] { return run_one(s, v, opts); }));
    }
    for (auto& f : futures) report.runs.push_back(f.get());
  } else {
    for (Variant v : vs) report.runs.push_back(run_one(s, v, opts));
  }
  return report;
}

void write_report_csv(const Report& r, std::ostream& out) {
  std::vector<MetricSample> rows;
  for (const auto& run : r.runs) rows.insert(rows.end(), run.samples.begin(), run.samples.end());
  write_csv(out, rows);
}

std::vector<fs::path> write_report(const Report& r, const RunOptions& opts) {
  ensure_dir(opts.out_dir);
  std::vector<fs::path> written;
  const fs::path csv_path = opts.out_dir / r.scenario.csv;
  {
    auto out = open_out(csv_path);
    write_report_csv(r, out);
    if (!out) throw OutputError(fmt::format("cannot write '{}'", csv_path.string()));
  }
  written.push_back(csv_path);

  if (r.scenario.svg.empty()) return written;
  struct Chart {
    const char* suffix;
    const char* title;
    const char* y_label;
    double (*value)(const MetricSample&);
  };
  static const Chart charts[] = {
      {"throughput", "Throughput", "delivered packets/s",
       [](const MetricSample& s) { return s.throughput_pps; }},
      {"security", "Security rate", "verified deliveries (% of sent)",
       [](const MetricSample& s) { return s.security_rate_pct; }},
      {"failure", "Node failure rate", "failed nodes (%)",
       [](const MetricSample& s) { return s.node_failure_pct; }},
  };
  for (const auto& c : charts) {
    std::vector<ChartSeries> series;
    for (const auto& run : r.runs) {
      ChartSeries cs{to_string(run.variant), {}};
      for (const auto& s : run.samples) {
        cs.points.emplace_back(static_cast<double>(s.cumulative_sent), c.value(s));
      }
      series.push_back(std::move(cs));
    }
    const fs::path path = opts.out_dir / fmt::format("{}_{}.svg", r.scenario.svg, c.suffix);
    auto out = open_out(path);
    write_svg_chart(out, c.title, "packets sent", c.y_label, series);
    written.push_back(path);
  }
  return written;
}

std::vector<SweepPoint> run_sweep(const Scenario& base, const std::string& param,
                                  const std::vector<std::string>& values, const RunOptions& opts) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (!is_sweepable(param)) {
    throw ConfigError(fmt::format("'{}' is not a sweepable parameter", param));
  }
  std::vector<Scenario> scenarios;
  for (const auto& v : values) {
    Scenario s = base;
    try {
      apply_sweep(s, param, v);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("sweep value '{}': {}", v, e.what()));
    }
    scenarios.push_back(std::move(s));
  }
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < values.size(); ++i) {
    RunOptions o = opts;
    o.out_dir = opts.out_dir / fmt::format("{}-{}", param, values[i]);
    points.push_back({values[i], run_experiment(scenarios[i], o)});
  }
  return points;
}

namespace {

double run_throughput(const RunResult& r, const Scenario& s) {
  return s.duration_s > 0 ? static_cast<double>(r.totals.delivered) / s.duration_s : 0.0;
}

double run_security(const RunResult& r) {
  return 100.0 * static_cast<double>(r.totals.delivered_verified) /
         static_cast<double>(std::max<std::uint64_t>(r.totals.sent, 1));
}

double run_failure(const RunResult& r) {
  return r.totals.nodes_total == 0 ? 0.0
                                   : 100.0 * static_cast<double>(r.totals.nodes_failed) /
                                         static_cast<double>(r.totals.nodes_total);
}

}  // namespace

void write_sweep_summary(const std::string& param, const std::vector<SweepPoint>& points,
                         std::ostream& out) {
  out << "param,value,variant,sent,delivered,delivered_verified,dropped_no_route,"
         "dropped_congestion,dropped_security,insecure_delivered,throughput_pps,"
         "security_rate_pct,node_failure_pct,forged_admitted,chain_height\r\n";
  for (const auto& p : points) {
    for (const auto& r : p.report.runs) {
      const Counters& c = r.totals;
      out << fmt::format("{},{},{},{},{},{},{},{},{},{},{:.4f},{:.4f},{:.4f},{},{}\r\n",
                         csv_field(param), csv_field(p.value), to_string(r.variant), c.sent,
                         c.delivered, c.delivered_verified, c.dropped_no_route,
                         c.dropped_congestion, c.dropped_security, c.insecure_delivered,
                         run_throughput(r, p.report.scenario), run_security(r), run_failure(r),
                         r.consensus.forged_admitted, r.chain_height);
    }
  }
}

std::vector<fs::path> write_sweep(const std::string& param, const std::vector<SweepPoint>& points,
                                  const RunOptions& opts) {
  ensure_dir(opts.out_dir);
  std::vector<fs::path> written;
  for (const auto& p : points) {
    RunOptions o = opts;
    o.out_dir = opts.out_dir / fmt::format("{}-{}", param, p.value);
    auto files = write_report(p.report, o);
    written.insert(written.end(), files.begin(), files.end());
  }
  const fs::path summary = opts.out_dir / "sweep_summary.csv";
  {
    auto out = open_out(summary);
    write_sweep_summary(param, points, out);
  }
  written.push_back(summary);

  bool numeric = true;
  std::vector<double> xs;
  for (const auto& p : points) {
    try {
      std::size_t used = 0;
      xs.push_back(std::stod(p.value, &used));
      numeric = numeric && used == p.value.size();
    } catch (const std::exception&) {
      numeric = false;
    }
  }
  if (!numeric || points.empty()) return written;

  struct Chart {
    const char* suffix;
    const char* title;
    const char* y_label;
  };
  static const Chart charts[] = {{"throughput", "Throughput", "delivered packets/s"},
                                 {"security", "Security rate", "verified deliveries (% of sent)"},
                                 {"failure", "Node failure rate", "failed nodes (%)"}};
  for (std::size_t c = 0; c < std::size(charts); ++c) {
    std::vector<ChartSeries> series;
    for (Variant v : {Variant::Core, Variant::Distb}) {
      ChartSeries cs{to_string(v), {}};
      for (std::size_t i = 0; i < points.size(); ++i) {
        const RunResult* r = points[i].report.find(v);
        if (r == nullptr) continue;
        const double y = c == 0   ? run_throughput(*r, points[i].report.scenario)
                         : c == 1 ? run_security(*r)
                                  : run_failure(*r);
        cs.points.emplace_back(xs[i], y);
      }
      if (!cs.points.empty()) series.push_back(std::move(cs));
    }
    const fs::path path = opts.out_dir / fmt::format("sweep_{}.svg", charts[c].suffix);
    auto out = open_out(path);
    write_svg_chart(out, charts[c].title, param, charts[c].y_label, series);
    written.push_back(path);
  }
  return written;
}

}  // namespace distb
