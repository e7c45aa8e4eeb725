#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "distb/scenario.hpp"
#include "distb/simulation.hpp"

namespace distb {

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  /// Directory for every emitted file. Created when missing.
  std::filesystem::path out_dir = ".";
  /// Event trace per variant; overrides output.trace when set.
  std::filesystem::path trace;
  /// Run the variants of one report on separate threads.
  bool parallel = true;
};

struct Report {
  Scenario scenario;
  std::vector<RunResult> runs;

  const RunResult* find(Variant v) const;
};

std::vector<Variant> variants_of(const Scenario& s);

/// Runs every selected variant in isolation with the same seed.
Report run_experiment(const Scenario& s, const RunOptions& opts = {});

/// Merged CSV (core rows then distb rows) plus three SVG charts.
/// Returns the paths written. Throws OutputError on io failure.
std::vector<std::filesystem::path> write_report(const Report& r, const RunOptions& opts);
void write_report_csv(const Report& r, std::ostream& out);

struct SweepPoint {
  std::string value;
  Report report;
};

/// One isolated run per value. Throws ConfigError for an empty value list or
/// a parameter that cannot be swept.
std::vector<SweepPoint> run_sweep(const Scenario& base, const std::string& param,
                                  const std::vector<std::string>& values,
                                  const RunOptions& opts = {});

/// Summary row per (value, variant) with end-of-run metrics.
void write_sweep_summary(const std::string& param, const std::vector<SweepPoint>& points,
                         std::ostream& out);

/// Writes per-value reports under out_dir/<param>-<value>/, the summary CSV
/// and summary charts. Returns the paths written.
std::vector<std::filesystem::path> write_sweep(const std::string& param,
                                               const std::vector<SweepPoint>& points,
                                               const RunOptions& opts);

}  // namespace distb
