#pragma once

#include "gradphi/free_energy.hpp"
#include "gradphi/verify.hpp"

#include <string>
#include <vector>

namespace gradphi {

// Key-value configuration with [lattice], [potential], [tilt], [chain] and
// [experiment] sections.
struct Config {
  int d = 2;
  int n_lo = 1;
  int n_hi = 1;
  Potential potential = Potential::quadratic(1.0);
  Eigen::VectorXd tilt = Eigen::Vector2d(0, 0);
  bool tilt_is_q = false;
  ChainConfig chain;
  std::string experiment;
  std::string raw_text;
};

Config config_parse(const std::string& text);
Config config_load(const std::string& path);

// Output files plus the reproducibility manifest.
struct Manifest {
  std::string experiment;
  std::string config_text;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::vector<std::pair<std::string, std::uint64_t>> outputs;  // file, hash
};

void write_manifest(const Manifest& m, const std::string& path);
std::uint64_t file_content_hash(const std::string& path);

void write_tension_csv(const std::vector<SurfaceTensionEstimate>& rows,
                       const std::string& path);
void write_exact_csv(const std::string& quantity, int d, double beta,
                     const std::vector<std::pair<int, Eigen::VectorXd>>& keys,
                     const std::vector<double>& values,
                     const std::string& path);
void write_trace_csv(const Trace& trace, int chain_index,
                     const std::string& path);
void write_series_csv(const LevelSeries& series, const std::string& path);
void write_defects_csv(const std::vector<Defect>& rows,
                       const std::string& path);

void write_check_reports_json(const std::vector<CheckReport>& reports,
                              const std::string& path);
// Per-check evidence table: one row per fitted constant.
void write_check_evidence_csv(const std::vector<CheckReport>& reports,
                              const std::string& path);
std::vector<CheckReport> read_check_reports_json(const std::string& path);

// Aggregate every *.report.json under dir into one summary table; returns
// (passed, failed, inconclusive).
struct ReportSummary {
  int passed = 0;
  int failed = 0;
  int inconclusive = 0;
  std::vector<CheckReport> reports;
};
ReportSummary aggregate_reports(const std::string& dir,
                                const std::string& summary_csv_path);

// Concatenate every level,value,stderr series in dir into one plot table
// with a leading series-name column; returns the number of series found.
int aggregate_plot_series(const std::string& dir, const std::string& out_path);

std::string iso_timestamp();

}  // namespace gradphi
