#pragma once

#include "lodlab/lod.hpp"

#include <string>
#include <vector>

namespace lodlab {

/// Sweep configuration, parsed from `key = value` lines (lists comma
/// separated) or assembled from CLI overrides.
struct ExperimentConfig {
  std::string experiment = "blocks";  // blocks | channels | raster
  std::string raster_path;            // coefficient file for `raster`
  std::vector<std::string> operators = {"aw-proj"};
  std::vector<double> betas = {1e6};
  std::vector<int> n_H_list = {4, 8, 16, 32};
  int n_h = 128;
  std::string k_policy = "tied";      // tied | theory | fixed
  std::vector<int> k_list;            // used when k_policy == fixed
  std::string source = "half-step";   // builtin name or path to a raster
  std::string out = "report.csv";
  int workers = 1;
  std::vector<int> diag_nodes;        // coarse vertex ids for decay profiles
};

ExperimentConfig load_config(const std::string& path);
void apply_override(ExperimentConfig& config, const std::string& key,
                    const std::string& value);

/// Localization orders per policy: `tied` follows k = log2(n_H) + 1, the
/// theory preset adds the contrast term ceil(2 ln(1/H) + ln(contrast)/2).
int k_tied(int n_H);
int k_theory(int n_H, double contrast);

struct ExperimentRow {
  std::string experiment;
  std::string op;
  double beta = 0.0;
  int n_H = 0;
  double H = 0.0;
  int k = 0;
  double rel_energy_error = 0.0;  // NaN for failed rows
  long coarse_dofs = 0;
  long fine_dofs = 0;
  long corrector_solves = 0;
  double wall_time_s = 0.0;
  std::string reason;             // empty when the row succeeded
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
  bool all_ok() const;
};

ExperimentReport run(const ExperimentConfig& config);

std::string report_to_csv(const ExperimentReport& report);
void write_report_csv(const ExperimentReport& report, const std::string& path);

struct DiagnosticsRow {
  std::string record;  // patch | decay
  std::string experiment;
  std::string op;
  double beta = 0.0;
  int n_H = 0;
  long id = 0;         // coarse triangle (patch) or vertex (decay)
  int k = 0;           // decay rows only
  std::string qm_type; // type1 | type0 | none
  double c_p = 0.0;
  double qi3 = 0.0;
  double tail_energy = 0.0;
  std::string reason;
};

struct DiagnosticsReport {
  std::vector<DiagnosticsRow> rows;
  bool all_ok() const;
};

DiagnosticsReport diagnose(const ExperimentConfig& config);

std::string diagnostics_to_csv(const DiagnosticsReport& report);
void write_diagnostics_csv(const DiagnosticsReport& report,
                           const std::string& path);

/// Coefficient for one sweep cell (generated or loaded), with the eps-grid
/// resolution the hierarchy must honor.
RasterCoefficient experiment_coefficient(const ExperimentConfig& config,
                                         double beta);
RasterGrid experiment_source(const ExperimentConfig& config);

}  // namespace lodlab
