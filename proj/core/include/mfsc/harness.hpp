#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfsc/model.hpp"
#include "mfsc/oracle.hpp"

namespace mfsc {

// Options shared by the experiment commands. An empty out_dir suppresses
// all file output; reports are still returned.
struct RunOptions {
  std::string config_path;  // recorded in the manifest when known
  std::uint64_t seed = 1;
  int paths = 100;
  int threads = 0;  // 0 = hardware concurrency
  int steps_override = 0;
  std::string out_dir;
  bool dump_trajectories = false;
  bool dump_errors = false;
  bool dump_gains = false;
  bool dump_riccati = false;
};

struct RegimeSummary {
  double j_soc_mean = 0.0;
  double j_soc_se = 0.0;
  double j_soc_per_agent = 0.0;
  double j1_mean = 0.0;
  double j2_mean = 0.0;
};

// Coupled centralized/distributed evaluation on common random numbers.
struct CompareReport {
  int paths = 0;
  std::uint64_t seed = 0;
  int agents = 0;

  RegimeSummary cent, dist;
  double gap_per_agent = 0.0;  // mean over paths of (J_dist - J_cent)/N
  double gap_se = 0.0;
  double zeta_max_dev = 0.0;   // coupled-deviation identity diagnostics
  double v_max_dev = 0.0;
  double j2_rel_dev = 0.0;     // |J2_dist - J2_cent| / max(J2)

  double v_stated = 0.0;
  double v_corrected = 0.0;

  Eigen::MatrixXd err_check_series;  // (steps+1) x K path-mean |xi_check|^2
  Eigen::MatrixXd err_hat_series;
  Eigen::VectorXd sup_err_check;     // per-cluster sup over time
  double sup_err_total = 0.0;        // sum over clusters

  Eigen::VectorXd j_agent_cent;      // per-agent expected cost
  Eigen::VectorXd j_agent_dist;
  std::vector<double> gap_per_path;  // (J_dist - J_cent)/N, per path
};

CompareReport run_compare(const SystemSpec& spec, const RunOptions& options);

// Single-regime Monte Carlo evaluation (regime "centralized" or
// "distributed"); cheaper than run_compare when only one side is needed.
struct SimulateReport {
  int paths = 0;
  RegimeSummary regime;
  double v_stated = 0.0;
  double v_corrected = 0.0;
  std::vector<double> j_soc_per_path;
};

SimulateReport run_simulate(const SystemSpec& spec, const std::string& regime,
                            const RunOptions& options);

struct ConvergenceRow {
  double scale = 1.0;
  int C1 = 0;  // min_q N_q after scaling
  int agents = 0;
  int paths = 0;
  std::uint64_t seed = 0;
  double gap_per_agent = 0.0;
  double gap_se = 0.0;
  Eigen::VectorXd sup_err_check;  // per cluster
  double sup_err_total = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

struct ConvergeReport {
  std::vector<ConvergenceRow> rows;
  SlopeFit err_fit;  // log sup-t error vs log C1
  SlopeFit gap_fit;  // log per-agent gap vs log C1
};

// Re-derives and re-solves per scale (population counts enter the gains
// through the N^K-weighted matrices); needs >= 3 scales.
ConvergeReport run_converge(const SystemSpec& base,
                            const std::vector<double>& scales,
                            const RunOptions& options);

struct OracleReport {
  std::vector<OracleCheck> checks;
  bool all_pass = false;
};

// Stacked-equivalence and forward-backward certification with pinned
// tolerances; see the acceptance suite for the instance-level contract.
OracleReport run_oracle(const SystemSpec& spec, int trials,
                        const RunOptions& options);

// Loads, validates and summarizes a config; returns a process exit code.
int run_validate(const std::string& config_path, std::ostream& out);

// Solves the Riccati system and writes the grid dumps and residuals.
struct RiccatiDumpReport {
  double p_residual = 0.0;
  double k_residual = 0.0;
};
RiccatiDumpReport run_riccati(const SystemSpec& spec,
                              const RunOptions& options);

// Ordinary least squares on (log x, log y); requires >= 3 positive points.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& pts);

// FNV-1a over the raw bytes; used for the config hash in run manifests.
std::uint64_t fnv1a64(const std::string& bytes);

// Applies steps_override and re-validates; helper shared by the commands.
SystemSpec spec_with_overrides(const SystemSpec& spec,
                               const RunOptions& options);

}  // namespace mfsc
