#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mfsc/errors.hpp"

namespace mfsc {

// One homogeneous subpopulation: dynamics, cost weights, and initial law
// shared by all of its agents.
struct ClusterSpec {
  std::string label;
  int count = 0;            // N_q, number of agents in the cluster
  Eigen::MatrixXd A;        // n x n drift
  Eigen::MatrixXd B;        // n x m input
  Eigen::MatrixXd G;        // n x n mean-field coupling gain
  Eigen::MatrixXd Sigma;    // n x d_w noise intensity
  Eigen::MatrixXd Gamma;    // n x n cost coupling
  Eigen::MatrixXd Q;        // n x n running state weight (sym PSD)
  Eigen::MatrixXd R;        // m x m control weight (sym PD)
  Eigen::MatrixXd H;        // n x n terminal weight (sym PSD)
  Eigen::VectorXd init_mean;  // n
  Eigen::MatrixXd init_cov;   // n x n (sym PSD)
};

// Directed communication graph over clusters plus the weighted adjacency
// used in the dynamics/cost coupling. E and M are independent inputs:
// nonzero coupling weight on a non-communication edge is legal (the
// validator only warns, since such edges degrade estimator accuracy).
struct NetworkTopology {
  Eigen::MatrixXd E;  // K x K, entries in {0,1}; e_qp = 1 iff cluster q hears p
  Eigen::MatrixXd M;  // K x K weighted adjacency

  int K() const { return static_cast<int>(E.rows()); }
};

// A full problem instance: clusters, topology, horizon and grid.
struct SystemSpec {
  std::vector<ClusterSpec> clusters;
  NetworkTopology topology;
  double horizon = 0.0;  // T
  int steps = 0;         // uniform grid resolution; h = T / steps
  int state_dim = 0;     // n
  int control_dim = 0;   // m
  int noise_dim = 1;     // d_w

  int K() const { return static_cast<int>(clusters.size()); }
  int total_agents() const;                 // N = sum_q N_q
  int cluster_of_agent(int agent) const;    // global agent index -> cluster
  int agent_offset(int q) const;            // first global index of cluster q
  double dt() const { return horizon / steps; }
};

// Everything the structured solvers and simulators consume, precomputed
// once from a validated spec. Row/column block q of an nK-sized matrix
// spans rows/cols [q*n, (q+1)*n).
struct DerivedMatrices {
  int K = 0, n = 0, m = 0, dw = 0, N = 0;

  Eigen::VectorXd pi;  // empirical cluster distribution, sums to 1

  std::vector<Eigen::MatrixXd> Gbar;      // (M_q/K) kron G_q, n x nK
  std::vector<Eigen::MatrixXd> Gammabar;  // (M_q/K) kron Gamma_q, n x nK

  Eigen::MatrixXd PiK;     // nK x nK block-diag pi_q I_n
  Eigen::MatrixXd NK;      // nK x nK block-diag N_q I_n
  Eigen::MatrixXd AK;      // nK x nK block-diag A_q
  Eigen::MatrixXd BK;      // nK x mK block-diag B_q
  Eigen::MatrixXd GK;      // nK x nK stacked rows Gbar_q
  Eigen::MatrixXd GammaK;  // nK x nK stacked rows Gammabar_q
  Eigen::MatrixXd QK;      // nK x nK block-diag Q_q
  Eigen::MatrixXd RK;      // mK x mK block-diag R_q
  Eigen::MatrixXd HK;      // nK x nK block-diag H_q
  Eigen::MatrixXd SigmaK;  // nK x K*dw block-diag Sigma_q
  Eigen::MatrixXd DK;      // NK * GK * NK^-1, column blocks D_q
  Eigen::MatrixXd Qbar;    // nK x nK, row blocks Qbar_q
  Eigen::MatrixXd Hbar;    // nK x nK, row blocks Hbar_q

  std::vector<Eigen::MatrixXd> S;     // B_q R_q^-1 B_q^T, n x n
  std::vector<Eigen::MatrixXd> Rinv;  // R_q^-1, m x m

  // Column block q of DK (nK x n).
  Eigen::MatrixXd D_col(int q) const { return DK.middleCols(q * n, n); }
  // Row block q of Qbar / Hbar (n x nK).
  Eigen::MatrixXd Qbar_row(int q) const { return Qbar.middleRows(q * n, n); }
  Eigen::MatrixXd Hbar_row(int q) const { return Hbar.middleRows(q * n, n); }

  // Block selectors for the estimator: 1 on observed (neighbor) blocks of
  // cluster q, 0 elsewhere; the complement mask covers the rest.
  Eigen::ArrayXd observed_mask(int q) const;
  Eigen::ArrayXd unobserved_mask(int q) const;

 private:
  friend DerivedMatrices derive_matrices(const SystemSpec&);
  Eigen::MatrixXd E_;  // copy of topology.E for the masks
};

// Parses the JSON configuration text and validates it. Throws ParseError on
// malformed text, ValidationError (naming the field) on contract violations.
SystemSpec load_spec(const std::string& config_text);
SystemSpec load_spec_file(const std::string& path);

// Re-runs validation on an already-built spec; returns warnings (e.g. a
// nonzero coupling weight on a non-communication edge). Throws on errors.
std::vector<std::string> validate(const SystemSpec& spec);

// Derived matrices per the Kronecker-form rewrite of the model. Pure:
// equal specs produce bitwise-equal results.
DerivedMatrices derive_matrices(const SystemSpec& spec);

// Ascending indices { p : e_qp = 1 }. Throws std::out_of_range on bad q.
// Indices are 0-based here and everywhere in the library.
std::vector<int> neighbor_set(const NetworkTopology& topology, int q);

// Kronecker product per the usual definition (a_ij * B blocks).
Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// Stacked initial mean vec(mbar_1, ..., mbar_K), length nK.
Eigen::VectorXd stacked_init_mean(const SystemSpec& spec);

}  // namespace mfsc
