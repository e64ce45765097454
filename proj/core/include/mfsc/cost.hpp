#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mfsc/model.hpp"
#include "mfsc/riccati.hpp"

namespace mfsc {

struct TrajectoryBundle;

// Social-cost evaluation of recorded trajectories. Running terms use
// left-endpoint quadrature on the simulation grid (matching the
// zero-order-hold control convention); the terminal term is exact.
struct CostReport {
  int paths = 0;
  double h = 0.0;
  std::string quadrature = "left-endpoint";

  double j_soc_mean = 0.0;
  double j_soc_se = 0.0;
  double j1_mean = 0.0;
  double j2_mean = 0.0;
  Eigen::VectorXd j_agent_mean;       // per-agent expected cost
  std::vector<double> j_soc_per_path; // for downstream standard errors
  std::vector<double> j1_per_path;
  std::vector<double> j2_per_path;
};

struct ValuePair {
  double stated = 0.0;     // quadratic form in P(0), K^K(0) only
  double corrected = 0.0;  // stated + additive-noise trace integral
};

// Workspace for the per-step cost kernel; reused across steps to keep the
// streaming accumulation allocation-free.
struct CostWorkspace {
  Eigen::VectorXd track, xKq, uK, dev, wdev, zeta, wzeta, v, rv, wu;
  void resize(int n, int m);
};

// One quadrature step shared by the streaming simulator and the
// bundle-based evaluators: adds weight * (per-agent integrands) into
// j_agent and the J1/J2 split. Pass u = nullptr (terminal = true) for the
// terminal term, which uses H_q and has no control part.
void accumulate_cost_step(const SystemSpec& spec, const DerivedMatrices& derived,
                          const Eigen::MatrixXd& x, const Eigen::MatrixXd* u,
                          const Eigen::VectorXd& xK, double weight,
                          bool terminal, double& j1, double& j2,
                          Eigen::VectorXd& j_agent, CostWorkspace& ws);

CostReport social_cost(const TrajectoryBundle& bundle, const SystemSpec& spec,
                       const DerivedMatrices& derived);

// Lemma-style split J_soc = J1 + J2 (means over paths). The identity holds
// pathwise for arbitrary controls; social_cost fills the same fields.
std::pair<double, double> cost_decomposition(const TrajectoryBundle& bundle,
                                             const SystemSpec& spec,
                                             const DerivedMatrices& derived);

// Expected optimal cost from the Riccati solution and the initial law
// (closed-form second moments). `stated` is the bare quadratic form;
// `corrected` adds the additive-noise trace integral
//   int_0^T sum_q [ N_q tr(Sigma_q^T P_q Sigma_q)
//                   + tr(Sigma_q^T (K^K)_qq Sigma_q) ] dt
// evaluated by trapezoid on the grid.
ValuePair value_function(const SystemSpec& spec, const DerivedMatrices& derived,
                         const RiccatiSolution& riccati);

// Empirical variant over sampled joint initial states (n x N columns per
// agent); the trace correction is unchanged.
ValuePair value_function(const SystemSpec& spec, const DerivedMatrices& derived,
                         const RiccatiSolution& riccati,
                         const std::vector<Eigen::MatrixXd>& x0_samples);

}  // namespace mfsc
