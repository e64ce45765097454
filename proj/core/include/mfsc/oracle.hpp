#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mfsc/model.hpp"
#include "mfsc/riccati.hpp"

namespace mfsc {

struct TrajectoryBundle;

// Exact agent-by-agent expansion of the network-coupled LQ problem. Ground
// truth for small instances: one dense Riccati equation over all N agents
// jointly, no mean-field structure assumed.
struct StackedSystem {
  int agents = 0, n = 0, m = 0, dw = 0;
  Eigen::MatrixXd A;         // Nn x Nn: A_q diagonal + coupling blocks
  Eigen::MatrixXd B;         // Nn x Nm block-diagonal
  Eigen::MatrixXd D;         // Nn x Ndw block-diagonal Sigma_q
  Eigen::MatrixXd Q, H;      // Nn x Nn expanded cost weights
  Eigen::MatrixXd R;         // Nm x Nm block-diagonal
  Eigen::MatrixXd mean_map;  // nK x Nn: joint state -> global mean field
};

// Guard keeps the dense solve at desk scale.
inline constexpr int kStackedSizeGuard = 400;  // max N*n

StackedSystem stack_system(const SystemSpec& spec,
                           const DerivedMatrices& derived);

// Backward RK4 on the standard matrix Riccati equation with terminal H;
// symmetrized each step.
std::vector<Eigen::MatrixXd> solve_stacked_riccati(const StackedSystem& sys,
                                                   double T, int steps);

// Expected optimal cost of the stacked problem under the spec's initial
// law: E X0' P(0) X0 + int_0^T tr(D' P D) dt (trapezoid on the grid).
double stacked_value(const StackedSystem& sys,
                     const std::vector<Eigen::MatrixXd>& P,
                     const SystemSpec& spec, double h);

struct OracleComparison {
  double max_gain_dev = 0.0;      // stacked vs structured feedback, sampled
  double value_rel_dev = 0.0;     // stacked value vs corrected value function
  double max_form_rel_dev = 0.0;  // quadratic-form reconstruction of P
};

// (a) gain agreement on random joint states at sampled nodes, (b) value
// agreement, (c) P's quadratic form vs sum_i x_i' P_q x_i + xK' N^K K^K xK.
OracleComparison compare_structured_vs_stacked(
    const SystemSpec& spec, const DerivedMatrices& derived,
    const RiccatiSolution& riccati, const StackedSystem& sys,
    const std::vector<Eigen::MatrixXd>& stacked_P, int trials,
    std::uint64_t seed);

struct FbsdeResiduals {
  double control_max = 0.0;   // |u_i + R_q^-1 B_q' lambda_i|
  double terminal_max = 0.0;  // |lambda_i(T) - (H_q x_i(T) - Hbar_q xK(T))|
  double drift_max = 0.0;     // per-step conditional-mean drift residual
  double h = 0.0;
};

// Certifies the forward-backward system along recorded centralized paths
// with the candidate costate lambda_i = P_q x_i + Kbar_q xK. The drift
// check compares the one-step conditional-mean increment of lambda_i with
// the backward equation's drift; the martingale part never enters.
FbsdeResiduals fbsde_residual(const TrajectoryBundle& centralized,
                              const SystemSpec& spec,
                              const DerivedMatrices& derived,
                              const RiccatiSolution& riccati);

// One row of the CLI oracle report.
struct OracleCheck {
  std::string name;
  double deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

}  // namespace mfsc
