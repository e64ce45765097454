#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mfsc/model.hpp"

namespace mfsc {

// Backward solutions of the two coupled Riccati equations on the shared
// uniform grid t_k = k*h, k = 0..steps. Terminal values are assigned, not
// integrated: P_q(T) = H_q and K^K(T) = -Hbar^K exactly.
//
// P_q is symmetrized after every integration step; K^K is not (its flow is
// not symmetric in general; only the value-function quadratic form
// symmetrizes it implicitly).
struct RiccatiSolution {
  double T = 0.0;
  int steps = 0;
  double h = 0.0;
  int n = 0, K = 0;

  std::vector<std::vector<Eigen::MatrixXd>> P;  // [k][q], n x n
  std::vector<Eigen::MatrixXd> KK;              // [k], nK x nK

  // Largest relative asymmetry of any P_q step before symmetrization;
  // diagnostic for drift of the symmetric flow.
  double max_p_asymmetry = 0.0;

  double t(int k) const { return h * k; }
  // Row block q of K^K(t_k) (n x nK).
  Eigen::MatrixXd kbar(int k, int q) const {
    return KK[k].middleRows(q * n, n);
  }
};

// Closed-loop matrices assembled per grid node:
//   Atilde_q = A_q - B_q R_q^-1 B_q^T P_q
//   Gtilde_q = Gbar_q - B_q R_q^-1 B_q^T Kbar_q
struct ClosedLoopMatrices {
  std::vector<std::vector<Eigen::MatrixXd>> Atilde;  // [k][q], n x n
  std::vector<std::vector<Eigen::MatrixXd>> Gtilde;  // [k][q], n x nK
};

struct RiccatiResiduals {
  double p_max = 0.0;  // max Frobenius residual of the P equation
  double k_max = 0.0;  // max Frobenius residual of the K equation
};

// Joint backward RK4 sweep for P and K on the shared grid. P and K are
// advanced as one stacked state so K's stages see stage-consistent P
// values. Throws SolverDivergence on non-finite entries.
RiccatiSolution solve_riccati(const SystemSpec& spec,
                              const DerivedMatrices& derived);

// Per-cluster P sweep only; cluster q's solution touches no other
// cluster's data.
std::vector<std::vector<Eigen::MatrixXd>> solve_P(
    const SystemSpec& spec, const DerivedMatrices& derived);

// K^K sweep. P is integrated again alongside K internally (stage
// consistency); the supplied P solution is used only to check the grid.
std::vector<Eigen::MatrixXd> solve_K(
    const SystemSpec& spec, const DerivedMatrices& derived,
    const std::vector<std::vector<Eigen::MatrixXd>>& p_solution);

// Pointwise certificate: centered-difference time derivative plus the
// equations' right-hand side at interior nodes, max Frobenius norm.
RiccatiResiduals riccati_residual(const RiccatiSolution& sol,
                                  const SystemSpec& spec,
                                  const DerivedMatrices& derived);

ClosedLoopMatrices closed_loop_matrices(const RiccatiSolution& sol,
                                        const DerivedMatrices& derived);

// Z^K(t_k): nK x nK^2 block-diagonal of B_q R_q^-1 B_q^T Kbar_q(t_k);
// block q multiplies cluster q's estimate in the stacked estimator form.
Eigen::MatrixXd zK_matrix(const RiccatiSolution& sol,
                          const DerivedMatrices& derived, int k);

}  // namespace mfsc
