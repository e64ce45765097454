#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mfsc/model.hpp"
#include "mfsc/riccati.hpp"

namespace mfsc {

// Time-varying feedback gains precomputed per grid node:
//   F_q    = R_q^-1 B_q^T P_q      (applied to the agent's own state)
//   Fbar_q = R_q^-1 B_q^T Kbar_q   (applied to the global mean-field vector)
// Immutable after construction; evaluation is pure.
struct GainSchedule {
  int steps = 0;
  int n = 0, m = 0, K = 0;
  std::vector<std::vector<Eigen::MatrixXd>> F;     // [k][q], m x n
  std::vector<std::vector<Eigen::MatrixXd>> Fbar;  // [k][q], m x nK
};

GainSchedule build_gains(const SystemSpec& spec, const DerivedMatrices& derived,
                         const RiccatiSolution& sol);

// Shared feedback kernel: u = -F_q x - Fbar_q mf. The centralized law feeds
// the realized global mean field, the distributed law feeds the cluster's
// estimate; both run through this one code path.
Eigen::VectorXd feedback_control(const GainSchedule& gains, int q, int k,
                                 const Eigen::VectorXd& own_state,
                                 const Eigen::VectorXd& mean_field);

Eigen::VectorXd centralized_control(const GainSchedule& gains, int q, int k,
                                    const Eigen::VectorXd& x_i,
                                    const Eigen::VectorXd& xK);

Eigen::VectorXd distributed_control(const GainSchedule& gains, int q, int k,
                                    const Eigen::VectorXd& x_i,
                                    const Eigen::VectorXd& xbar_Kq);

// Average control of cluster q: feedback on the cluster mean field itself.
Eigen::VectorXd average_cluster_control(const GainSchedule& gains, int q,
                                        int k, const Eigen::VectorXd& xK_q,
                                        const Eigen::VectorXd& xbar_Kq);

}  // namespace mfsc
