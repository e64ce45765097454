#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "mfsc/model.hpp"
#include "mfsc/riccati.hpp"

namespace mfsc {

struct TrajectoryBundle;
struct EstimatorTrace;

// Initial estimate of cluster q for the global mean field: observed blocks
// copy the realized x^K_p(0), unobserved blocks start at mbar_p. Column q of
// the returned nK x K matrix is cluster q's estimate. Only neighbor blocks
// of observed_xK0 are read.
Eigen::MatrixXd init_estimator(const SystemSpec& spec,
                               const DerivedMatrices& derived,
                               const Eigen::VectorXd& observed_xK0);

// Advance cluster q's estimate from node k to k+1. Observed blocks copy the
// neighbor mean fields realized at k+1; unobserved blocks take one Euler
// step of the mean-field approximation flow with cluster-p closed-loop
// matrices. Reads only neighbor blocks of observed_xK_next.
void step_estimator(Eigen::Ref<Eigen::VectorXd> estimate_q, int q,
                    const SystemSpec& spec, const DerivedMatrices& derived,
                    const ClosedLoopMatrices& cl, int k,
                    const Eigen::VectorXd& observed_xK_next);

// Per-step mean-square estimation errors, averaged over paths:
//   mse_check(k, q) = E |xcheck^K(t_k) - xbar^{K,q}(t_k)|^2
//   mse_hat  (k, q) = E |xhat^K(t_k)   - xbar^{K,q}(t_k)|^2  (coupled run)
struct EstimationErrorSeries {
  Eigen::MatrixXd mse_check;                 // (steps+1) x K
  std::optional<Eigen::MatrixXd> mse_hat;    // present iff coupled run given
  Eigen::VectorXd sup_check;                 // per-cluster sup over time
  std::optional<Eigen::VectorXd> sup_hat;
};

EstimationErrorSeries estimation_errors(
    const TrajectoryBundle& distributed, const EstimatorTrace& trace,
    const TrajectoryBundle* centralized = nullptr);

}  // namespace mfsc
