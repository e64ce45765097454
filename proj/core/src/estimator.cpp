#include "mfsc/estimator.hpp"

#include <sstream>

#include "mfsc/simulate.hpp"

namespace mfsc {

Eigen::MatrixXd init_estimator(const SystemSpec& spec,
                               const DerivedMatrices& d,
                               const Eigen::VectorXd& observed_xK0) {
  const int n = d.n, K = d.K;
  Eigen::MatrixXd est(n * K, K);
  for (int q = 0; q < K; ++q) {
    for (int p = 0; p < K; ++p) {
      if (spec.topology.E(q, p) == 1.0) {
        est.col(q).segment(p * n, n) = observed_xK0.segment(p * n, n);
      } else {
        est.col(q).segment(p * n, n) = spec.clusters[p].init_mean;
      }
    }
  }
  return est;
}

void step_estimator(Eigen::Ref<Eigen::VectorXd> estimate_q, int q,
                    const SystemSpec& spec, const DerivedMatrices& d,
                    const ClosedLoopMatrices& cl, int k,
                    const Eigen::VectorXd& observed_xK_next) {
  const int n = d.n;
  const double h = spec.dt();
  const Eigen::VectorXd old = estimate_q;
  for (int p = 0; p < d.K; ++p) {
    if (spec.topology.E(q, p) == 1.0) {
      estimate_q.segment(p * n, n) = observed_xK_next.segment(p * n, n);
    } else {
      estimate_q.segment(p * n, n) =
          old.segment(p * n, n) +
          h * (cl.Atilde[k][p] * old.segment(p * n, n) +
               cl.Gtilde[k][p] * old);
    }
  }
  if (!estimate_q.allFinite()) {
    std::ostringstream msg;
    msg << "estimator for cluster " << q << " diverged at step " << k + 1;
    throw SimulationDivergence(msg.str());
  }
}

EstimationErrorSeries estimation_errors(const TrajectoryBundle& distributed,
                                        const EstimatorTrace& trace,
                                        const TrajectoryBundle* centralized) {
  if (trace.steps != distributed.steps || trace.paths != distributed.paths) {
    throw ValidationError("estimator trace grid does not match the bundle");
  }
  if (centralized != nullptr &&
      (centralized->steps != distributed.steps ||
       centralized->paths != distributed.paths)) {
    throw ValidationError("centralized bundle grid does not match");
  }

  const int steps = distributed.steps;
  const int K = trace.K;
  EstimationErrorSeries out;
  out.mse_check = Eigen::MatrixXd::Zero(steps + 1, K);
  if (centralized != nullptr) {
    out.mse_hat = Eigen::MatrixXd::Zero(steps + 1, K);
  }

  for (int p = 0; p < distributed.paths; ++p) {
    for (int k = 0; k <= steps; ++k) {
      for (int q = 0; q < K; ++q) {
        out.mse_check(k, q) +=
            (distributed.xK[p][k] - trace.est[p][k].col(q)).squaredNorm();
        if (centralized != nullptr) {
          (*out.mse_hat)(k, q) +=
              (centralized->xK[p][k] - trace.est[p][k].col(q)).squaredNorm();
        }
      }
    }
  }
  out.mse_check /= double(distributed.paths);
  out.sup_check = out.mse_check.colwise().maxCoeff();
  if (out.mse_hat) {
    *out.mse_hat /= double(distributed.paths);
    out.sup_hat = out.mse_hat->colwise().maxCoeff();
  }
  return out;
}

}  // namespace mfsc
