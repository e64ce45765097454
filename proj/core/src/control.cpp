#include "mfsc/control.hpp"

namespace mfsc {

GainSchedule build_gains(const SystemSpec& spec, const DerivedMatrices& d,
                         const RiccatiSolution& sol) {
  GainSchedule g;
  g.steps = sol.steps;
  g.n = d.n;
  g.m = d.m;
  g.K = d.K;
  g.F.assign(sol.steps + 1, {});
  g.Fbar.assign(sol.steps + 1, {});
  for (int k = 0; k <= sol.steps; ++k) {
    g.F[k].reserve(d.K);
    g.Fbar[k].reserve(d.K);
    for (int q = 0; q < d.K; ++q) {
      const Eigen::MatrixXd RinvBt =
          d.Rinv[q] * spec.clusters[q].B.transpose();
      g.F[k].push_back(RinvBt * sol.P[k][q]);
      g.Fbar[k].push_back(RinvBt * sol.kbar(k, q));
    }
  }
  return g;
}

Eigen::VectorXd feedback_control(const GainSchedule& gains, int q, int k,
                                 const Eigen::VectorXd& own_state,
                                 const Eigen::VectorXd& mean_field) {
  return -gains.F[k][q] * own_state - gains.Fbar[k][q] * mean_field;
}

Eigen::VectorXd centralized_control(const GainSchedule& gains, int q, int k,
                                    const Eigen::VectorXd& x_i,
                                    const Eigen::VectorXd& xK) {
  return feedback_control(gains, q, k, x_i, xK);
}

Eigen::VectorXd distributed_control(const GainSchedule& gains, int q, int k,
                                    const Eigen::VectorXd& x_i,
                                    const Eigen::VectorXd& xbar_Kq) {
  return feedback_control(gains, q, k, x_i, xbar_Kq);
}

Eigen::VectorXd average_cluster_control(const GainSchedule& gains, int q,
                                        int k, const Eigen::VectorXd& xK_q,
                                        const Eigen::VectorXd& xbar_Kq) {
  return feedback_control(gains, q, k, xK_q, xbar_Kq);
}

}  // namespace mfsc
