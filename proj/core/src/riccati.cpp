#include "mfsc/riccati.hpp"

#include <cmath>
#include <sstream>

namespace mfsc {
namespace {

// -dP_q/dt = P A_q + A_q^T P + Q_q - P S_q P
Eigen::MatrixXd p_equation_rhs(const ClusterSpec& c, const Eigen::MatrixXd& S,
                               const Eigen::MatrixXd& P) {
  return P * c.A + c.A.transpose() * P + c.Q - P * S * P;
}

// -dK^K/dt, given the block-diagonal assembly PK of the P_q. Follows the
// coupled equation term by term, including both quadratic couplings
// K S (P + K) and P S K.
Eigen::MatrixXd k_equation_rhs(const DerivedMatrices& d,
                               const Eigen::MatrixXd& SK,
                               const Eigen::MatrixXd& PK,
                               const Eigen::MatrixXd& K) {
  return (d.AK + d.DK).transpose() * K + K * (d.AK + d.GK) + PK * d.GK +
         d.DK.transpose() * PK - d.Qbar - K * SK * (PK + K) - PK * SK * K;
}

Eigen::MatrixXd assemble_block_diag(const std::vector<Eigen::MatrixXd>& blocks,
                                    int n, int K) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * K, n * K);
  for (int q = 0; q < K; ++q) out.block(q * n, q * n, n, n) = blocks[q];
  return out;
}

struct JointState {
  std::vector<Eigen::MatrixXd> P;  // per cluster
  Eigen::MatrixXd K;               // nK x nK
};

JointState joint_rhs(const SystemSpec& spec, const DerivedMatrices& d,
                     const Eigen::MatrixXd& SK, const JointState& y) {
  JointState f;
  f.P.reserve(d.K);
  for (int q = 0; q < d.K; ++q) {
    // backward flow: dP/dt = -(rhs)
    f.P.push_back(-p_equation_rhs(spec.clusters[q], d.S[q], y.P[q]));
  }
  const Eigen::MatrixXd PK = assemble_block_diag(y.P, d.n, d.K);
  f.K = -k_equation_rhs(d, SK, PK, y.K);
  return f;
}

JointState axpy(const JointState& y, double a, const JointState& f) {
  JointState out;
  out.P.reserve(y.P.size());
  for (size_t q = 0; q < y.P.size(); ++q) out.P.push_back(y.P[q] + a * f.P[q]);
  out.K = y.K + a * f.K;
  return out;
}

bool all_finite(const JointState& y) {
  for (const auto& p : y.P) {
    if (!p.allFinite()) return false;
  }
  return y.K.allFinite();
}

}  // namespace

RiccatiSolution solve_riccati(const SystemSpec& spec,
                              const DerivedMatrices& d) {
  RiccatiSolution sol;
  sol.T = spec.horizon;
  sol.steps = spec.steps;
  sol.h = spec.dt();
  sol.n = d.n;
  sol.K = d.K;

  const Eigen::MatrixXd SK = d.BK * d.RK.inverse() * d.BK.transpose();

  JointState y;
  for (int q = 0; q < d.K; ++q) y.P.push_back(spec.clusters[q].H);
  y.K = -d.Hbar;

  sol.P.assign(sol.steps + 1, {});
  sol.KK.assign(sol.steps + 1, Eigen::MatrixXd());
  sol.P[sol.steps] = y.P;
  sol.KK[sol.steps] = y.K;

  const double h = -sol.h;  // backward in time
  for (int k = sol.steps; k > 0; --k) {
    const JointState f1 = joint_rhs(spec, d, SK, y);
    const JointState f2 = joint_rhs(spec, d, SK, axpy(y, h / 2.0, f1));
    const JointState f3 = joint_rhs(spec, d, SK, axpy(y, h / 2.0, f2));
    const JointState f4 = joint_rhs(spec, d, SK, axpy(y, h, f3));

    for (int q = 0; q < d.K; ++q) {
      y.P[q] += (h / 6.0) *
                (f1.P[q] + 2.0 * f2.P[q] + 2.0 * f3.P[q] + f4.P[q]);
      const double scale = std::max(1.0, y.P[q].cwiseAbs().maxCoeff());
      const double asym =
          (y.P[q] - y.P[q].transpose()).cwiseAbs().maxCoeff() / scale;
      sol.max_p_asymmetry = std::max(sol.max_p_asymmetry, asym);
      y.P[q] = 0.5 * (y.P[q] + y.P[q].transpose()).eval();
    }
    y.K += (h / 6.0) * (f1.K + 2.0 * f2.K + 2.0 * f3.K + f4.K);

    if (!all_finite(y)) {
      std::ostringstream msg;
      msg << "Riccati sweep diverged near t = " << sol.t(k - 1)
          << " (non-finite entries); check the configuration and step size";
      throw SolverDivergence(msg.str());
    }
    sol.P[k - 1] = y.P;
    sol.KK[k - 1] = y.K;
  }
  return sol;
}

std::vector<std::vector<Eigen::MatrixXd>> solve_P(
    const SystemSpec& spec, const DerivedMatrices& d) {
  const int steps = spec.steps;
  const double h = -spec.dt();
  std::vector<std::vector<Eigen::MatrixXd>> P(steps + 1);

  for (int q = 0; q < d.K; ++q) {
    const ClusterSpec& c = spec.clusters[q];
    Eigen::MatrixXd y = c.H;
    if (P[steps].size() <= static_cast<size_t>(q)) P[steps].resize(d.K);
    P[steps][q] = y;
    for (int k = steps; k > 0; --k) {
      const Eigen::MatrixXd f1 = -p_equation_rhs(c, d.S[q], y);
      const Eigen::MatrixXd f2 =
          -p_equation_rhs(c, d.S[q], y + (h / 2.0) * f1);
      const Eigen::MatrixXd f3 =
          -p_equation_rhs(c, d.S[q], y + (h / 2.0) * f2);
      const Eigen::MatrixXd f4 = -p_equation_rhs(c, d.S[q], y + h * f3);
      y += (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
      y = 0.5 * (y + y.transpose()).eval();
      if (!y.allFinite()) {
        std::ostringstream msg;
        msg << "P sweep diverged for cluster " << q << " near t = "
            << spec.dt() * (k - 1);
        throw SolverDivergence(msg.str());
      }
      if (P[k - 1].size() <= static_cast<size_t>(q)) P[k - 1].resize(d.K);
      P[k - 1][q] = y;
    }
  }
  return P;
}

std::vector<Eigen::MatrixXd> solve_K(
    const SystemSpec& spec, const DerivedMatrices& d,
    const std::vector<std::vector<Eigen::MatrixXd>>& p_solution) {
  if (static_cast<int>(p_solution.size()) != spec.steps + 1) {
    throw ValidationError("P solution grid does not match spec.steps");
  }
  const RiccatiSolution sol = solve_riccati(spec, d);
  return sol.KK;
}

RiccatiResiduals riccati_residual(const RiccatiSolution& sol,
                                  const SystemSpec& spec,
                                  const DerivedMatrices& d) {
  RiccatiResiduals res;
  const Eigen::MatrixXd SK = d.BK * d.RK.inverse() * d.BK.transpose();
  for (int k = 1; k < sol.steps; ++k) {
    for (int q = 0; q < d.K; ++q) {
      const Eigen::MatrixXd dPdt =
          (sol.P[k + 1][q] - sol.P[k - 1][q]) / (2.0 * sol.h);
      const double r =
          (dPdt + p_equation_rhs(spec.clusters[q], d.S[q], sol.P[k][q]))
              .norm();
      res.p_max = std::max(res.p_max, r);
    }
    const Eigen::MatrixXd dKdt =
        (sol.KK[k + 1] - sol.KK[k - 1]) / (2.0 * sol.h);
    const Eigen::MatrixXd PK = assemble_block_diag(sol.P[k], d.n, d.K);
    const double r = (dKdt + k_equation_rhs(d, SK, PK, sol.KK[k])).norm();
    res.k_max = std::max(res.k_max, r);
  }
  return res;
}

ClosedLoopMatrices closed_loop_matrices(const RiccatiSolution& sol,
                                        const DerivedMatrices& d) {
  ClosedLoopMatrices cl;
  cl.Atilde.assign(sol.steps + 1, {});
  cl.Gtilde.assign(sol.steps + 1, {});
  for (int k = 0; k <= sol.steps; ++k) {
    cl.Atilde[k].reserve(d.K);
    cl.Gtilde[k].reserve(d.K);
    for (int q = 0; q < d.K; ++q) {
      cl.Atilde[k].push_back(d.AK.block(q * d.n, q * d.n, d.n, d.n) -
                             d.S[q] * sol.P[k][q]);
      cl.Gtilde[k].push_back(d.Gbar[q] - d.S[q] * sol.kbar(k, q));
    }
  }
  return cl;
}

Eigen::MatrixXd zK_matrix(const RiccatiSolution& sol,
                          const DerivedMatrices& d, int k) {
  const int n = d.n, K = d.K;
  const int nK = n * K;
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(nK, nK * K);
  for (int q = 0; q < K; ++q) {
    Z.block(q * n, q * nK, n, nK) = d.S[q] * sol.kbar(k, q);
  }
  return Z;
}

}  // namespace mfsc
