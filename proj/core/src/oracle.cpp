#include "mfsc/oracle.hpp"

#include <random>
#include <sstream>

#include "mfsc/cost.hpp"
#include "mfsc/simulate.hpp"

namespace mfsc {

StackedSystem stack_system(const SystemSpec& spec,
                           const DerivedMatrices& d) {
  const int N = d.N, n = d.n, m = d.m, dw = d.dw, K = d.K;
  if (N * n > kStackedSizeGuard) {
    std::ostringstream msg;
    msg << "stacked system size N*n = " << N * n << " exceeds the guard "
        << kStackedSizeGuard;
    throw SizeGuardError(msg.str());
  }

  StackedSystem sys;
  sys.agents = N;
  sys.n = n;
  sys.m = m;
  sys.dw = dw;
  sys.A = Eigen::MatrixXd::Zero(N * n, N * n);
  sys.B = Eigen::MatrixXd::Zero(N * n, N * m);
  sys.D = Eigen::MatrixXd::Zero(N * n, N * dw);
  sys.R = Eigen::MatrixXd::Zero(N * m, N * m);
  sys.Q = Eigen::MatrixXd::Zero(N * n, N * n);
  sys.H = Eigen::MatrixXd::Zero(N * n, N * n);
  sys.mean_map = Eigen::MatrixXd::Zero(n * K, N * n);

  for (int p = 0; p < K; ++p) {
    const int off = spec.agent_offset(p);
    for (int j = 0; j < spec.clusters[p].count; ++j) {
      sys.mean_map.block(p * n, (off + j) * n, n, n) =
          Eigen::MatrixXd::Identity(n, n) / double(spec.clusters[p].count);
    }
  }

  for (int q = 0; q < K; ++q) {
    const ClusterSpec& cq = spec.clusters[q];
    const int offq = spec.agent_offset(q);
    for (int i = 0; i < cq.count; ++i) {
      const int a = offq + i;
      sys.A.block(a * n, a * n, n, n) += cq.A;
      sys.B.block(a * n, a * m, n, m) = cq.B;
      sys.D.block(a * n, a * dw, n, dw) = cq.Sigma;
      sys.R.block(a * m, a * m, m, m) = cq.R;
      // coupling G_q z_q^K expanded agent by agent
      for (int p = 0; p < K; ++p) {
        const int offp = spec.agent_offset(p);
        const double w =
            spec.topology.M(q, p) / (double(K) * spec.clusters[p].count);
        if (w == 0.0) continue;
        for (int j = 0; j < spec.clusters[p].count; ++j) {
          sys.A.block(a * n, (offp + j) * n, n, n) += w * cq.G;
        }
      }
      // |x_i - Gammabar_q x^K|^2 expanded through the selector
      Eigen::MatrixXd Si = -d.Gammabar[q] * sys.mean_map;
      Si.block(0, a * n, n, n) += Eigen::MatrixXd::Identity(n, n);
      sys.Q += Si.transpose() * cq.Q * Si;
      sys.H += Si.transpose() * cq.H * Si;
    }
  }
  return sys;
}

std::vector<Eigen::MatrixXd> solve_stacked_riccati(const StackedSystem& sys,
                                                   double T, int steps) {
  const Eigen::MatrixXd S =
      sys.B * sys.R.inverse() * sys.B.transpose();
  auto rhs = [&](const Eigen::MatrixXd& P) -> Eigen::MatrixXd {
    return -(P * sys.A + sys.A.transpose() * P + sys.Q - P * S * P);
  };

  std::vector<Eigen::MatrixXd> P(steps + 1);
  Eigen::MatrixXd y = sys.H;
  P[steps] = y;
  const double h = -T / steps;
  for (int k = steps; k > 0; --k) {
    const Eigen::MatrixXd f1 = rhs(y);
    const Eigen::MatrixXd f2 = rhs(y + (h / 2.0) * f1);
    const Eigen::MatrixXd f3 = rhs(y + (h / 2.0) * f2);
    const Eigen::MatrixXd f4 = rhs(y + h * f3);
    y += (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
    y = 0.5 * (y + y.transpose()).eval();
    if (!y.allFinite()) {
      throw SolverDivergence("stacked Riccati sweep diverged");
    }
    P[k - 1] = y;
  }
  return P;
}

double stacked_value(const StackedSystem& sys,
                     const std::vector<Eigen::MatrixXd>& P,
                     const SystemSpec& spec, double h) {
  const int n = sys.n;
  Eigen::VectorXd mean(sys.agents * n);
  for (int a = 0; a < sys.agents; ++a) {
    mean.segment(a * n, n) =
        spec.clusters[spec.cluster_of_agent(a)].init_mean;
  }
  double value = mean.dot(P[0] * mean);
  for (int a = 0; a < sys.agents; ++a) {
    value += (P[0].block(a * n, a * n, n, n) *
              spec.clusters[spec.cluster_of_agent(a)].init_cov)
                 .trace();
  }
  auto integrand = [&](int k) {
    return (sys.D.transpose() * P[k] * sys.D).trace();
  };
  const int steps = static_cast<int>(P.size()) - 1;
  double integral = 0.5 * (integrand(0) + integrand(steps));
  for (int k = 1; k < steps; ++k) integral += integrand(k);
  return value + integral * h;
}

OracleComparison compare_structured_vs_stacked(
    const SystemSpec& spec, const DerivedMatrices& d,
    const RiccatiSolution& riccati, const StackedSystem& sys,
    const std::vector<Eigen::MatrixXd>& stacked_P, int trials,
    std::uint64_t seed) {
  if (static_cast<int>(stacked_P.size()) != riccati.steps + 1) {
    throw ValidationError("stacked and structured grids do not match");
  }
  OracleComparison cmp;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int n = d.n, m = d.m, N = d.N;
  const Eigen::MatrixXd RinvBt = sys.R.inverse() * sys.B.transpose();

  // 20 grid nodes, evenly spaced, endpoints included.
  std::vector<int> nodes;
  const int node_count = std::min(20, riccati.steps + 1);
  for (int j = 0; j < node_count; ++j) {
    nodes.push_back(j * riccati.steps / std::max(1, node_count - 1));
  }

  for (int trial = 0; trial < trials; ++trial) {
    Eigen::VectorXd X(N * n);
    for (int i = 0; i < X.size(); ++i) X(i) = normal(rng);
    const Eigen::VectorXd xK = sys.mean_map * X;

    for (int node : nodes) {
      const Eigen::VectorXd u_stacked = -(RinvBt * (stacked_P[node] * X));
      for (int a = 0; a < N; ++a) {
        const int q = spec.cluster_of_agent(a);
        const Eigen::VectorXd u_struct =
            -d.Rinv[q] * spec.clusters[q].B.transpose() *
            (riccati.P[node][q] * X.segment(a * n, n) +
             riccati.kbar(node, q) * xK);
        cmp.max_gain_dev =
            std::max(cmp.max_gain_dev,
                     (u_stacked.segment(a * m, m) - u_struct)
                         .cwiseAbs()
                         .maxCoeff());
      }
      // quadratic-form reconstruction
      const double stacked_form = X.dot(stacked_P[node] * X);
      double structured_form = xK.dot(d.NK * riccati.KK[node] * xK);
      for (int a = 0; a < N; ++a) {
        const int q = spec.cluster_of_agent(a);
        structured_form += X.segment(a * n, n)
                               .dot(riccati.P[node][q] * X.segment(a * n, n));
      }
      const double scale = std::max(1.0, std::abs(stacked_form));
      cmp.max_form_rel_dev =
          std::max(cmp.max_form_rel_dev,
                   std::abs(stacked_form - structured_form) / scale);
    }
  }

  const double v_stacked = stacked_value(sys, stacked_P, spec, riccati.h);
  const double v_struct = value_function(spec, d, riccati).corrected;
  cmp.value_rel_dev = std::abs(v_stacked - v_struct) /
                      std::max(1e-12, std::abs(v_stacked));
  return cmp;
}

FbsdeResiduals fbsde_residual(const TrajectoryBundle& b,
                              const SystemSpec& spec,
                              const DerivedMatrices& d,
                              const RiccatiSolution& sol) {
  if (b.steps != sol.steps) {
    throw ValidationError("bundle and Riccati grids do not match");
  }
  FbsdeResiduals res;
  res.h = sol.h;
  const int n = d.n, K = d.K, N = d.N;
  const double h = sol.h;

  auto lambda_at = [&](int p, int k, Eigen::MatrixXd& lambda,
                       Eigen::VectorXd& lambdaK) {
    const Eigen::VectorXd& xK = b.xK[p][k];
    for (int a = 0; a < N; ++a) {
      const int q = spec.cluster_of_agent(a);
      lambda.col(a) =
          sol.P[k][q] * b.x[p][k].col(a) + sol.kbar(k, q) * xK;
    }
    int off = 0;
    for (int q = 0; q < K; ++q) {
      const int Nq = spec.clusters[q].count;
      lambdaK.segment(q * n, n) =
          lambda.middleCols(off, Nq).rowwise().sum() / double(Nq);
      off += Nq;
    }
  };

  Eigen::MatrixXd lambda(n, N), lambda_next(n, N);
  Eigen::VectorXd lambdaK(n * K), lambdaK_next(n * K);
  Eigen::MatrixXd xmean(n, N);
  Eigen::VectorXd xKmean(n * K);

  for (int p = 0; p < b.paths; ++p) {
    // (ii) terminal condition, assignment-exact
    lambda_at(p, b.steps, lambda, lambdaK);
    for (int a = 0; a < N; ++a) {
      const int q = spec.cluster_of_agent(a);
      const Eigen::VectorXd rhs =
          spec.clusters[q].H * b.x[p][b.steps].col(a) -
          d.Hbar_row(q) * b.xK[p][b.steps];
      res.terminal_max = std::max(
          res.terminal_max, (lambda.col(a) - rhs).cwiseAbs().maxCoeff());
    }

    for (int k = 0; k < b.steps; ++k) {
      lambda_at(p, k, lambda, lambdaK);
      const Eigen::VectorXd& xK = b.xK[p][k];

      // (i) open-loop consistency of the recorded feedback controls
      for (int a = 0; a < N; ++a) {
        const int q = spec.cluster_of_agent(a);
        const Eigen::VectorXd u_ref =
            -d.Rinv[q] * spec.clusters[q].B.transpose() * lambda.col(a);
        res.control_max =
            std::max(res.control_max,
                     (b.u[p][k].col(a) - u_ref).cwiseAbs().maxCoeff());
      }

      // (iii) conditional-mean increment vs backward drift
      int off = 0;
      for (int q = 0; q < K; ++q) {
        const ClusterSpec& c = spec.clusters[q];
        const int Nq = c.count;
        const Eigen::VectorXd coupling = d.Gbar[q] * xK;
        for (int i = 0; i < Nq; ++i) {
          const int a = off + i;
          xmean.col(a) = b.x[p][k].col(a) +
                         h * (c.A * b.x[p][k].col(a) +
                              c.B * b.u[p][k].col(a) + coupling);
        }
        off += Nq;
      }
      int off2 = 0;
      for (int q = 0; q < K; ++q) {
        const int Nq = spec.clusters[q].count;
        xKmean.segment(q * n, n) =
            xmean.middleCols(off2, Nq).rowwise().sum() / double(Nq);
        off2 += Nq;
      }
      for (int a = 0; a < N; ++a) {
        const int q = spec.cluster_of_agent(a);
        lambda_next.col(a) =
            sol.P[k + 1][q] * xmean.col(a) + sol.kbar(k + 1, q) * xKmean;
        const Eigen::VectorXd drift =
            spec.clusters[q].A.transpose() * lambda.col(a) +
            d.D_col(q).transpose() * lambdaK +
            spec.clusters[q].Q * b.x[p][k].col(a) - d.Qbar_row(q) * xK;
        const double r =
            (lambda_next.col(a) - lambda.col(a) + h * drift).norm();
        res.drift_max = std::max(res.drift_max, r);
      }
    }
  }
  return res;
}

}  // namespace mfsc
