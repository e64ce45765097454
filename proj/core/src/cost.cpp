#include "mfsc/cost.hpp"

#include <cmath>

#include "mfsc/simulate.hpp"

namespace mfsc {

void CostWorkspace::resize(int n, int m) {
  track.resize(n);
  xKq.resize(n);
  uK.resize(m);
  dev.resize(n);
  wdev.resize(n);
  zeta.resize(n);
  wzeta.resize(n);
  v.resize(m);
  rv.resize(m);
  wu.resize(m);
}

void accumulate_cost_step(const SystemSpec& spec, const DerivedMatrices& d,
                          const Eigen::MatrixXd& x, const Eigen::MatrixXd* u,
                          const Eigen::VectorXd& xK, double weight,
                          bool terminal, double& j1, double& j2,
                          Eigen::VectorXd& j_agent, CostWorkspace& ws) {
  int off = 0;
  for (int q = 0; q < d.K; ++q) {
    const ClusterSpec& c = spec.clusters[q];
    const int Nq = c.count;
    const Eigen::MatrixXd& W = terminal ? c.H : c.Q;

    ws.track.noalias() = d.Gammabar[q] * xK;
    ws.xKq = xK.segment(q * d.n, d.n);

    // J1 state part: N_q |x^K_q - Gammabar_q x^K|^2_W
    ws.dev = ws.xKq - ws.track;
    ws.wdev.noalias() = W * ws.dev;
    j1 += weight * Nq * ws.dev.dot(ws.wdev);

    if (!terminal && u != nullptr) {
      ws.uK.setZero();
      for (int i = 0; i < Nq; ++i) ws.uK += u->col(off + i);
      ws.uK /= double(Nq);
      ws.rv.noalias() = c.R * ws.uK;
      j1 += weight * Nq * ws.uK.dot(ws.rv);
    }

    for (int i = 0; i < Nq; ++i) {
      const int a = off + i;
      ws.dev = x.col(a) - ws.track;
      ws.wdev.noalias() = W * ws.dev;
      double ji = ws.dev.dot(ws.wdev);

      ws.zeta = x.col(a) - ws.xKq;
      ws.wzeta.noalias() = W * ws.zeta;
      j2 += weight * ws.zeta.dot(ws.wzeta);

      if (!terminal && u != nullptr) {
        ws.wu.noalias() = c.R * u->col(a);
        ji += u->col(a).dot(ws.wu);
        ws.v = u->col(a) - ws.uK;
        ws.rv.noalias() = c.R * ws.v;
        j2 += weight * ws.v.dot(ws.rv);
      }
      j_agent(a) += weight * ji;
    }
    off += Nq;
  }
}

namespace {

CostReport evaluate_bundle(const TrajectoryBundle& bundle,
                           const SystemSpec& spec, const DerivedMatrices& d) {
  if (bundle.u.empty() || bundle.u[0].empty()) {
    throw ValidationError("trajectory bundle has no recorded controls");
  }
  CostReport report;
  report.paths = bundle.paths;
  report.h = spec.dt();
  report.j_agent_mean = Eigen::VectorXd::Zero(d.N);

  CostWorkspace ws;
  ws.resize(d.n, d.m);
  const double h = spec.dt();

  for (int p = 0; p < bundle.paths; ++p) {
    double j1 = 0.0, j2 = 0.0;
    Eigen::VectorXd j_agent = Eigen::VectorXd::Zero(d.N);
    for (int k = 0; k < bundle.steps; ++k) {
      accumulate_cost_step(spec, d, bundle.x[p][k], &bundle.u[p][k],
                           bundle.xK[p][k], h, false, j1, j2, j_agent, ws);
    }
    accumulate_cost_step(spec, d, bundle.x[p][bundle.steps], nullptr,
                         bundle.xK[p][bundle.steps], 1.0, true, j1, j2,
                         j_agent, ws);
    report.j_soc_per_path.push_back(j_agent.sum());
    report.j1_per_path.push_back(j1);
    report.j2_per_path.push_back(j2);
    report.j_agent_mean += j_agent;
  }

  const int P = bundle.paths;
  report.j_agent_mean /= double(P);
  double sum = 0.0;
  for (double v : report.j_soc_per_path) sum += v;
  report.j_soc_mean = sum / P;
  double ss = 0.0;
  for (double v : report.j_soc_per_path) {
    ss += (v - report.j_soc_mean) * (v - report.j_soc_mean);
  }
  report.j_soc_se = P > 1 ? std::sqrt(ss / (P - 1.0) / P) : 0.0;
  double s1 = 0.0, s2 = 0.0;
  for (double v : report.j1_per_path) s1 += v;
  for (double v : report.j2_per_path) s2 += v;
  report.j1_mean = s1 / P;
  report.j2_mean = s2 / P;
  return report;
}

}  // namespace

CostReport social_cost(const TrajectoryBundle& bundle, const SystemSpec& spec,
                       const DerivedMatrices& derived) {
  return evaluate_bundle(bundle, spec, derived);
}

std::pair<double, double> cost_decomposition(const TrajectoryBundle& bundle,
                                             const SystemSpec& spec,
                                             const DerivedMatrices& derived) {
  const CostReport report = evaluate_bundle(bundle, spec, derived);
  return {report.j1_mean, report.j2_mean};
}

namespace {

// Trace integral of the additive-noise correction by trapezoid rule.
double noise_trace_integral(const SystemSpec& spec, const DerivedMatrices& d,
                            const RiccatiSolution& sol) {
  auto integrand = [&](int k) {
    double val = 0.0;
    for (int q = 0; q < d.K; ++q) {
      const Eigen::MatrixXd& Sigma = spec.clusters[q].Sigma;
      val += spec.clusters[q].count *
             (Sigma.transpose() * sol.P[k][q] * Sigma).trace();
      val += (Sigma.transpose() *
              sol.KK[k].block(q * d.n, q * d.n, d.n, d.n) * Sigma)
                 .trace();
    }
    return val;
  };
  double integral = 0.5 * (integrand(0) + integrand(sol.steps));
  for (int k = 1; k < sol.steps; ++k) integral += integrand(k);
  return integral * sol.h;
}

}  // namespace

ValuePair value_function(const SystemSpec& spec, const DerivedMatrices& d,
                         const RiccatiSolution& sol) {
  // E <P_q(0) x_i0, x_i0> = mbar_q' P mbar_q + tr(P cov_q), summed over the
  // N_q agents of each cluster.
  double stated = 0.0;
  for (int q = 0; q < d.K; ++q) {
    const ClusterSpec& c = spec.clusters[q];
    stated += c.count * (c.init_mean.dot(sol.P[0][q] * c.init_mean) +
                         (sol.P[0][q] * c.init_cov).trace());
  }
  // E <N^K K^K(0) x^K_0, x^K_0>; block p of x^K_0 has covariance cov_p/N_p,
  // so the trace term reduces to sum_p tr(K^K_pp(0) cov_p).
  const Eigen::VectorXd mbar = stacked_init_mean(spec);
  const Eigen::MatrixXd NKK0 = d.NK * sol.KK[0];
  stated += mbar.dot(NKK0 * mbar);
  for (int q = 0; q < d.K; ++q) {
    stated += (sol.KK[0].block(q * d.n, q * d.n, d.n, d.n) *
               spec.clusters[q].init_cov)
                  .trace();
  }

  ValuePair out;
  out.stated = stated;
  out.corrected = stated + noise_trace_integral(spec, d, sol);
  return out;
}

ValuePair value_function(const SystemSpec& spec, const DerivedMatrices& d,
                         const RiccatiSolution& sol,
                         const std::vector<Eigen::MatrixXd>& x0_samples) {
  if (x0_samples.empty()) {
    throw ValidationError("value_function needs at least one initial sample");
  }
  double stated = 0.0;
  for (const Eigen::MatrixXd& x0 : x0_samples) {
    if (x0.rows() != d.n || x0.cols() != d.N) {
      throw ValidationError("initial sample has wrong shape");
    }
    Eigen::VectorXd xK0(d.n * d.K);
    int off = 0;
    for (int q = 0; q < d.K; ++q) {
      const int Nq = spec.clusters[q].count;
      xK0.segment(q * d.n, d.n) =
          x0.middleCols(off, Nq).rowwise().sum() / double(Nq);
      off += Nq;
    }
    double v = 0.0;
    off = 0;
    for (int q = 0; q < d.K; ++q) {
      const int Nq = spec.clusters[q].count;
      for (int i = 0; i < Nq; ++i) {
        v += x0.col(off + i).dot(sol.P[0][q] * x0.col(off + i));
      }
      off += Nq;
    }
    v += xK0.dot(d.NK * sol.KK[0] * xK0);
    stated += v;
  }
  stated /= double(x0_samples.size());

  ValuePair out;
  out.stated = stated;
  out.corrected = stated + noise_trace_integral(spec, d, sol);
  return out;
}

}  // namespace mfsc
