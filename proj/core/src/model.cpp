#include "mfsc/model.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mfsc {
namespace {

using nlohmann::json;

Eigen::MatrixXd parse_matrix(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ValidationError(field + " must be a non-empty nested array");
  }
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.front().size());
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ValidationError(field + " has ragged rows");
    }
    for (int c = 0; c < cols; ++c) {
      if (!row.at(c).is_number()) {
        throw ValidationError(field + " has a non-numeric entry");
      }
      out(r, c) = row.at(c).get<double>();
    }
  }
  return out;
}

Eigen::VectorXd parse_vector(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) {
    throw ValidationError(field + " must be a non-empty array");
  }
  Eigen::VectorXd out(j.size());
  for (int i = 0; i < static_cast<int>(j.size()); ++i) {
    if (!j.at(i).is_number()) {
      throw ValidationError(field + " has a non-numeric entry");
    }
    out(i) = j.at(i).get<double>();
  }
  return out;
}

const json& require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ValidationError(where + "." + key + " missing");
  }
  return *it;
}

void check_dims(const Eigen::MatrixXd& mat, int rows, int cols,
                const std::string& field) {
  if (mat.rows() != rows || mat.cols() != cols) {
    std::ostringstream msg;
    msg << field << " has shape " << mat.rows() << "x" << mat.cols()
        << ", expected " << rows << "x" << cols;
    throw ValidationError(msg.str());
  }
}

void check_symmetric(const Eigen::MatrixXd& mat, const std::string& field) {
  const double scale = std::max(1.0, mat.cwiseAbs().maxCoeff());
  if ((mat - mat.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ValidationError(field + " not symmetric");
  }
}

double min_eigenvalue(const Eigen::MatrixXd& mat) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mat,
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

int SystemSpec::total_agents() const {
  int total = 0;
  for (const auto& c : clusters) total += c.count;
  return total;
}

int SystemSpec::cluster_of_agent(int agent) const {
  int offset = 0;
  for (int q = 0; q < K(); ++q) {
    offset += clusters[q].count;
    if (agent < offset) return q;
  }
  throw std::out_of_range("agent index out of range");
}

int SystemSpec::agent_offset(int q) const {
  int offset = 0;
  for (int p = 0; p < q; ++p) offset += clusters[p].count;
  return offset;
}

SystemSpec load_spec(const std::string& config_text) {
  json root;
  try {
    root = json::parse(config_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config parse error: ") + e.what());
  }

  SystemSpec spec;
  spec.horizon = require(root, "horizon", "config").get<double>();
  spec.steps = require(root, "steps", "config").get<int>();
  spec.state_dim = require(root, "state_dim", "config").get<int>();
  spec.control_dim = require(root, "control_dim", "config").get<int>();
  spec.noise_dim = root.value("noise_dim", 1);

  const json& clusters = require(root, "clusters", "config");
  if (!clusters.is_array() || clusters.empty()) {
    throw ValidationError("config.clusters must be a non-empty array");
  }
  for (int q = 0; q < static_cast<int>(clusters.size()); ++q) {
    const json& c = clusters.at(q);
    const std::string where = "clusters[" + std::to_string(q) + "]";
    ClusterSpec cs;
    cs.label = c.value("label", "cluster" + std::to_string(q));
    cs.count = require(c, "count", where).get<int>();
    cs.A = parse_matrix(require(c, "A", where), where + ".A");
    cs.B = parse_matrix(require(c, "B", where), where + ".B");
    cs.G = parse_matrix(require(c, "G", where), where + ".G");
    cs.Sigma = parse_matrix(require(c, "Sigma", where), where + ".Sigma");
    cs.Gamma = parse_matrix(require(c, "Gamma", where), where + ".Gamma");
    cs.Q = parse_matrix(require(c, "Q", where), where + ".Q");
    cs.R = parse_matrix(require(c, "R", where), where + ".R");
    cs.H = parse_matrix(require(c, "H", where), where + ".H");
    cs.init_mean =
        parse_vector(require(c, "init_mean", where), where + ".init_mean");
    cs.init_cov =
        parse_matrix(require(c, "init_cov", where), where + ".init_cov");
    spec.clusters.push_back(std::move(cs));
  }

  const json& topo = require(root, "topology", "config");
  spec.topology.E = parse_matrix(require(topo, "E", "topology"), "topology.E");
  spec.topology.M = parse_matrix(require(topo, "M", "topology"), "topology.M");

  validate(spec);
  return spec;
}

SystemSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open config file: " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return load_spec(buf.str());
}

std::vector<std::string> validate(const SystemSpec& spec) {
  const int n = spec.state_dim;
  const int m = spec.control_dim;
  const int dw = spec.noise_dim;
  const int K = spec.K();

  if (spec.horizon <= 0.0) throw ValidationError("horizon must be positive");
  if (spec.steps < 1) throw ValidationError("steps must be >= 1");
  if (n < 1) throw ValidationError("state_dim must be >= 1");
  if (m < 1) throw ValidationError("control_dim must be >= 1");
  if (dw < 1) throw ValidationError("noise_dim must be >= 1");
  if (K < 1) throw ValidationError("clusters must be non-empty");

  for (int q = 0; q < K; ++q) {
    const ClusterSpec& c = spec.clusters[q];
    const std::string where = "clusters[" + std::to_string(q) + "]";
    if (c.count < 1) throw ValidationError(where + ".count must be >= 1");
    check_dims(c.A, n, n, where + ".A");
    check_dims(c.B, n, m, where + ".B");
    check_dims(c.G, n, n, where + ".G");
    check_dims(c.Sigma, n, dw, where + ".Sigma");
    check_dims(c.Gamma, n, n, where + ".Gamma");
    check_dims(c.Q, n, n, where + ".Q");
    check_dims(c.R, m, m, where + ".R");
    check_dims(c.H, n, n, where + ".H");
    if (c.init_mean.size() != n) {
      throw ValidationError(where + ".init_mean has wrong length");
    }
    check_dims(c.init_cov, n, n, where + ".init_cov");

    check_symmetric(c.Q, where + ".Q");
    check_symmetric(c.R, where + ".R");
    check_symmetric(c.H, where + ".H");
    check_symmetric(c.init_cov, where + ".init_cov");
    if (min_eigenvalue(c.Q) < -1e-10) {
      throw ValidationError(where + ".Q not positive semidefinite");
    }
    if (min_eigenvalue(c.H) < -1e-10) {
      throw ValidationError(where + ".H not positive semidefinite");
    }
    if (min_eigenvalue(c.init_cov) < -1e-10) {
      throw ValidationError(where + ".init_cov not positive semidefinite");
    }
    if (min_eigenvalue(c.R) <= 0.0) {
      throw ValidationError(where + ".R not positive definite");
    }
  }

  const auto& E = spec.topology.E;
  const auto& M = spec.topology.M;
  if (E.rows() != K || E.cols() != K) {
    throw ValidationError("topology.E must be K x K");
  }
  if (M.rows() != K || M.cols() != K) {
    throw ValidationError("topology.M must be K x K");
  }
  for (int q = 0; q < K; ++q) {
    for (int p = 0; p < K; ++p) {
      const double e = E(q, p);
      if (e != 0.0 && e != 1.0) {
        std::ostringstream msg;
        msg << "topology.E[" << q << "][" << p << "] = " << e
            << " not in {0,1}";
        throw ValidationError(msg.str());
      }
    }
  }

  std::vector<std::string> warnings;
  for (int q = 0; q < K; ++q) {
    for (int p = 0; p < K; ++p) {
      if (M(q, p) != 0.0 && E(q, p) == 0.0) {
        std::ostringstream msg;
        msg << "topology.M[" << q << "][" << p
            << "] is nonzero on a non-communication edge (E[" << q << "]["
            << p << "] = 0); estimator accuracy degrades";
        warnings.push_back(msg.str());
      }
    }
  }
  return warnings;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return out;
}

Eigen::VectorXd stacked_init_mean(const SystemSpec& spec) {
  const int n = spec.state_dim;
  Eigen::VectorXd mbar(n * spec.K());
  for (int q = 0; q < spec.K(); ++q) {
    mbar.segment(q * n, n) = spec.clusters[q].init_mean;
  }
  return mbar;
}

Eigen::ArrayXd DerivedMatrices::observed_mask(int q) const {
  Eigen::ArrayXd mask(n * K);
  for (int p = 0; p < K; ++p) {
    mask.segment(p * n, n).setConstant(E_(q, p));
  }
  return mask;
}

Eigen::ArrayXd DerivedMatrices::unobserved_mask(int q) const {
  return 1.0 - observed_mask(q);
}

DerivedMatrices derive_matrices(const SystemSpec& spec) {
  DerivedMatrices d;
  d.K = spec.K();
  d.n = spec.state_dim;
  d.m = spec.control_dim;
  d.dw = spec.noise_dim;
  d.N = spec.total_agents();
  d.E_ = spec.topology.E;

  const int n = d.n, m = d.m, K = d.K;
  const int nK = n * K;

  d.pi.resize(K);
  for (int q = 0; q < K; ++q) {
    d.pi(q) = static_cast<double>(spec.clusters[q].count) / d.N;
  }

  d.PiK = Eigen::MatrixXd::Zero(nK, nK);
  d.NK = Eigen::MatrixXd::Zero(nK, nK);
  d.AK = Eigen::MatrixXd::Zero(nK, nK);
  d.BK = Eigen::MatrixXd::Zero(nK, m * K);
  d.QK = Eigen::MatrixXd::Zero(nK, nK);
  d.RK = Eigen::MatrixXd::Zero(m * K, m * K);
  d.HK = Eigen::MatrixXd::Zero(nK, nK);
  d.SigmaK = Eigen::MatrixXd::Zero(nK, d.dw * K);
  d.GK = Eigen::MatrixXd::Zero(nK, nK);
  d.GammaK = Eigen::MatrixXd::Zero(nK, nK);

  for (int q = 0; q < K; ++q) {
    const ClusterSpec& c = spec.clusters[q];
    const Eigen::MatrixXd Mq_over_K = spec.topology.M.row(q) / double(K);
    d.Gbar.push_back(kron(Mq_over_K, c.G));
    d.Gammabar.push_back(kron(Mq_over_K, c.Gamma));

    d.PiK.block(q * n, q * n, n, n) =
        d.pi(q) * Eigen::MatrixXd::Identity(n, n);
    d.NK.block(q * n, q * n, n, n) =
        double(c.count) * Eigen::MatrixXd::Identity(n, n);
    d.AK.block(q * n, q * n, n, n) = c.A;
    d.BK.block(q * n, q * m, n, m) = c.B;
    d.QK.block(q * n, q * n, n, n) = c.Q;
    d.RK.block(q * m, q * m, m, m) = c.R;
    d.HK.block(q * n, q * n, n, n) = c.H;
    d.SigmaK.block(q * n, q * d.dw, n, d.dw) = c.Sigma;
    d.GK.middleRows(q * n, n) = d.Gbar[q];
    d.GammaK.middleRows(q * n, n) = d.Gammabar[q];

    d.Rinv.push_back(c.R.inverse());
    d.S.push_back(c.B * d.Rinv[q] * c.B.transpose());
  }

  Eigen::MatrixXd NKinv = Eigen::MatrixXd::Zero(nK, nK);
  for (int q = 0; q < K; ++q) {
    NKinv.block(q * n, q * n, n, n) =
        Eigen::MatrixXd::Identity(n, n) / double(spec.clusters[q].count);
  }

  d.DK = d.NK * d.GK * NKinv;
  d.Qbar = d.QK * d.GammaK + NKinv * d.GammaK.transpose() * d.QK * d.NK -
           NKinv * d.GammaK.transpose() * d.NK * d.QK * d.GammaK;
  d.Hbar = d.HK * d.GammaK + NKinv * d.GammaK.transpose() * d.HK * d.NK -
           NKinv * d.GammaK.transpose() * d.NK * d.HK * d.GammaK;
  return d;
}

std::vector<int> neighbor_set(const NetworkTopology& topology, int q) {
  if (q < 0 || q >= topology.K()) {
    throw std::out_of_range("cluster index out of range");
  }
  std::vector<int> neighbors;
  for (int p = 0; p < topology.K(); ++p) {
    if (topology.E(q, p) == 1.0) neighbors.push_back(p);
  }
  return neighbors;
}

}  // namespace mfsc
