#ifndef SUBIQC_SUBSPACE_GOSSIP_HPP
#define SUBIQC_SUBSPACE_GOSSIP_HPP

#include <subiqc/core.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace subiqc {

/// Returns basis (basis^T basis)^{-1} basis^T. Throws RankDeficient when the
/// basis does not have full column rank.
inline Matrix projection(const Matrix& basis) {
  if (basis.rows() == 0 || basis.cols() == 0 || basis.cols() > basis.rows()) {
    throw Error(ErrorCode::RankDeficient,
                "basis must be n x q with 0 < q <= n");
  }
  Eigen::JacobiSVD<Matrix> svd(basis);
  const Vector& s = svd.singularValues();
  if (!(s(s.size() - 1) > 1e-10 * s(0))) {
    throw Error(ErrorCode::RankDeficient,
                "smallest singular value " + std::to_string(s(s.size() - 1)) +
                    " below 1e-10 x largest " + std::to_string(s(0)));
  }
  const Matrix gram = basis.transpose() * basis;
  Matrix p = basis * gram.ldlt().solve(basis.transpose());
  return linalg::symmetrize(p);
}

/// Range of a full-column-rank basis together with its orthogonal projector.
class Subspace {
 public:
  explicit Subspace(Matrix basis)
      : basis_(std::move(basis)), projection_(subiqc::projection(basis_)) {}

  static Subspace consensus(Index n) { return Subspace(Matrix::Ones(n, 1)); }
  static Subspace full(Index n) { return Subspace(Matrix::Identity(n, n)); }

  const Matrix& basis() const noexcept { return basis_; }
  const Matrix& projection() const noexcept { return projection_; }
  Index dim() const noexcept { return basis_.rows(); }
  Index rank() const noexcept { return basis_.cols(); }

 private:
  Matrix basis_;
  Matrix projection_;
};

using Edge = std::pair<int, int>;

struct GossipTolerances {
  double equality = 1e-9;
  double contraction_margin = 1e-12;
  double symmetry = 1e-12;
  double sparsity = 1e-12;
};

/// Outcome of checking A P = P, P A = P and ||A - P|| < 1.
struct GossipReport {
  bool ok = false;
  double sigma = 0.0;
  double residual_ap = 0.0;  // max |A P - P|
  double residual_pa = 0.0;  // max |P A - P|
  double asymmetry = 0.0;
  double sparsity_violation = 0.0;
  std::vector<std::string> failures;
};

/// Spectral norm of A - P.
inline double spectral_gap(const Matrix& a, const Subspace& sub) {
  linalg::require_same_size(a, sub.projection(), "gossip vs projection");
  return linalg::spectral_norm(a - sub.projection());
}

inline GossipReport validate_gossip(
    const Matrix& a, const Subspace& sub,
    const GossipTolerances& tol = {},
    const std::optional<std::vector<Edge>>& edges = std::nullopt) {
  linalg::require_square(a, "gossip matrix");
  linalg::require_same_size(a, sub.projection(), "gossip vs projection");
  const Matrix& p = sub.projection();
  GossipReport rep;
  rep.asymmetry = linalg::asymmetry(a);
  rep.residual_ap = linalg::max_abs(a * p - p);
  rep.residual_pa = linalg::max_abs(p * a - p);
  rep.sigma = linalg::spectral_norm(a - p);

  if (rep.asymmetry > tol.symmetry) {
    rep.failures.push_back("matrix is not symmetric (max |A - A^T| = " +
                           std::to_string(rep.asymmetry) + ")");
  }
  if (rep.residual_ap > tol.equality) {
    rep.failures.push_back("A P_U = P_U violated (max error " +
                           std::to_string(rep.residual_ap) + ")");
  }
  if (rep.residual_pa > tol.equality) {
    rep.failures.push_back("P_U A = P_U violated (max error " +
                           std::to_string(rep.residual_pa) + ")");
  }
  if (!(rep.sigma < 1.0 - tol.contraction_margin)) {
    rep.failures.push_back(
        "contraction ||A - P_U|| < 1 violated (sigma = " +
        std::to_string(rep.sigma) + "); A^t does not converge to P_U");
  }
  if (edges) {
    const Index n = a.rows();
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> allowed =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n,
                                                                      false);
    for (Index i = 0; i < n; ++i) allowed(i, i) = true;
    for (const auto& [i, j] : *edges) {
      if (i < 0 || j < 0 || i >= n || j >= n) {
        throw Error(ErrorCode::DimensionMismatch,
                    "edge (" + std::to_string(i) + "," + std::to_string(j) +
                        ") outside 0.." + std::to_string(n - 1));
      }
      allowed(i, j) = allowed(j, i) = true;
    }
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (!allowed(i, j)) {
          rep.sparsity_violation =
              std::max(rep.sparsity_violation, std::abs(a(i, j)));
        }
      }
    }
    if (rep.sparsity_violation > tol.sparsity) {
      rep.failures.push_back("entries outside the edge set (max " +
                             std::to_string(rep.sparsity_violation) + ")");
    }
  }
  rep.ok = rep.failures.empty();
  return rep;
}

inline std::string describe(const GossipReport& rep) {
  std::string out = rep.ok ? "valid gossip" : "invalid gossip";
  out += " (sigma = " + std::to_string(rep.sigma) + ")";
  for (const auto& f : rep.failures) out += "; " + f;
  return out;
}

/// Symmetric mixing matrix that has passed validate_gossip.
class GossipMatrix {
 public:
  GossipMatrix(Matrix a, const Subspace& sub, const GossipTolerances& tol = {},
               std::optional<std::vector<Edge>> edges = std::nullopt)
      : matrix_(std::move(a)), edges_(std::move(edges)) {
    GossipReport rep = validate_gossip(matrix_, sub, tol, edges_);
    if (!rep.ok) throw Error(ErrorCode::NotValidGossip, describe(rep));
    sigma_ = rep.sigma;
  }

  const Matrix& matrix() const noexcept { return matrix_; }
  double spectral_gap() const noexcept { return sigma_; }
  const std::optional<std::vector<Edge>>& sparsity() const noexcept {
    return edges_;
  }

 private:
  Matrix matrix_;
  double sigma_ = 0.0;
  std::optional<std::vector<Edge>> edges_;
};

inline Matrix graph_laplacian(Index n, const std::vector<Edge>& edges) {
  Matrix l = Matrix::Zero(n, n);
  for (const auto& [i, j] : edges) {
    if (i == j) continue;
    l(i, j) -= 1.0;
    l(j, i) -= 1.0;
    l(i, i) += 1.0;
    l(j, j) += 1.0;
  }
  return l;
}

inline std::vector<Edge> path_edges(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return e;
}

inline std::vector<Edge> complete_edges(int n) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return e;
}

/// W = I - eta * laplacian, validated against the consensus subspace.
inline GossipMatrix consensus_gossip(const Matrix& laplacian, double eta) {
  linalg::require_square(laplacian, "laplacian");
  const Index n = laplacian.rows();
  const double scale = std::max(1.0, linalg::max_abs(laplacian));
  if (linalg::asymmetry(laplacian) > 1e-12 * scale) {
    throw Error(ErrorCode::InvalidArgument, "laplacian is not symmetric");
  }
  if (laplacian.rowwise().sum().cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::InvalidArgument, "laplacian rows must sum to zero");
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && laplacian(i, j) > 0.0)
        throw Error(ErrorCode::InvalidArgument,
                    "laplacian off-diagonal entries must be <= 0");

  const double lmax = linalg::max_eigenvalue(laplacian);
  if (!(eta > 0.0) || !(eta * lmax < 2.0)) {
    throw Error(ErrorCode::NotValidGossip,
                "eta = " + std::to_string(eta) + " outside (0, 2/lambda_max = " +
                    std::to_string(lmax > 0 ? 2.0 / lmax : 0.0) + ")");
  }
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (laplacian(i, j) != 0.0)
        edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
  Matrix w = Matrix::Identity(n, n) - eta * laplacian;
  return GossipMatrix(std::move(w), Subspace::consensus(n), {},
                      std::move(edges));
}

/// Dense test gossip: A = P + Q with Q = (I-P) S (I-P) scaled to ||Q|| =
/// target_sigma. S = G G^T for a seeded Gaussian G, so Q is PSD and the gap is
/// attained by a positive eigenvalue.
inline GossipMatrix synth_gossip(const Subspace& sub, double target_sigma,
                                 std::uint64_t seed) {
  if (!(target_sigma >= 0.0 && target_sigma < 1.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "target_sigma must lie in [0, 1), got " +
                    std::to_string(target_sigma));
  }
  const Index n = sub.dim();
  const Matrix& p = sub.projection();
  Matrix a = p;
  if (target_sigma > 0.0 && sub.rank() < n) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(n, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) g(i, j) = normal(gen);
    const Matrix comp = Matrix::Identity(n, n) - p;
    Matrix q = linalg::symmetrize(comp * (g * g.transpose()) * comp);
    const double nq = linalg::spectral_norm(q);
    if (nq > 0.0) a = p + q * (target_sigma / nq);
  }
  return GossipMatrix(linalg::symmetrize(a), sub);
}

}  // namespace subiqc

#endif  // SUBIQC_SUBSPACE_GOSSIP_HPP
