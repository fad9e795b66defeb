#ifndef SUBIQC_CORE_HPP
#define SUBIQC_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace subiqc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorCode {
  RankDeficient,
  DimensionMismatch,
  NotValidGossip,
  InvalidCoefficient,
  InvalidArgument,
  NoConvergence,
  MissingParam,
  UnknownAlgorithm,
  Divergence,
  NotLinearPhase,
  InsufficientSamples,
  InvalidRhoBar,
  InfeasibleAtUpper,
  Infeasible,
  SolverFailure,
  Parse,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotValidGossip: return "NotValidGossip";
    case ErrorCode::InvalidCoefficient: return "InvalidCoefficient";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::MissingParam: return "MissingParam";
    case ErrorCode::UnknownAlgorithm: return "UnknownAlgorithm";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::NotLinearPhase: return "NotLinearPhase";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::InvalidRhoBar: return "InvalidRhoBar";
    case ErrorCode::InfeasibleAtUpper: return "InfeasibleAtUpper";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace linalg {

inline void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + " must be square, got " +
                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

inline void require_same_size(const Matrix& a, const Matrix& b,
                              const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double asymmetry(const Matrix& a) {
  return max_abs(a - a.transpose());
}

/// Largest singular value.
inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

inline Vector sym_eigenvalues(const Matrix& a) {
  if (a.size() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double max_eigenvalue(const Matrix& a) {
  Vector ev = sym_eigenvalues(a);
  return ev.size() ? ev(ev.size() - 1) : 0.0;
}

inline double min_eigenvalue(const Matrix& a) {
  Vector ev = sym_eigenvalues(a);
  return ev.size() ? ev(0) : 0.0;
}

/// Orthonormal basis of the column space, rank decided relative to the
/// largest singular value.
inline Matrix orth(const Matrix& a, double rel_tol = 1e-10) {
  if (a.cols() == 0 || a.rows() == 0) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  const double cut = rel_tol * std::max(s.size() ? s(0) : 0.0, 1e-300);
  Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  if (s.size() == 0 || s(0) == 0.0) r = 0;
  return svd.matrixU().leftCols(r);
}

/// Orthonormal basis of the nullspace of `a` (a has `cols` columns).
inline Matrix nullspace(const Matrix& a, double rel_tol = 1e-10) {
  const Index n = a.cols();
  if (a.rows() == 0 || linalg::max_abs(a) == 0.0) {
    return Matrix::Identity(n, n);
  }
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double cut = rel_tol * s(0);
  Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  return svd.matrixV().rightCols(n - r);
}

inline Matrix blkdiag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

/// Symmetric PSD square root through the eigendecomposition; negative
/// eigenvalues within roundoff are clipped to zero.
inline Matrix psd_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace linalg
}  // namespace subiqc

#endif  // SUBIQC_CORE_HPP
