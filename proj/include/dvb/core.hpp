#pragma once

// Shared numeric types and error classes for the dvb library.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dvb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A parameter fell outside its valid domain (e.g. a natural parameter outside Omega).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inputs with inconsistent shapes (K, D, node counts).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

inline void require_domain(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// Strict SPD test: a Cholesky factorization must succeed.
inline bool is_spd(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// log|M| for SPD M via its Cholesky factor.
inline double log_det_spd(const Eigen::LLT<Matrix>& llt) {
  const auto& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

inline Matrix inverse_spd(const Eigen::LLT<Matrix>& llt, Eigen::Index n) {
  Matrix inv = llt.solve(Matrix::Identity(n, n));
  return symmetrize(inv);
}

}  // namespace detail
}  // namespace dvb
