#include "fastmnmf/hermlin.hpp"

#include <Eigen/Eigenvalues>

namespace fastmnmf {

Eigen::VectorXcd herm_solve(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& b) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw ShapeMismatch("herm_solve: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXcd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("herm_solve: Cholesky pivot not positive");
  Eigen::VectorXcd x = llt.solve(b);
  // one refinement step pushes the residual down to O(eps * ||b||)
  x += llt.solve(b - a * x);
  return x;
}

Eigen::VectorXcd pinv_solve(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& b) {
  if (a.rows() != b.size()) throw ShapeMismatch("pinv_solve: dimension mismatch");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(a);
  return cod.solve(b);
}

Gevd gevd_joint_diag(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw ShapeMismatch("gevd_joint_diag: dimension mismatch");
  const Eigen::Index m = a.rows();
  Eigen::LLT<Eigen::MatrixXcd> llt(b);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("gevd_joint_diag: B is not positive definite");

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(a, b,
      Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success)
    throw NotPositiveDefinite("gevd_joint_diag: eigensolver failed");

  // Eigen returns ascending eigenvalues; flip to descending. Equal eigenvalues
  // keep their relative order under the flip-by-index, which is deterministic.
  Gevd out;
  out.w.resize(m, m);
  out.d.resize(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    out.d(c) = es.eigenvalues()(m - 1 - c);
    out.w.col(c) = es.eigenvectors().col(m - 1 - c);
  }
  // enforce w^H B w = I exactly up to roundoff
  for (Eigen::Index c = 0; c < m; ++c) {
    double nrm = std::real(out.w.col(c).dot(b * out.w.col(c)));
    if (nrm > 0) out.w.col(c) /= std::sqrt(nrm);
  }
  return out;
}

Eigen::VectorXd ddiag(const Eigen::MatrixXcd& a) {
  if (a.rows() != a.cols()) throw ShapeMismatch("ddiag: matrix must be square");
  return a.diagonal().real().cwiseMax(0.0);
}

Eigen::MatrixXcd blkdiag(const std::vector<Eigen::MatrixXcd>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("blkdiag: needs at least one block");
  Eigen::Index total = 0;
  for (const auto& blk : blocks) {
    if (blk.rows() != blk.cols()) throw ShapeMismatch("blkdiag: blocks must be square");
    total += blk.rows();
  }
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(total, total);
  Eigen::Index at = 0;
  for (const auto& blk : blocks) {
    out.block(at, at, blk.rows(), blk.cols()) = blk;
    at += blk.rows();
  }
  return out;
}

Eigen::MatrixXcd herm_inv_sqrt(const Eigen::MatrixXcd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s);
  if (es.info() != Eigen::Success)
    throw NotPositiveDefinite("herm_inv_sqrt: eigendecomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0)
    throw NotPositiveDefinite("herm_inv_sqrt: matrix is singular");
  const double floor = 1e-12 * s.real().trace();
  Eigen::VectorXd inv_sqrt = ev.cwiseMax(floor).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
}

std::vector<Eigen::MatrixXcd> whiten_family(const std::vector<Eigen::MatrixXcd>& r) {
  if (r.empty()) throw std::invalid_argument("whiten_family: empty family");
  Eigen::MatrixXcd s = r[0];
  for (size_t n = 1; n < r.size(); ++n) {
    if (r[n].rows() != s.rows() || r[n].cols() != s.cols())
      throw ShapeMismatch("whiten_family: inconsistent dimensions");
    s += r[n];
  }
  const Eigen::MatrixXcd t = herm_inv_sqrt(s);
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(r.size());
  for (const auto& rn : r) out.push_back(t * rn * t);
  return out;
}

double commutator_norm(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch("commutator_norm: dimension mismatch");
  return (a * b - b * a).norm();
}

bool is_jointly_diagonalizable(const std::vector<Eigen::MatrixXcd>& r, double tol) {
  const std::vector<Eigen::MatrixXcd> w = whiten_family(r);
  double scale = 0.0;
  for (const auto& wn : w) scale = std::max(scale, wn.norm());
  if (scale == 0.0) return true;
  for (size_t n = 0; n < w.size(); ++n)
    for (size_t p = n + 1; p < w.size(); ++p)
      if (commutator_norm(w[n], w[p]) > tol * scale) return false;
  return true;
}

}  // namespace fastmnmf
