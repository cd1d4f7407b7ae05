// Complex Hermitian linear-algebra kernels: solves, pseudo-inverse fallback,
// generalized eigendecomposition, diagonal/block-diagonal operators, family
// whitening and the commutator-based joint-diagonalizability test.
#pragma once

#include "fastmnmf/types.hpp"

namespace fastmnmf {

/// Solves A x = b for Hermitian positive-definite A (Cholesky plus one step of
/// iterative refinement). Throws NotPositiveDefinite when the factorization fails.
Eigen::VectorXcd herm_solve(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& b);

/// Minimum-norm least-squares solution via the Moore-Penrose pseudo-inverse.
/// Never throws; A may be rank deficient.
Eigen::VectorXcd pinv_solve(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& b);

struct Gevd {
  Eigen::MatrixXcd w;  // columns solve a*w_m = d_m*b*w_m, with w^H b w = I
  Eigen::VectorXd d;   // eigenvalues, descending
};

/// Generalized eigendecomposition of a Hermitian PSD/PD pair.
Gevd gevd_joint_diag(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

/// Real diagonal of a square matrix, clamped at zero from below.
Eigen::VectorXd ddiag(const Eigen::MatrixXcd& a);

Eigen::MatrixXcd blkdiag(const std::vector<Eigen::MatrixXcd>& blocks);

/// Hermitian inverse square root with eigenvalue floor 1e-12 * trace.
Eigen::MatrixXcd herm_inv_sqrt(const Eigen::MatrixXcd& s);

/// Congruence-transforms every member by the inverse square root of the family
/// sum, so the whitened members add up to the identity.
std::vector<Eigen::MatrixXcd> whiten_family(const std::vector<Eigen::MatrixXcd>& r);

/// Frobenius norm of the commutator AB - BA.
double commutator_norm(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

/// A Hermitian PSD family with positive-definite sum is jointly diagonalizable
/// iff all pairwise commutators of the whitened family vanish.
bool is_jointly_diagonalizable(const std::vector<Eigen::MatrixXcd>& r, double tol = 1e-8);

}  // namespace fastmnmf
