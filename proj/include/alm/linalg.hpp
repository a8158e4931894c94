#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace alm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
};

/**
 * Cyclic two-sided Jacobi eigendecomposition of a symmetric matrix.
 *
 * Off-diagonal entries are annihilated until |a_ij| <= eps * sqrt(|a_ii a_jj|),
 * which keeps small eigenvalues relatively accurate for graded positive
 * semidefinite matrices (e.g. a liability variance of 1e10 next to a bond
 * log-return variance of 1e-5). Householder-based solvers only guarantee
 * absolute accuracy eps * ||A|| and would wipe out the small block.
 */
SymmetricEigen jacobi_eigen(const Matrix& a);

/// True when every entry is finite.
bool all_finite(const Matrix& a);

/// Throws ValidationError unless `a` is square, finite, and symmetric within
/// `rel_tol` of its largest entry. `what` prefixes the message.
void require_symmetric(const Matrix& a, std::string_view what, double rel_tol = 1e-12);

/// Throws ValidationError unless the smallest eigenvalue is >= -rel_tol * trace / dim.
void require_psd(const Matrix& a, std::string_view what, double rel_tol = 1e-10);

/// (A + A^T) / 2.
Matrix symmetrized(const Matrix& a);

/**
 * Principal square root of a symmetric positive semidefinite matrix.
 *
 * Negative eigenvalues (rounding noise on singular inputs) are clamped to zero.
 * Throws ValidationError for non-finite or non-symmetric input.
 */
Matrix psd_sqrt(const Matrix& c);

/// psd_sqrt without the symmetry check; the input is symmetrized first.
/// Intended for products such as S C S that are symmetric only up to rounding.
Matrix psd_sqrt_unchecked(const Matrix& c);

/// Square root and Moore-Penrose inverse square root sharing one decomposition.
/// Eigenvalues <= 0 after clamping are treated as the null space.
struct SqrtPair {
    Matrix sqrt;
    Matrix inv_sqrt;
};
SqrtPair psd_sqrt_pair(const Matrix& c);

/// Nearest PSD matrix by eigenvalue clamping at zero.
Matrix clamp_psd(const Matrix& c);

/**
 * Projects a symmetric matrix with (approximately) unit diagonal onto the set
 * of correlation matrices: negative eigenvalues are clamped to zero, then the
 * result is rescaled by D^{-1/2} A D^{-1/2}. Already-valid correlation matrices
 * are returned unchanged.
 */
Matrix nearest_correlation(const Matrix& a);

/// Frobenius norm of (a - b) relative to max(||b||_F, floor).
double relative_frobenius(const Matrix& a, const Matrix& b, double floor = 1e-300);

}  // namespace alm
