#include "alm/linalg.hpp"

#include "alm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace alm {

namespace {

constexpr int kMaxSweeps = 100;

// Eigenvalues at or below this fraction of the largest one span the null space
// when inverting. Covers gradings well beyond the 1e-15 seen in ALM laws.
constexpr double kNullRatio = 1e-24;

}  // namespace

SymmetricEigen jacobi_eigen(const Matrix& input) {
    const Eigen::Index n = input.rows();
    Matrix a = symmetrized(input);
    Matrix v = Matrix::Identity(n, n);
    const double eps = std::numeric_limits<double>::epsilon();

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double scale = std::sqrt(std::abs(a(p, p) * a(q, q)));
                if (std::abs(apq) <= eps * scale || std::abs(apq) < std::numeric_limits<double>::min()) {
                    a(p, q) = a(q, p) = 0.0;
                    continue;
                }
                rotated = true;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = a(p, k) = c * akp - s * akq;
                    a(k, q) = a(q, k) = s * akp + c * akq;
                }
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
    SymmetricEigen out{Vector(n), Matrix(n, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
        out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
    }
    return out;
}

bool all_finite(const Matrix& a) {
    return a.allFinite();
}

void require_symmetric(const Matrix& a, std::string_view what, double rel_tol) {
    if (a.rows() != a.cols()) {
        throw ValidationError(std::string(what) + ": matrix is not square (" + std::to_string(a.rows()) +
                              "x" + std::to_string(a.cols()) + ")");
    }
    if (a.size() == 0) return;
    if (!all_finite(a)) {
        throw ValidationError(std::string(what) + ": matrix has NaN or Inf entries");
    }
    const double scale = a.cwiseAbs().maxCoeff();
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (a.size() > 0 && asym > rel_tol * scale) {
        throw ValidationError(std::string(what) + ": matrix is not symmetric (max |A - A^T| = " +
                              std::to_string(asym) + ")");
    }
}

void require_psd(const Matrix& a, std::string_view what, double rel_tol) {
    if (a.rows() == 0) return;
    const auto eig = jacobi_eigen(a);
    const double trace = a.trace();
    const double floor = -rel_tol * std::max(trace, 0.0) / static_cast<double>(a.rows());
    if (eig.values(0) < floor) {
        throw ValidationError(std::string(what) + ": matrix is not positive semidefinite (smallest eigenvalue " +
                              std::to_string(eig.values(0)) + ")");
    }
}

Matrix symmetrized(const Matrix& a) {
    return 0.5 * (a + a.transpose());
}

Matrix psd_sqrt_unchecked(const Matrix& c) {
    if (c.rows() == 0) return c;
    const auto eig = jacobi_eigen(c);
    const Vector root = eig.values.cwiseMax(0.0).cwiseSqrt();
    return symmetrized(eig.vectors * root.asDiagonal() * eig.vectors.transpose());
}

Matrix psd_sqrt(const Matrix& c) {
    require_symmetric(c, "psd_sqrt");
    require_psd(c, "psd_sqrt");
    return psd_sqrt_unchecked(c);
}

SqrtPair psd_sqrt_pair(const Matrix& c) {
    const Eigen::Index n = c.rows();
    if (n == 0) return {c, c};
    const auto eig = jacobi_eigen(c);
    const double top = std::max(eig.values.maxCoeff(), 0.0);
    Vector root(n);
    Vector inv_root(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double lambda = eig.values(k);
        if (lambda > kNullRatio * top && lambda > 0.0) {
            root(k) = std::sqrt(lambda);
            inv_root(k) = 1.0 / root(k);
        } else {
            root(k) = 0.0;
            inv_root(k) = 0.0;
        }
    }
    const Matrix& q = eig.vectors;
    return {symmetrized(q * root.asDiagonal() * q.transpose()),
            symmetrized(q * inv_root.asDiagonal() * q.transpose())};
}

Matrix clamp_psd(const Matrix& c) {
    if (c.rows() == 0) return c;
    const auto eig = jacobi_eigen(c);
    const Vector clamped = eig.values.cwiseMax(0.0);
    return symmetrized(eig.vectors * clamped.asDiagonal() * eig.vectors.transpose());
}

Matrix nearest_correlation(const Matrix& a) {
    const Eigen::Index n = a.rows();
    if (n == 0) return a;
    Matrix sym = symmetrized(a);
    const auto eig = jacobi_eigen(sym);
    bool unit_diagonal = true;
    for (Eigen::Index i = 0; i < n; ++i) unit_diagonal = unit_diagonal && sym(i, i) == 1.0;
    if (eig.values(0) >= 0.0 && unit_diagonal) return sym;

    Matrix clamped = eig.vectors * eig.values.cwiseMax(0.0).asDiagonal() * eig.vectors.transpose();
    Vector d = clamped.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(d(i) > 0.0)) {
            throw NumericalError("nearest_correlation: projected diagonal entry " + std::to_string(i) +
                                 " is not positive");
        }
        d(i) = 1.0 / std::sqrt(d(i));
    }
    Matrix out = symmetrized(d.asDiagonal() * clamped * d.asDiagonal());
    out.diagonal().setOnes();
    return out;
}

double relative_frobenius(const Matrix& a, const Matrix& b, double floor) {
    return (a - b).norm() / std::max(b.norm(), floor);
}

}  // namespace alm
