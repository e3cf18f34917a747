#pragma once

// Independent reference computations used by the tests. Nothing here calls into the
// library's algorithms; only its basic types are shared.

#include "bosvs/linops.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using bosvs::Index;
using bosvs::Matrix;
using bosvs::Vector;

inline Vector random_vector(Index n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
        v[i] = normal(rng);
    }
    return v;
}

inline Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(r, c);
    for (Index j = 0; j < c; ++j) {
        for (Index i = 0; i < r; ++i) {
            m(i, j) = normal(rng);
        }
    }
    return m;
}

/// Minimizer of a convex scalar function on [lo, hi], given a monotone selection of its
/// subgradient (for |u| take sign(u) with sign(0) = 0). Bisects on the sign of `dphi`, so the
/// result is accurate to the floating-point resolution of the bracket.
inline double bisect_min(const std::function<double(double)>& dphi, double lo, double hi) {
    if (dphi(lo) >= 0.0) {
        return lo;
    }
    if (dphi(hi) <= 0.0) {
        return hi;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        const double d = dphi(mid);
        if (d == 0.0) {
            return mid;
        }
        (d < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double sign(double u) { return (u > 0.0) - (u < 0.0); }

/// Dense materialization by applying to unit vectors, written independently of LinOp::to_dense.
inline Matrix materialize(const bosvs::LinOp& op) {
    Matrix m(op.rows(), op.cols());
    Vector e = Vector::Zero(op.cols());
    Vector col(op.rows());
    for (Index j = 0; j < op.cols(); ++j) {
        e[j] = 1.0;
        op.apply(e, col);
        m.col(j) = col;
        e[j] = 0.0;
    }
    return m;
}

/// Cyclic coordinate descent for 1/2 ||F u - f||^2 + beta ||u||_1.
inline Vector lasso_coordinate_descent(const Matrix& F, const Vector& f, double beta, int sweeps = 20000,
                                       double tol = 1e-15) {
    const Index n = F.cols();
    Vector u = Vector::Zero(n);
    Vector r = f;  // f - F u
    const Vector col_sq = F.colwise().squaredNorm().transpose();
    for (int s = 0; s < sweeps; ++s) {
        double max_change = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (col_sq[j] == 0.0) {
                continue;
            }
            const double rho_j = F.col(j).dot(r) + col_sq[j] * u[j];
            double next = 0.0;
            if (rho_j > beta) {
                next = (rho_j - beta) / col_sq[j];
            } else if (rho_j < -beta) {
                next = (rho_j + beta) / col_sq[j];
            }
            const double delta = next - u[j];
            if (delta != 0.0) {
                r -= delta * F.col(j);
                u[j] = next;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (max_change <= tol) {
            break;
        }
    }
    return u;
}

/// Refines an approximate lasso minimizer by solving the optimality system on its support
/// with fixed signs: F_S^T F_S u_S = F_S^T f - beta sign(u_S).
inline Vector lasso_polish(const Matrix& F, const Vector& f, double beta, const Vector& u, double zero_tol = 1e-9) {
    std::vector<Index> support;
    for (Index j = 0; j < u.size(); ++j) {
        if (std::abs(u[j]) > zero_tol) {
            support.push_back(j);
        }
    }
    const Index s = static_cast<Index>(support.size());
    Matrix fs(F.rows(), s);
    Vector signs(s);
    for (Index k = 0; k < s; ++k) {
        fs.col(k) = F.col(support[k]);
        signs[k] = sign(u[support[k]]);
    }
    const Vector us = (fs.transpose() * fs).ldlt().solve(fs.transpose() * f - beta * signs);
    Vector out = Vector::Zero(u.size());
    for (Index k = 0; k < s; ++k) {
        out[support[k]] = us[k];
    }
    return out;
}

inline double lasso_objective(const Matrix& F, const Vector& f, double beta, const Vector& u) {
    return 0.5 * (F * u - f).squaredNorm() + beta * u.lpNorm<1>();
}

/// 1-D Neumann forward-difference matrix (n x n, last row zero).
inline Matrix forward_diff(Index n) {
    Matrix d = Matrix::Zero(n, n);
    for (Index i = 0; i + 1 < n; ++i) {
        d(i, i) = -1.0;
        d(i, i + 1) = 1.0;
    }
    return d;
}

}  // namespace oracle
