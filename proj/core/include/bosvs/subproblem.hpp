#pragma once

#include "bosvs/problem.hpp"

#include <cmath>
#include <optional>

namespace bosvs {

/// Exact minimizer of the per-block model
///
///     <g, u> + (delta/2) ||u - center||^2 + h_i(u) + (rho/2) ||A_i u - c||^2
///
/// for the two solvable classes: h_i = 0 (linear solve with delta I + rho A_i^T A_i) and
/// A_i^T A_i = s I (one prox call of h_i at scale 1/(delta + rho s)). Anything else
/// raises UnsupportedSubproblem.
///
/// Built once per block; the spectral factorization of A_i^T A_i (small dense blocks, or
/// the per-axis factors of a separable image-grid Gram matrix) is computed at
/// construction and reused for every delta. Other h_i = 0 blocks fall back to CG.
class BlockSubproblem {
public:
    enum class Kind { ScaledIdentityProx, Spectral, SeparableSpectral, ConjugateGradient, Unsupported };

    BlockSubproblem(const Problem& p, std::size_t block, Index spectral_limit = 512);

    Kind kind() const noexcept { return kind_; }
    std::size_t block() const noexcept { return block_; }
    /// s with A_i^T A_i = s I, when that holds.
    std::optional<double> gram_scale() const noexcept { return gram_scale_; }

    /// c = b_ik - lambda/rho is passed in already formed.
    Vector minimize(VecCRef g, VecCRef center, double delta, VecCRef c, double rho) const;

private:
    void solve_linear(VecCRef rhs, double delta, double rho, VecCRef warm, VecRef out) const;

    const Problem* p_;
    std::size_t block_;
    Kind kind_ = Kind::Unsupported;
    std::optional<double> gram_scale_;
    Matrix eigvecs_;
    Vector eigvals_;
    // Separable case: A^T A = U diag(lr_i + lc_j + shift) U^T with U = Ur (x) Uc.
    Matrix row_vecs_;
    Matrix col_vecs_;
    Matrix grid_eigs_;
};

/// Conjugate gradients for an SPD operator given as a callable.
/// Stops when ||b - A x|| <= abs_tol; returns the iteration count, or -1 if maxit was hit.
template <class ApplyFn>
long conjugate_gradient(ApplyFn&& apply, VecCRef rhs, VecRef x, double abs_tol, long maxit) {
    Vector r = rhs;
    Vector ap(rhs.size());
    apply(x, ap);
    r -= ap;
    double rr = r.squaredNorm();
    if (std::sqrt(rr) <= abs_tol) {
        return 0;
    }
    Vector d = r;
    for (long it = 1; it <= maxit; ++it) {
        apply(d, ap);
        const double dad = d.dot(ap);
        if (!(dad > 0.0)) {
            return -1;
        }
        const double step = rr / dad;
        x += step * d;
        r -= step * ap;
        const double rr_new = r.squaredNorm();
        if (std::sqrt(rr_new) <= abs_tol) {
            return it;
        }
        d = r + (rr_new / rr) * d;
        rr = rr_new;
    }
    return -1;
}

}  // namespace bosvs
