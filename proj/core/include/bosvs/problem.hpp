#pragma once

#include "bosvs/linops.hpp"

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bosvs {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Convex, Lipschitz-differentiable term f_i.
/// f(y) - f(x) - <grad f(x), y - x> and an absolute bound on its rounding error.
struct LinearizationGap {
    double gap = 0.0;
    double roundoff = 0.0;
};

class SmoothPart {
public:
    virtual ~SmoothPart() = default;

    virtual std::string name() const = 0;
    virtual double value(VecCRef x) const = 0;
    virtual void gradient(VecCRef x, VecRef g) const = 0;
    Vector gradient(VecCRef x) const;
    /// Writes the gradient into g and returns the value; parts that share work override it.
    virtual double value_and_gradient(VecCRef x, VecRef g) const;
    /// <grad f(x) - grad f(y), x - y>, the numerator of the BB curvature estimate.
    virtual double gradient_difference_dot(VecCRef x, VecCRef y) const;
    /// Given fx = f(x) and gx = grad f(x). The default subtracts function values; parts with
    /// a closed form override it so the gap stays accurate for tiny steps.
    virtual LinearizationGap linearization_gap(VecCRef x, double fx, VecCRef gx, VecCRef y) const;

    /// Lipschitz constant of the gradient, when known. Algorithms never require it.
    virtual std::optional<double> lipschitz() const { return std::nullopt; }
    virtual bool is_zero() const { return false; }

    /// Quadratic parts expose their Hessian so exact subproblems can be solved by CG.
    virtual bool is_quadratic() const { return false; }
    virtual void hessian_apply(VecCRef v, VecRef out) const;
};

/// Proper closed convex term h_i with a computable proximal map.
class NonsmoothPart {
public:
    virtual ~NonsmoothPart() = default;

    virtual std::string name() const = 0;
    /// May return +infinity outside the domain.
    virtual double value(VecCRef x) const = 0;
    /// argmin_u h(u) + (1/(2t)) ||u - v||^2; always lands in the domain.
    virtual void prox(VecCRef v, double t, VecRef out) const = 0;
    Vector prox(VecCRef v, double t) const;
    virtual bool is_zero() const { return false; }
};

using SmoothPtr = std::shared_ptr<const SmoothPart>;
using NonsmoothPtr = std::shared_ptr<const NonsmoothPart>;

/// Offsets of each block inside one contiguous stacked vector.
struct BlockLayout {
    std::vector<Index> offsets;
    std::vector<Index> sizes;
    Index total = 0;

    explicit BlockLayout(std::vector<Index> block_sizes = {});

    std::size_t num_blocks() const noexcept { return sizes.size(); }
    auto block(Vector& x, std::size_t i) const { return x.segment(offsets[i], sizes[i]); }
    auto block(const Vector& x, std::size_t i) const { return x.segment(offsets[i], sizes[i]); }
    /// Blocks 1..m-1 (0-based), i.e. the vector with the first block dropped.
    auto tail(const Vector& x) const { return x.tail(total - sizes.front()); }
    auto tail(Vector& x) const { return x.tail(total - sizes.front()); }
};

struct Block {
    LinOpPtr A;
    SmoothPtr f;
    NonsmoothPtr h;
};

/// min sum_i f_i(x_i) + h_i(x_i)  subject to  sum_i A_i x_i = b.
///
/// Blocks are indexed from 0 in the API. Immutable after construction.
class Problem {
public:
    Problem(std::vector<Block> blocks, Vector b);

    std::size_t num_blocks() const noexcept { return blocks_.size(); }
    const Block& block(std::size_t i) const { return blocks_.at(i); }
    const std::vector<Block>& blocks() const noexcept { return blocks_; }
    const Vector& b() const noexcept { return b_; }
    Index rows() const noexcept { return b_.size(); }
    const BlockLayout& layout() const noexcept { return layout_; }

    /// out = A x = sum_i A_i x_i
    void apply_a(const Vector& x, VecRef out) const;
    /// A x - b
    Vector residual(const Vector& x) const;
    /// A^T w stacked over blocks.
    Vector apply_a_adjoint(VecCRef w) const;

    void check_stacked(const Vector& x, const char* what) const;

    /// Throws RankDeficient for the first block whose A_i^T A_i is singular.
    void check_column_rank(double rank_tol = 1e-10) const;

private:
    std::vector<Block> blocks_;
    Vector b_;
    BlockLayout layout_;
};

struct KKTReport {
    double primal_residual = 0.0;
    std::vector<double> block_residuals;
    double aggregate = 0.0;
};

/// sum_i f_i(x_i) + h_i(x_i); +infinity propagates from any h_i.
double objective(const Problem& p, const Vector& x);

/// Phi(x) + <lambda, Ax - b> + (rho/2) ||Ax - b||^2.
double augmented_lagrangian(const Problem& p, const Vector& x, VecCRef lambda, double rho);

/// b - sum_{j<i} A_j z_j - sum_{j>i} A_j y_j. Only the relevant blocks of z and y are read.
Vector b_i_k(const Problem& p, std::size_t i, const Vector& z, const Vector& y);

/// Linearized block objective
///   f_i(v) + <grad f_i(v), u - v> + (delta/2)||u - v||^2 + h_i(u) + (rho/2)||A_i u - b_ik + lambda/rho||^2.
double phi_i_k(const Problem& p, std::size_t i, VecCRef u, VecCRef v, double delta, VecCRef b_ik,
               VecCRef lambda, double rho);

/// Exact block objective f_i(u) + h_i(u) + (rho/2)||A_i u - b_ik + lambda/rho||^2.
double L_i_k(const Problem& p, std::size_t i, VecCRef u, VecCRef b_ik, VecCRef lambda, double rho);

/// Primal residual ||Ax - b|| plus, per block, the unit-scale prox fixed-point gap
/// ||x_i - prox_{h_i}(x_i - grad f_i(x_i) - A_i^T lambda, 1)||.
KKTReport kkt_residual(const Problem& p, const Vector& x, VecCRef lambda);

}  // namespace bosvs
