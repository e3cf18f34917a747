#pragma once

#include "bosvs/problem.hpp"

namespace bosvs {

// Elementary proximal maps -------------------------------------------------

/// sign(v_j) max(|v_j| - t, 0). Throws InvalidArgument for t < 0.
Vector soft_threshold(VecCRef v, double t);

/// Per contiguous group g of size `group_size`: max(1 - t/||v_g||, 0) v_g,
/// and the zero vector whenever ||v_g|| <= t (including ||v_g|| = 0).
Vector group_shrink(VecCRef v, double t, Index group_size);

/// Componentwise median(lo, v, hi). Throws InvalidArgument when lo > hi anywhere.
Vector box_clamp(VecCRef v, VecCRef lo, VecCRef hi);

// Smooth parts --------------------------------------------------------------

class ZeroSmooth final : public SmoothPart {
public:
    std::string name() const override { return "zero"; }
    using SmoothPart::gradient;
    double value(VecCRef) const override { return 0.0; }
    void gradient(VecCRef, VecRef g) const override { g.setZero(); }
    double gradient_difference_dot(VecCRef, VecCRef) const override { return 0.0; }
    LinearizationGap linearization_gap(VecCRef, double, VecCRef, VecCRef) const override { return {}; }
    std::optional<double> lipschitz() const override { return 0.0; }
    bool is_zero() const override { return true; }
    bool is_quadratic() const override { return true; }
    void hessian_apply(VecCRef, VecRef out) const override { out.setZero(); }
};

/// (1/2) ||F u - f||^2 with gradient F^T (F u - f).
class QuadraticLS final : public SmoothPart {
public:
    /// The Lipschitz constant ||F||^2 is estimated by power iteration unless given.
    QuadraticLS(LinOpPtr op, Vector data, std::optional<double> lipschitz = std::nullopt);

    std::string name() const override { return "quadratic_ls"; }
    using SmoothPart::gradient;
    double value(VecCRef x) const override;
    void gradient(VecCRef x, VecRef g) const override;
    double value_and_gradient(VecCRef x, VecRef g) const override;
    /// ||F (x - y)||^2.
    double gradient_difference_dot(VecCRef x, VecCRef y) const override;
    /// (1/2) ||F (y - x)||^2.
    LinearizationGap linearization_gap(VecCRef x, double fx, VecCRef gx, VecCRef y) const override;
    std::optional<double> lipschitz() const override { return lipschitz_; }
    bool is_quadratic() const override { return true; }
    void hessian_apply(VecCRef v, VecRef out) const override;

    const LinOp& op() const noexcept { return *op_; }
    const LinOpPtr& op_ptr() const noexcept { return op_; }
    const Vector& data() const noexcept { return data_; }

private:
    LinOpPtr op_;
    Vector data_;
    double lipschitz_;
};

// Nonsmooth parts -----------------------------------------------------------

class ZeroNonsmooth final : public NonsmoothPart {
public:
    std::string name() const override { return "zero"; }
    double value(VecCRef) const override { return 0.0; }
    using NonsmoothPart::prox;
    void prox(VecCRef v, double, VecRef out) const override { out = v; }
    bool is_zero() const override { return true; }
};

/// beta ||x||_1
class ScaledL1 final : public NonsmoothPart {
public:
    explicit ScaledL1(double weight);

    std::string name() const override { return "l1"; }
    double value(VecCRef x) const override { return weight_ * x.lpNorm<1>(); }
    using NonsmoothPart::prox;
    void prox(VecCRef v, double t, VecRef out) const override { out = soft_threshold(v, weight_ * t); }
    double weight() const noexcept { return weight_; }

private:
    double weight_;
};

/// alpha sum_g ||x_g||_2 over contiguous groups (isotropic TV when applied to
/// interleaved image gradients with group size 2).
class GroupL2 final : public NonsmoothPart {
public:
    GroupL2(double weight, Index group_size);

    std::string name() const override { return "group_l2"; }
    double value(VecCRef x) const override;
    using NonsmoothPart::prox;
    void prox(VecCRef v, double t, VecRef out) const override { out = group_shrink(v, weight_ * t, group_); }
    double weight() const noexcept { return weight_; }
    Index group_size() const noexcept { return group_; }

private:
    double weight_;
    Index group_;
};

/// Indicator of the box [lo, hi]: 0 inside, +infinity outside.
class BoxIndicator final : public NonsmoothPart {
public:
    BoxIndicator(Vector lo, Vector hi);

    std::string name() const override { return "box"; }
    double value(VecCRef x) const override;
    using NonsmoothPart::prox;
    void prox(VecCRef v, double, VecRef out) const override { out = box_clamp(v, lo_, hi_); }
    const Vector& lo() const noexcept { return lo_; }
    const Vector& hi() const noexcept { return hi_; }

private:
    Vector lo_;
    Vector hi_;
};

}  // namespace bosvs
