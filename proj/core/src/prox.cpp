#include "bosvs/prox.hpp"

#include "bosvs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bosvs {

Vector soft_threshold(VecCRef v, double t) {
    if (!(t >= 0.0)) {
        throw InvalidArgument("soft_threshold: negative threshold");
    }
    Vector out(v.size());
    for (Index j = 0; j < v.size(); ++j) {
        const double a = std::abs(v[j]) - t;
        out[j] = a > 0.0 ? std::copysign(a, v[j]) : 0.0;
    }
    return out;
}

Vector group_shrink(VecCRef v, double t, Index group_size) {
    if (!(t >= 0.0)) {
        throw InvalidArgument("group_shrink: negative threshold");
    }
    if (group_size <= 0 || v.size() % group_size != 0) {
        throw DimensionMismatch("group_shrink: length is not a multiple of the group size");
    }
    Vector out(v.size());
    for (Index g = 0; g < v.size(); g += group_size) {
        const auto vg = v.segment(g, group_size);
        const double n = vg.norm();
        if (n <= t) {
            out.segment(g, group_size).setZero();
        } else {
            out.segment(g, group_size) = (1.0 - t / n) * vg;
        }
    }
    return out;
}

Vector box_clamp(VecCRef v, VecCRef lo, VecCRef hi) {
    if (lo.size() != v.size() || hi.size() != v.size()) {
        throw DimensionMismatch("box_clamp: bound length mismatch");
    }
    Vector out(v.size());
    for (Index j = 0; j < v.size(); ++j) {
        if (lo[j] > hi[j]) {
            throw InvalidArgument("box_clamp: empty box at index " + std::to_string(j));
        }
        out[j] = std::clamp(v[j], lo[j], hi[j]);
    }
    return out;
}

// ---------------------------------------------------------------------------

QuadraticLS::QuadraticLS(LinOpPtr op, Vector data, std::optional<double> lipschitz)
    : op_(std::move(op)), data_(std::move(data)) {
    if (!op_) {
        throw InvalidArgument("QuadraticLS: null operator");
    }
    if (data_.size() != op_->rows()) {
        throw DimensionMismatch("QuadraticLS: data length does not match operator rows");
    }
    lipschitz_ = lipschitz ? *lipschitz : largest_gram_eigenvalue(*op_);
}

double QuadraticLS::value(VecCRef x) const {
    Vector r = op_->apply(x);
    r -= data_;
    return 0.5 * r.squaredNorm();
}

double QuadraticLS::value_and_gradient(VecCRef x, VecRef g) const {
    Vector r = op_->apply(x);
    r -= data_;
    op_->apply_adjoint(r, g);
    return 0.5 * r.squaredNorm();
}

double QuadraticLS::gradient_difference_dot(VecCRef x, VecCRef y) const {
    return op_->apply(x - y).squaredNorm();
}

LinearizationGap QuadraticLS::linearization_gap(VecCRef x, double, VecCRef, VecCRef y) const {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double gap = 0.5 * op_->apply(y - x).squaredNorm();
    return {gap, 8.0 * eps * gap};
}

void QuadraticLS::gradient(VecCRef x, VecRef g) const {
    Vector r = op_->apply(x);
    r -= data_;
    op_->apply_adjoint(r, g);
}

void QuadraticLS::hessian_apply(VecCRef v, VecRef out) const {
    const Vector fv = op_->apply(v);
    op_->apply_adjoint(fv, out);
}

// ---------------------------------------------------------------------------

ScaledL1::ScaledL1(double weight) : weight_(weight) {
    if (!(weight >= 0.0)) {
        throw InvalidArgument("ScaledL1: weight must be nonnegative");
    }
}

GroupL2::GroupL2(double weight, Index group_size) : weight_(weight), group_(group_size) {
    if (!(weight >= 0.0)) {
        throw InvalidArgument("GroupL2: weight must be nonnegative");
    }
    if (group_size <= 0) {
        throw InvalidArgument("GroupL2: group size must be positive");
    }
}

double GroupL2::value(VecCRef x) const {
    if (x.size() % group_ != 0) {
        throw DimensionMismatch("GroupL2::value: length is not a multiple of the group size");
    }
    double s = 0.0;
    for (Index g = 0; g < x.size(); g += group_) {
        s += x.segment(g, group_).norm();
    }
    return weight_ * s;
}

BoxIndicator::BoxIndicator(Vector lo, Vector hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size()) {
        throw DimensionMismatch("BoxIndicator: bound length mismatch");
    }
    for (Index j = 0; j < lo_.size(); ++j) {
        if (lo_[j] > hi_[j]) {
            throw InvalidArgument("BoxIndicator: empty box at index " + std::to_string(j));
        }
    }
}

double BoxIndicator::value(VecCRef x) const {
    if (x.size() != lo_.size()) {
        throw DimensionMismatch("BoxIndicator::value: length mismatch");
    }
    for (Index j = 0; j < x.size(); ++j) {
        if (x[j] < lo_[j] || x[j] > hi_[j]) {
            return kInfinity;
        }
    }
    return 0.0;
}

}  // namespace bosvs
