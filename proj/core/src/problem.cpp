#include "bosvs/problem.hpp"

#include "bosvs/errors.hpp"

#include <cmath>
#include <limits>

namespace bosvs {

Vector SmoothPart::gradient(VecCRef x) const {
    Vector g(x.size());
    gradient(x, g);
    return g;
}

double SmoothPart::value_and_gradient(VecCRef x, VecRef g) const {
    gradient(x, g);
    return value(x);
}

double SmoothPart::gradient_difference_dot(VecCRef x, VecCRef y) const {
    return (gradient(x) - gradient(y)).dot(x - y);
}

LinearizationGap SmoothPart::linearization_gap(VecCRef x, double fx, VecCRef gx, VecCRef y) const {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double fy = value(y);
    const double lin = gx.dot(y - x);
    return {fy - fx - lin, 8.0 * eps * (std::abs(fx) + std::abs(lin) + std::abs(fy))};
}

void SmoothPart::hessian_apply(VecCRef, VecRef) const {
    throw UnsupportedSubproblem("smooth part '" + name() + "' has no Hessian product");
}

Vector NonsmoothPart::prox(VecCRef v, double t) const {
    Vector out(v.size());
    prox(v, t, out);
    return out;
}

BlockLayout::BlockLayout(std::vector<Index> block_sizes) : sizes(std::move(block_sizes)) {
    offsets.reserve(sizes.size());
    for (Index s : sizes) {
        offsets.push_back(total);
        total += s;
    }
}

namespace {

std::vector<Index> block_sizes(const std::vector<Block>& blocks) {
    std::vector<Index> sizes;
    sizes.reserve(blocks.size());
    for (const auto& b : blocks) {
        if (!b.A || !b.f || !b.h) {
            throw InvalidArgument("Problem: every block needs A, f and h");
        }
        sizes.push_back(b.A->cols());
    }
    return sizes;
}

}  // namespace

Problem::Problem(std::vector<Block> blocks, Vector b)
    : blocks_(std::move(blocks)), b_(std::move(b)), layout_(block_sizes(blocks_)) {
    if (blocks_.empty()) {
        throw InvalidArgument("Problem: at least one block is required");
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (blocks_[i].A->rows() != b_.size()) {
            throw DimensionMismatch("Problem: A_" + std::to_string(i) + " has " +
                                    std::to_string(blocks_[i].A->rows()) + " rows, b has " +
                                    std::to_string(b_.size()));
        }
    }
}

void Problem::check_stacked(const Vector& x, const char* what) const {
    if (x.size() != layout_.total) {
        throw DimensionMismatch(std::string(what) + ": stacked vector has length " + std::to_string(x.size()) +
                                ", expected " + std::to_string(layout_.total));
    }
}

void Problem::apply_a(const Vector& x, VecRef out) const {
    check_stacked(x, "Problem::apply_a");
    out.setZero();
    Vector tmp(rows());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        blocks_[i].A->apply(layout_.block(x, i), tmp);
        out += tmp;
    }
}

Vector Problem::residual(const Vector& x) const {
    Vector r(rows());
    apply_a(x, r);
    r -= b_;
    return r;
}

Vector Problem::apply_a_adjoint(VecCRef w) const {
    if (w.size() != rows()) {
        throw DimensionMismatch("Problem::apply_a_adjoint: wrong length");
    }
    Vector out(layout_.total);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        Vector tmp(layout_.sizes[i]);
        blocks_[i].A->apply_adjoint(w, tmp);
        layout_.block(out, i) = tmp;
    }
    return out;
}

void Problem::check_column_rank(double rank_tol) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const LinOp& a = *blocks_[i].A;
        const double nu = smallest_gram_eigenvalue(a);
        const double top = largest_gram_eigenvalue(a);
        if (!(top > 0.0) || nu <= rank_tol * top) {
            throw RankDeficient(i, nu, top);
        }
    }
}

double objective(const Problem& p, const Vector& x) {
    p.check_stacked(x, "objective");
    double total = 0.0;
    for (std::size_t i = 0; i < p.num_blocks(); ++i) {
        const auto xi = p.layout().block(x, i);
        total += p.block(i).f->value(xi) + p.block(i).h->value(xi);
    }
    return total;
}

double augmented_lagrangian(const Problem& p, const Vector& x, VecCRef lambda, double rho) {
    if (!(rho > 0.0)) {
        throw InvalidArgument("augmented_lagrangian: rho must be positive");
    }
    if (lambda.size() != p.rows()) {
        throw DimensionMismatch("augmented_lagrangian: multiplier length mismatch");
    }
    const Vector r = p.residual(x);
    return objective(p, x) + lambda.dot(r) + 0.5 * rho * r.squaredNorm();
}

Vector b_i_k(const Problem& p, std::size_t i, const Vector& z, const Vector& y) {
    if (i >= p.num_blocks()) {
        throw InvalidArgument("b_i_k: block index out of range");
    }
    p.check_stacked(z, "b_i_k(z)");
    p.check_stacked(y, "b_i_k(y)");
    Vector out = p.b();
    Vector tmp(p.rows());
    for (std::size_t j = 0; j < p.num_blocks(); ++j) {
        if (j == i) {
            continue;
        }
        const Vector& src = j < i ? z : y;
        p.block(j).A->apply(p.layout().block(src, j), tmp);
        out -= tmp;
    }
    return out;
}

namespace {

void check_block_args(const Problem& p, std::size_t i, Index u_size, Index b_size, Index lambda_size,
                      double rho, const char* what) {
    if (i >= p.num_blocks()) {
        throw InvalidArgument(std::string(what) + ": block index out of range");
    }
    if (u_size != p.layout().sizes[i] || b_size != p.rows() || lambda_size != p.rows()) {
        throw DimensionMismatch(std::string(what) + ": argument length mismatch");
    }
    if (!(rho > 0.0)) {
        throw InvalidArgument(std::string(what) + ": rho must be positive");
    }
}

double coupling_term(const Problem& p, std::size_t i, VecCRef u, VecCRef b_ik, VecCRef lambda, double rho) {
    Vector r = p.block(i).A->apply(u);
    r -= b_ik;
    r += lambda / rho;
    return 0.5 * rho * r.squaredNorm();
}

}  // namespace

double phi_i_k(const Problem& p, std::size_t i, VecCRef u, VecCRef v, double delta, VecCRef b_ik,
               VecCRef lambda, double rho) {
    check_block_args(p, i, u.size(), b_ik.size(), lambda.size(), rho, "phi_i_k");
    if (v.size() != u.size()) {
        throw DimensionMismatch("phi_i_k: expansion point length mismatch");
    }
    if (!(delta > 0.0)) {
        throw InvalidArgument("phi_i_k: delta must be positive");
    }
    const Block& blk = p.block(i);
    const Vector d = u - v;
    const double h = blk.h->value(u);
    return blk.f->value(v) + blk.f->gradient(v).dot(d) + 0.5 * delta * d.squaredNorm() + h +
           coupling_term(p, i, u, b_ik, lambda, rho);
}

double L_i_k(const Problem& p, std::size_t i, VecCRef u, VecCRef b_ik, VecCRef lambda, double rho) {
    check_block_args(p, i, u.size(), b_ik.size(), lambda.size(), rho, "L_i_k");
    const Block& blk = p.block(i);
    return blk.f->value(u) + blk.h->value(u) + coupling_term(p, i, u, b_ik, lambda, rho);
}

KKTReport kkt_residual(const Problem& p, const Vector& x, VecCRef lambda) {
    p.check_stacked(x, "kkt_residual");
    if (lambda.size() != p.rows()) {
        throw DimensionMismatch("kkt_residual: multiplier length mismatch");
    }
    KKTReport rep;
    rep.primal_residual = p.residual(x).norm();
    rep.aggregate = rep.primal_residual;
    rep.block_residuals.reserve(p.num_blocks());
    for (std::size_t i = 0; i < p.num_blocks(); ++i) {
        const Block& blk = p.block(i);
        const auto xi = p.layout().block(x, i);
        Vector step = xi - blk.f->gradient(xi) - blk.A->apply_adjoint(lambda);
        const double gap = (xi - blk.h->prox(step, 1.0)).norm();
        rep.block_residuals.push_back(gap);
        rep.aggregate += gap;
    }
    return rep;
}

}  // namespace bosvs
