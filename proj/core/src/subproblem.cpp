#include "bosvs/subproblem.hpp"

#include "bosvs/errors.hpp"

#include <Eigen/Eigenvalues>

namespace bosvs {

BlockSubproblem::BlockSubproblem(const Problem& p, std::size_t block, Index spectral_limit)
    : p_(&p), block_(block) {
    if (block >= p.num_blocks()) {
        throw InvalidArgument("BlockSubproblem: block index out of range");
    }
    const Block& blk = p.block(block);
    gram_scale_ = blk.A->gram_scale();
    if (!gram_scale_ && blk.A->cols() <= spectral_limit) {
        gram_scale_ = detect_gram_scale(*blk.A);
    }
    if (gram_scale_ && *gram_scale_ > 0.0) {
        kind_ = Kind::ScaledIdentityProx;
        return;
    }
    gram_scale_.reset();
    if (!blk.h->is_zero()) {
        kind_ = Kind::Unsupported;
        return;
    }
    if (auto sep = blk.A->separable_gram(); sep && sep->rows * sep->cols == blk.A->cols()) {
        Eigen::SelfAdjointEigenSolver<Matrix> er(sep->row_part);
        Eigen::SelfAdjointEigenSolver<Matrix> ec(sep->col_part);
        row_vecs_ = er.eigenvectors();
        col_vecs_ = ec.eigenvectors();
        grid_eigs_.resize(sep->rows, sep->cols);
        for (Index i = 0; i < sep->rows; ++i) {
            for (Index j = 0; j < sep->cols; ++j) {
                grid_eigs_(i, j) = std::max(er.eigenvalues()[i] + ec.eigenvalues()[j] + sep->shift, 0.0);
            }
        }
        kind_ = Kind::SeparableSpectral;
    } else if (blk.A->cols() <= spectral_limit) {
        const Matrix a = blk.A->to_dense();
        Eigen::SelfAdjointEigenSolver<Matrix> es(a.transpose() * a);
        eigvecs_ = es.eigenvectors();
        eigvals_ = es.eigenvalues().cwiseMax(0.0);
        kind_ = Kind::Spectral;
    } else {
        kind_ = Kind::ConjugateGradient;
    }
}

void BlockSubproblem::solve_linear(VecCRef rhs, double delta, double rho, VecCRef warm, VecRef out) const {
    if (kind_ == Kind::Spectral) {
        Vector coeff = eigvecs_.transpose() * rhs;
        coeff.array() /= delta + rho * eigvals_.array();
        out.noalias() = eigvecs_ * coeff;
        return;
    }
    if (kind_ == Kind::SeparableSpectral) {
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const Index r = grid_eigs_.rows();
        const Index c = grid_eigs_.cols();
        const Eigen::Map<const RowMajor> x(rhs.data(), r, c);
        RowMajor coeff = row_vecs_.transpose() * x * col_vecs_;
        coeff.array() /= delta + rho * grid_eigs_.array();
        Eigen::Map<RowMajor>(out.data(), r, c).noalias() = row_vecs_ * coeff * col_vecs_.transpose();
        return;
    }
    const LinOp& a = *p_->block(block_).A;
    Vector tmp(a.rows());
    auto apply = [&](VecCRef v, VecRef av) {
        a.apply(v, tmp);
        a.apply_adjoint(tmp, av);
        av *= rho;
        av += delta * v;
    };
    out = warm;
    const double tol = 1e-13 * std::max(rhs.norm(), 1e-300);
    const long maxit = std::max<long>(1000, 10 * rhs.size());
    if (conjugate_gradient(apply, rhs, out, tol, maxit) < 0) {
        throw CGNotConverged("block " + std::to_string(block_) + ": linear subproblem CG did not converge in " +
                             std::to_string(maxit) + " iterations");
    }
}

Vector BlockSubproblem::minimize(VecCRef g, VecCRef center, double delta, VecCRef c, double rho) const {
    const Block& blk = p_->block(block_);
    if (kind_ == Kind::Unsupported) {
        throw UnsupportedSubproblem("block " + std::to_string(block_) + ": h = '" + blk.h->name() +
                                    "' needs A^T A = cI, which does not hold; supply a custom block solver");
    }
    if (!(delta > 0.0) || !(rho > 0.0)) {
        throw InvalidArgument("BlockSubproblem::minimize: delta and rho must be positive");
    }
    Vector rhs = blk.A->apply_adjoint(c);
    rhs *= rho;
    rhs += delta * center;
    rhs -= g;
    Vector u(rhs.size());
    if (kind_ == Kind::ScaledIdentityProx) {
        const double denom = delta + rho * *gram_scale_;
        if (blk.h->is_zero()) {
            u = rhs / denom;
        } else {
            blk.h->prox(rhs / denom, 1.0 / denom, u);
        }
        return u;
    }
    solve_linear(rhs, delta, rho, center, u);
    return u;
}

}  // namespace bosvs
