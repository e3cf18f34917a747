#include "bosvs/backsub.hpp"

#include "bosvs/errors.hpp"

#include <Eigen/Eigenvalues>

namespace bosvs {

BackSubMatrices assemble_back_sub(std::span<const LinOpPtr> blocks, double rank_tol) {
    BackSubMatrices bs;
    const std::size_t nb = blocks.size();
    bs.sizes_.reserve(nb);
    bs.offsets_.reserve(nb);
    for (const auto& a : blocks) {
        bs.offsets_.push_back(bs.total_);
        bs.sizes_.push_back(a->cols());
        bs.total_ += a->cols();
    }
    bs.lower_.resize(nb);
    bs.diag_llt_.resize(nb);
    bs.nu_.resize(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            bs.lower_[i].push_back(gram(*blocks[i], *blocks[j]));
        }
        const GramBlock& d = bs.lower_[i][i];
        double smallest = 0.0;
        double largest = 0.0;
        if (d.kind == GramBlock::Kind::ScaledIdentity) {
            smallest = largest = d.scale;
        } else if (d.kind == GramBlock::Kind::Dense) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(d.dense, Eigen::EigenvaluesOnly);
            smallest = es.eigenvalues()[0];
            largest = es.eigenvalues()[es.eigenvalues().size() - 1];
        }
        if (!(largest > 0.0) || smallest <= rank_tol * largest) {
            throw RankDeficient(i, smallest, largest);
        }
        bs.nu_[i] = smallest;
        if (d.kind == GramBlock::Kind::Dense) {
            bs.diag_llt_[i].compute(d.dense);
        }
    }
    return bs;
}

bool BackSubMatrices::is_identity() const {
    for (std::size_t i = 0; i < lower_.size(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const GramBlock& g = lower_[i][j];
            if (i == j) {
                if (g.kind != GramBlock::Kind::ScaledIdentity || g.scale != 1.0) {
                    return false;
                }
            } else if (g.kind != GramBlock::Kind::Zero) {
                return false;
            }
        }
    }
    return true;
}

void BackSubMatrices::solve_diag(std::size_t i, VecCRef rhs, VecRef out) const {
    const GramBlock& d = lower_[i][i];
    if (d.kind == GramBlock::Kind::ScaledIdentity) {
        out = rhs / d.scale;
    } else {
        out = diag_llt_[i].solve(rhs);
    }
}

void BackSubMatrices::apply_m(VecCRef v, VecRef out) const {
    if (v.size() != total_) {
        throw DimensionMismatch("BackSubMatrices::apply_m: wrong vector length");
    }
    Vector tmp;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        auto oi = out.segment(offsets_[i], sizes_[i]);
        oi.setZero();
        for (std::size_t j = 0; j <= i; ++j) {
            tmp.resize(sizes_[i]);
            lower_[i][j].apply(v.segment(offsets_[j], sizes_[j]), tmp);
            oi += tmp;
        }
    }
}

void BackSubMatrices::apply_mt(VecCRef v, VecRef out) const {
    if (v.size() != total_) {
        throw DimensionMismatch("BackSubMatrices::apply_mt: wrong vector length");
    }
    Vector tmp;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        auto oi = out.segment(offsets_[i], sizes_[i]);
        oi.setZero();
        for (std::size_t j = i; j < sizes_.size(); ++j) {
            tmp.resize(sizes_[i]);
            lower_[j][i].apply_transpose(v.segment(offsets_[j], sizes_[j]), tmp);
            oi += tmp;
        }
    }
}

void BackSubMatrices::apply_h(VecCRef v, VecRef out) const {
    if (v.size() != total_) {
        throw DimensionMismatch("BackSubMatrices::apply_h: wrong vector length");
    }
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        Vector tmp(sizes_[i]);
        lower_[i][i].apply(v.segment(offsets_[i], sizes_[i]), tmp);
        out.segment(offsets_[i], sizes_[i]) = tmp;
    }
}

void BackSubMatrices::solve_mt(VecCRef rhs, VecRef u) const {
    if (rhs.size() != total_ || u.size() != total_) {
        throw DimensionMismatch("BackSubMatrices::solve_mt: wrong vector length");
    }
    Vector acc;
    Vector tmp;
    for (std::size_t ii = sizes_.size(); ii-- > 0;) {
        acc = rhs.segment(offsets_[ii], sizes_[ii]);
        for (std::size_t j = ii + 1; j < sizes_.size(); ++j) {
            tmp.resize(sizes_[ii]);
            lower_[j][ii].apply_transpose(u.segment(offsets_[j], sizes_[j]), tmp);
            acc -= tmp;
        }
        tmp.resize(sizes_[ii]);
        solve_diag(ii, acc, tmp);
        u.segment(offsets_[ii], sizes_[ii]) = tmp;
    }
}

void BackSubMatrices::solve_h(VecCRef rhs, VecRef u) const {
    if (rhs.size() != total_ || u.size() != total_) {
        throw DimensionMismatch("BackSubMatrices::solve_h: wrong vector length");
    }
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        Vector tmp(sizes_[i]);
        solve_diag(i, rhs.segment(offsets_[i], sizes_[i]), tmp);
        u.segment(offsets_[i], sizes_[i]) = tmp;
    }
}

double BackSubMatrices::p_norm_squared(VecCRef v) const {
    Vector mtv(total_);
    apply_mt(v, mtv);
    Vector hinv(total_);
    solve_h(mtv, hinv);
    return mtv.dot(hinv);
}

Matrix BackSubMatrices::dense_m() const {
    Matrix m = Matrix::Zero(total_, total_);
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            m.block(offsets_[i], offsets_[j], sizes_[i], sizes_[j]) = lower_[i][j].to_dense();
        }
    }
    return m;
}

Matrix BackSubMatrices::dense_h() const {
    Matrix h = Matrix::Zero(total_, total_);
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        h.block(offsets_[i], offsets_[i], sizes_[i], sizes_[i]) = lower_[i][i].to_dense();
    }
    return h;
}

Vector back_substitute(const BackSubMatrices& bs, VecCRef y_plus, VecCRef z_plus, double alpha) {
    if (y_plus.size() != bs.total_size() || z_plus.size() != bs.total_size()) {
        throw DimensionMismatch("back_substitute: stacked vectors do not match the block structure");
    }
    Vector diff = z_plus - y_plus;
    Vector rhs(bs.total_size());
    bs.apply_h(diff, rhs);
    Vector u(bs.total_size());
    bs.solve_mt(rhs, u);
    return y_plus + alpha * u;
}

}  // namespace bosvs
