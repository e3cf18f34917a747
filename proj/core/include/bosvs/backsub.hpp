#pragma once

#include "bosvs/linops.hpp"

#include <Eigen/Cholesky>

#include <span>
#include <vector>

namespace bosvs {

/// Block lower-triangular M and block-diagonal H built from the Gram products of the
/// trailing blocks A_2..A_m:
///
///     M_ij = A_{i+1}^T A_{j+1}  for j <= i,   0 above the diagonal,
///     H    = blockdiag(M_11, ..., M_{m-1,m-1}).
///
/// Diagonal blocks are factorized once so that M^{-T} H and the P = M H^{-1} M^T
/// quadratic form can be applied by block substitution.
class BackSubMatrices {
public:
    BackSubMatrices() = default;

    std::size_t num_blocks() const noexcept { return sizes_.size(); }
    Index total_size() const noexcept { return total_; }
    Index block_size(std::size_t i) const { return sizes_.at(i); }
    Index block_offset(std::size_t i) const { return offsets_.at(i); }

    /// Lower block (i, j), j <= i.
    const GramBlock& lower(std::size_t i, std::size_t j) const { return lower_.at(i).at(j); }
    /// Smallest eigenvalue of each diagonal block.
    const std::vector<double>& nu() const noexcept { return nu_; }

    /// True when every lower block is zero off the diagonal and the identity on it.
    bool is_identity() const;

    void apply_m(VecCRef v, VecRef out) const;
    void apply_mt(VecCRef v, VecRef out) const;
    void apply_h(VecCRef v, VecRef out) const;
    /// Solves M^T u = rhs by backward block substitution.
    void solve_mt(VecCRef rhs, VecRef u) const;
    /// Solves H u = rhs blockwise.
    void solve_h(VecCRef rhs, VecRef u) const;

    /// v^T M H^{-1} M^T v.
    double p_norm_squared(VecCRef v) const;

    Matrix dense_m() const;
    Matrix dense_h() const;

private:
    friend BackSubMatrices assemble_back_sub(std::span<const LinOpPtr> blocks, double rank_tol);

    void solve_diag(std::size_t i, VecCRef rhs, VecRef out) const;

    std::vector<Index> sizes_;
    std::vector<Index> offsets_;
    Index total_ = 0;
    std::vector<std::vector<GramBlock>> lower_;
    std::vector<Eigen::LLT<Matrix>> diag_llt_;
    std::vector<double> nu_;
};

/// Builds M and H for blocks A_2..A_m (pass the trailing operators only).
/// Throws RankDeficient(i) when the smallest eigenvalue of A_i^T A_i is at most
/// rank_tol times its largest; i is the index into `blocks`.
BackSubMatrices assemble_back_sub(std::span<const LinOpPtr> blocks, double rank_tol = 1e-10);

/// y_plus + alpha * M^{-T} H (z_plus - y_plus).
Vector back_substitute(const BackSubMatrices& bs, VecCRef y_plus, VecCRef z_plus, double alpha);

}  // namespace bosvs
