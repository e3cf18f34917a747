#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bosvs {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VecCRef = Eigen::Ref<const Vector>;
using VecRef = Eigen::Ref<Vector>;

/// Structural description of a signed, row-embedded identity: the operator maps v to
/// scale * v placed in rows [offset, offset + cols) and zero elsewhere.
struct Embedding {
    Index offset = 0;
    double scale = 1.0;
};

/// A^T A = R (x) I_cols + I_rows (x) C + shift I for an operator acting on row-major
/// rows x cols images: `row_part` (rows x rows) acts along the row index and
/// `col_part` (cols x cols) along the column index.
struct SeparableGram {
    Index rows = 0;
    Index cols = 0;
    Matrix row_part;
    Matrix col_part;
    double shift = 0.0;
};

/// Matrix-free linear operator A : R^cols -> R^rows.
///
/// Implementations are immutable after construction. `apply` and `apply_adjoint`
/// write into caller-provided storage of the right size; the allocating overloads
/// are conveniences for cold paths and tests.
class LinOp {
public:
    virtual ~LinOp() = default;

    virtual Index rows() const = 0;
    virtual Index cols() const = 0;
    virtual std::string name() const = 0;

    virtual void apply(VecCRef v, VecRef out) const = 0;
    virtual void apply_adjoint(VecCRef w, VecRef out) const = 0;

    Vector apply(VecCRef v) const;
    Vector apply_adjoint(VecCRef w) const;

    /// Dense materialization, column by column unless overridden.
    virtual Matrix to_dense() const;

    /// Set when the operator is a signed identity embedded into a taller range.
    virtual std::optional<Embedding> embedding() const { return std::nullopt; }

    /// Set when A^T A = c I is known from structure (orthonormal transforms, signed identities).
    virtual std::optional<double> gram_scale() const { return std::nullopt; }

    /// Set when A^T A has Kronecker-separable structure on an image grid.
    virtual std::optional<SeparableGram> separable_gram() const { return std::nullopt; }
};

using LinOpPtr = std::shared_ptr<const LinOp>;

class DenseOp final : public LinOp {
public:
    explicit DenseOp(Matrix a);

    Index rows() const override { return a_.rows(); }
    Index cols() const override { return a_.cols(); }
    std::string name() const override { return "dense"; }
    using LinOp::apply;
    using LinOp::apply_adjoint;
    void apply(VecCRef v, VecRef out) const override;
    void apply_adjoint(VecCRef w, VecRef out) const override;
    Matrix to_dense() const override { return a_; }
    std::optional<double> gram_scale() const override { return gram_scale_; }

    const Matrix& matrix() const noexcept { return a_; }

private:
    Matrix a_;
    std::optional<double> gram_scale_;
};

/// scale * I_n embedded at row `offset` of an operator with `rows` rows.
/// With rows == n and offset == 0 this is the plain (signed) identity.
class EmbeddedIdentityOp final : public LinOp {
public:
    EmbeddedIdentityOp(Index n, Index rows, Index offset, double scale);

    Index rows() const override { return rows_; }
    Index cols() const override { return n_; }
    std::string name() const override;
    using LinOp::apply;
    using LinOp::apply_adjoint;
    void apply(VecCRef v, VecRef out) const override;
    void apply_adjoint(VecCRef w, VecRef out) const override;
    std::optional<Embedding> embedding() const override { return Embedding{offset_, scale_}; }
    std::optional<double> gram_scale() const override { return scale_ * scale_; }

private:
    Index n_;
    Index rows_;
    Index offset_;
    double scale_;
};

/// Vertical concatenation (A_1; A_2; ...). All parts share the column count.
class StackOp final : public LinOp {
public:
    explicit StackOp(std::vector<LinOpPtr> parts);

    Index rows() const override { return rows_; }
    Index cols() const override { return cols_; }
    std::string name() const override { return "stack"; }
    using LinOp::apply;
    using LinOp::apply_adjoint;
    void apply(VecCRef v, VecRef out) const override;
    void apply_adjoint(VecCRef w, VecRef out) const override;
    std::optional<double> gram_scale() const override;
    /// Sum of the parts' Gram structures when every part is separable or a scaled identity
    /// and at least one is separable.
    std::optional<SeparableGram> separable_gram() const override;

    const std::vector<LinOpPtr>& parts() const noexcept { return parts_; }

private:
    std::vector<LinOpPtr> parts_;
    Index rows_ = 0;
    Index cols_ = 0;
};

/// Orthonormal 2-D Haar analysis transform on a rows x cols image stored row-major.
/// `apply` computes the wavelet coefficients (Psi^T u); `apply_adjoint` synthesizes.
class HaarOp final : public LinOp {
public:
    HaarOp(Index image_rows, Index image_cols, int levels);

    Index rows() const override { return r_ * c_; }
    Index cols() const override { return r_ * c_; }
    std::string name() const override { return "haar"; }
    using LinOp::apply;
    using LinOp::apply_adjoint;
    void apply(VecCRef v, VecRef out) const override;
    void apply_adjoint(VecCRef w, VecRef out) const override;
    std::optional<double> gram_scale() const override { return 1.0; }

    int levels() const noexcept { return levels_; }
    Index image_rows() const noexcept { return r_; }
    Index image_cols() const noexcept { return c_; }

private:
    Index r_;
    Index c_;
    int levels_;
};

/// Forward differences of a row-major rows x cols image with replicate (Neumann)
/// boundary: the difference across the last row/column is zero. Output is
/// interleaved per pixel, (dx_p, dy_p), so each pixel's gradient is a contiguous
/// group of two entries.
class Diff2DOp final : public LinOp {
public:
    Diff2DOp(Index image_rows, Index image_cols);

    Index rows() const override { return 2 * r_ * c_; }
    Index cols() const override { return r_ * c_; }
    std::string name() const override { return "diff2d"; }
    /// Tridiagonal 1-D Neumann Laplacians along each axis.
    std::optional<SeparableGram> separable_gram() const override;
    using LinOp::apply;
    using LinOp::apply_adjoint;
    void apply(VecCRef v, VecRef out) const override;
    void apply_adjoint(VecCRef w, VecRef out) const override;

    Index image_rows() const noexcept { return r_; }
    Index image_cols() const noexcept { return c_; }

private:
    Index r_;
    Index c_;
};

/// Explicit 2-D correlation with a small kernel and replicate boundary.
class BlurOp final : public LinOp {
public:
    BlurOp(Index image_rows, Index image_cols, Matrix kernel);

    /// size x size kernel with all entries 1/size^2.
    static BlurOp uniform(Index image_rows, Index image_cols, Index size);

    Index rows() const override { return r_ * c_; }
    Index cols() const override { return r_ * c_; }
    std::string name() const override { return "blur"; }
    using LinOp::apply;
    using LinOp::apply_adjoint;
    void apply(VecCRef v, VecRef out) const override;
    void apply_adjoint(VecCRef w, VecRef out) const override;

    const Matrix& kernel() const noexcept { return k_; }
    Index image_rows() const noexcept { return r_; }
    Index image_cols() const noexcept { return c_; }

private:
    Index r_;
    Index c_;
    Matrix k_;
};

/// Representation of one Gram block A_i^T A_j.
struct GramBlock {
    enum class Kind { Zero, ScaledIdentity, Dense };
    Kind kind = Kind::Zero;
    Index rows = 0;
    Index cols = 0;
    double scale = 0.0;  // ScaledIdentity only
    Matrix dense;        // Dense only

    /// out = G v
    void apply(VecCRef v, VecRef out) const;
    /// out = G^T v
    void apply_transpose(VecCRef v, VecRef out) const;
    Matrix to_dense() const;
};

/// A^T B, using structure when both operators are embeddings; dense product otherwise.
GramBlock gram(const LinOp& a, const LinOp& b);

/// Smallest eigenvalue of A^T A (0 signals rank deficiency).
double smallest_gram_eigenvalue(const LinOp& a);

/// Largest eigenvalue of A^T A via power iteration from a fixed start vector.
double largest_gram_eigenvalue(const LinOp& a, int max_iters = 500, double rel_tol = 1e-12);

/// Checks A^T A = c I numerically (dense) when no structural hint exists.
/// Returns c on success.
std::optional<double> detect_gram_scale(const LinOp& a, double tol = 1e-12);

}  // namespace bosvs
