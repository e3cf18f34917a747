#include "bosvs/linops.hpp"

#include "bosvs/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace bosvs {

namespace {

void check_size(Index got, Index want, const char* what) {
    if (got != want) {
        throw DimensionMismatch(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                                std::to_string(got));
    }
}

constexpr Index kGramDetectLimit = 2048;

}  // namespace

Vector LinOp::apply(VecCRef v) const {
    Vector out(rows());
    apply(v, out);
    return out;
}

Vector LinOp::apply_adjoint(VecCRef w) const {
    Vector out(cols());
    apply_adjoint(w, out);
    return out;
}

Matrix LinOp::to_dense() const {
    Matrix m(rows(), cols());
    Vector e = Vector::Zero(cols());
    Vector col(rows());
    for (Index j = 0; j < cols(); ++j) {
        e[j] = 1.0;
        apply(e, col);
        m.col(j) = col;
        e[j] = 0.0;
    }
    return m;
}

// ---------------------------------------------------------------------------

DenseOp::DenseOp(Matrix a) : a_(std::move(a)) {
    if (a_.cols() <= kGramDetectLimit) {
        gram_scale_ = detect_gram_scale(*this);
    }
}

void DenseOp::apply(VecCRef v, VecRef out) const {
    check_size(v.size(), a_.cols(), "DenseOp::apply");
    out.noalias() = a_ * v;
}

void DenseOp::apply_adjoint(VecCRef w, VecRef out) const {
    check_size(w.size(), a_.rows(), "DenseOp::apply_adjoint");
    out.noalias() = a_.transpose() * w;
}

// ---------------------------------------------------------------------------

EmbeddedIdentityOp::EmbeddedIdentityOp(Index n, Index rows, Index offset, double scale)
    : n_(n), rows_(rows), offset_(offset), scale_(scale) {
    if (n < 0 || offset < 0 || offset + n > rows) {
        throw DimensionMismatch("EmbeddedIdentityOp: block of size " + std::to_string(n) + " at offset " +
                                std::to_string(offset) + " does not fit in " + std::to_string(rows) + " rows");
    }
}

std::string EmbeddedIdentityOp::name() const {
    return scale_ == -1.0 ? "negidentity" : "identity";
}

void EmbeddedIdentityOp::apply(VecCRef v, VecRef out) const {
    check_size(v.size(), n_, "EmbeddedIdentityOp::apply");
    out.setZero();
    out.segment(offset_, n_) = scale_ * v;
}

void EmbeddedIdentityOp::apply_adjoint(VecCRef w, VecRef out) const {
    check_size(w.size(), rows_, "EmbeddedIdentityOp::apply_adjoint");
    out = scale_ * w.segment(offset_, n_);
}

// ---------------------------------------------------------------------------

StackOp::StackOp(std::vector<LinOpPtr> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) {
        throw InvalidArgument("StackOp needs at least one part");
    }
    cols_ = parts_.front()->cols();
    for (const auto& p : parts_) {
        if (p->cols() != cols_) {
            throw DimensionMismatch("StackOp: parts disagree on column count");
        }
        rows_ += p->rows();
    }
}

void StackOp::apply(VecCRef v, VecRef out) const {
    check_size(v.size(), cols_, "StackOp::apply");
    Index off = 0;
    for (const auto& p : parts_) {
        Vector tmp(p->rows());
        p->apply(v, tmp);
        out.segment(off, p->rows()) = tmp;
        off += p->rows();
    }
}

void StackOp::apply_adjoint(VecCRef w, VecRef out) const {
    check_size(w.size(), rows_, "StackOp::apply_adjoint");
    out.setZero();
    Vector tmp(cols_);
    Index off = 0;
    for (const auto& p : parts_) {
        p->apply_adjoint(w.segment(off, p->rows()), tmp);
        out += tmp;
        off += p->rows();
    }
}

std::optional<SeparableGram> StackOp::separable_gram() const {
    std::optional<SeparableGram> sum;
    double shift = 0.0;
    for (const auto& p : parts_) {
        if (auto g = p->separable_gram()) {
            if (!sum) {
                sum = std::move(g);
            } else if (g->rows != sum->rows || g->cols != sum->cols) {
                return std::nullopt;
            } else {
                sum->row_part += g->row_part;
                sum->col_part += g->col_part;
                sum->shift += g->shift;
            }
        } else if (auto c = p->gram_scale()) {
            shift += *c;
        } else {
            return std::nullopt;
        }
    }
    if (sum) {
        sum->shift += shift;
    }
    return sum;
}

std::optional<double> StackOp::gram_scale() const {
    double c = 0.0;
    for (const auto& p : parts_) {
        auto s = p->gram_scale();
        if (!s) {
            return std::nullopt;
        }
        c += *s;
    }
    return c;
}

// ---------------------------------------------------------------------------

HaarOp::HaarOp(Index image_rows, Index image_cols, int levels) : r_(image_rows), c_(image_cols), levels_(levels) {
    if (levels < 0) {
        throw InvalidArgument("HaarOp: negative level count");
    }
    const Index block = Index{1} << levels;
    if (r_ <= 0 || c_ <= 0 || r_ % block != 0 || c_ % block != 0) {
        throw DimensionMismatch("HaarOp: image dims must be divisible by 2^levels");
    }
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// One analysis level on the top-left h x w region of a row-major image of width `stride`.
void haar_forward_level(double* img, Index stride, Index h, Index w, std::vector<double>& buf) {
    buf.resize(static_cast<std::size_t>(std::max(h, w)));
    for (Index i = 0; i < h; ++i) {
        double* row = img + i * stride;
        for (Index k = 0; k < w / 2; ++k) {
            buf[k] = (row[2 * k] + row[2 * k + 1]) * kInvSqrt2;
            buf[w / 2 + k] = (row[2 * k] - row[2 * k + 1]) * kInvSqrt2;
        }
        std::copy(buf.begin(), buf.begin() + w, row);
    }
    for (Index j = 0; j < w; ++j) {
        for (Index k = 0; k < h / 2; ++k) {
            const double a = img[(2 * k) * stride + j];
            const double b = img[(2 * k + 1) * stride + j];
            buf[k] = (a + b) * kInvSqrt2;
            buf[h / 2 + k] = (a - b) * kInvSqrt2;
        }
        for (Index i = 0; i < h; ++i) {
            img[i * stride + j] = buf[i];
        }
    }
}

void haar_inverse_level(double* img, Index stride, Index h, Index w, std::vector<double>& buf) {
    buf.resize(static_cast<std::size_t>(std::max(h, w)));
    for (Index j = 0; j < w; ++j) {
        for (Index k = 0; k < h / 2; ++k) {
            const double a = img[k * stride + j];
            const double d = img[(h / 2 + k) * stride + j];
            buf[2 * k] = (a + d) * kInvSqrt2;
            buf[2 * k + 1] = (a - d) * kInvSqrt2;
        }
        for (Index i = 0; i < h; ++i) {
            img[i * stride + j] = buf[i];
        }
    }
    for (Index i = 0; i < h; ++i) {
        double* row = img + i * stride;
        for (Index k = 0; k < w / 2; ++k) {
            buf[2 * k] = (row[k] + row[w / 2 + k]) * kInvSqrt2;
            buf[2 * k + 1] = (row[k] - row[w / 2 + k]) * kInvSqrt2;
        }
        std::copy(buf.begin(), buf.begin() + w, row);
    }
}

}  // namespace

void HaarOp::apply(VecCRef v, VecRef out) const {
    check_size(v.size(), r_ * c_, "HaarOp::apply");
    out = v;
    std::vector<double> buf;
    Index h = r_;
    Index w = c_;
    for (int lev = 0; lev < levels_; ++lev) {
        haar_forward_level(out.data(), c_, h, w, buf);
        h /= 2;
        w /= 2;
    }
}

void HaarOp::apply_adjoint(VecCRef w_in, VecRef out) const {
    check_size(w_in.size(), r_ * c_, "HaarOp::apply_adjoint");
    out = w_in;
    std::vector<double> buf;
    for (int lev = levels_ - 1; lev >= 0; --lev) {
        haar_inverse_level(out.data(), c_, r_ >> lev, c_ >> lev, buf);
    }
}

// ---------------------------------------------------------------------------

Diff2DOp::Diff2DOp(Index image_rows, Index image_cols) : r_(image_rows), c_(image_cols) {
    if (r_ <= 0 || c_ <= 0) {
        throw DimensionMismatch("Diff2DOp: image dims must be positive");
    }
}

namespace {

Matrix neumann_laplacian(Index n) {
    Matrix l = Matrix::Zero(n, n);
    for (Index i = 0; i + 1 < n; ++i) {
        l(i, i) += 1.0;
        l(i + 1, i + 1) += 1.0;
        l(i, i + 1) = -1.0;
        l(i + 1, i) = -1.0;
    }
    return l;
}

}  // namespace

std::optional<SeparableGram> Diff2DOp::separable_gram() const {
    return SeparableGram{r_, c_, neumann_laplacian(r_), neumann_laplacian(c_), 0.0};
}

void Diff2DOp::apply(VecCRef v, VecRef out) const {
    check_size(v.size(), r_ * c_, "Diff2DOp::apply");
    for (Index i = 0; i < r_; ++i) {
        for (Index j = 0; j < c_; ++j) {
            const Index p = i * c_ + j;
            out[2 * p] = (j + 1 < c_) ? v[p + 1] - v[p] : 0.0;
            out[2 * p + 1] = (i + 1 < r_) ? v[p + c_] - v[p] : 0.0;
        }
    }
}

void Diff2DOp::apply_adjoint(VecCRef w, VecRef out) const {
    check_size(w.size(), 2 * r_ * c_, "Diff2DOp::apply_adjoint");
    out.setZero();
    for (Index i = 0; i < r_; ++i) {
        for (Index j = 0; j < c_; ++j) {
            const Index p = i * c_ + j;
            if (j + 1 < c_) {
                out[p + 1] += w[2 * p];
                out[p] -= w[2 * p];
            }
            if (i + 1 < r_) {
                out[p + c_] += w[2 * p + 1];
                out[p] -= w[2 * p + 1];
            }
        }
    }
}

// ---------------------------------------------------------------------------

BlurOp::BlurOp(Index image_rows, Index image_cols, Matrix kernel)
    : r_(image_rows), c_(image_cols), k_(std::move(kernel)) {
    if (r_ <= 0 || c_ <= 0) {
        throw DimensionMismatch("BlurOp: image dims must be positive");
    }
    if (k_.rows() % 2 == 0 || k_.cols() % 2 == 0) {
        throw InvalidArgument("BlurOp: kernel dims must be odd");
    }
}

BlurOp BlurOp::uniform(Index image_rows, Index image_cols, Index size) {
    if (size <= 0 || size % 2 == 0) {
        throw InvalidArgument("BlurOp::uniform: kernel size must be odd and positive");
    }
    return BlurOp(image_rows, image_cols,
                  Matrix::Constant(size, size, 1.0 / static_cast<double>(size * size)));
}

void BlurOp::apply(VecCRef v, VecRef out) const {
    check_size(v.size(), r_ * c_, "BlurOp::apply");
    const Index hr = k_.rows() / 2;
    const Index hc = k_.cols() / 2;
    for (Index i = 0; i < r_; ++i) {
        const bool row_inside = i >= hr && i + hr < r_;
        for (Index j = 0; j < c_; ++j) {
            if (row_inside && j >= hc && j + hc < c_) {
                double acc = 0.0;
                for (Index a = 0; a < k_.rows(); ++a) {
                    const double* src = v.data() + (i + a - hr) * c_ + (j - hc);
                    for (Index b = 0; b < k_.cols(); ++b) {
                        acc += k_(a, b) * src[b];
                    }
                }
                out[i * c_ + j] = acc;
                continue;
            }
            double acc = 0.0;
            for (Index a = 0; a < k_.rows(); ++a) {
                const Index ii = std::clamp(i + a - hr, Index{0}, r_ - 1);
                for (Index b = 0; b < k_.cols(); ++b) {
                    const Index jj = std::clamp(j + b - hc, Index{0}, c_ - 1);
                    acc += k_(a, b) * v[ii * c_ + jj];
                }
            }
            out[i * c_ + j] = acc;
        }
    }
}

void BlurOp::apply_adjoint(VecCRef w, VecRef out) const {
    check_size(w.size(), r_ * c_, "BlurOp::apply_adjoint");
    out.setZero();
    const Index hr = k_.rows() / 2;
    const Index hc = k_.cols() / 2;
    for (Index i = 0; i < r_; ++i) {
        const bool row_inside = i >= hr && i + hr < r_;
        for (Index j = 0; j < c_; ++j) {
            const double wij = w[i * c_ + j];
            if (row_inside && j >= hc && j + hc < c_) {
                for (Index a = 0; a < k_.rows(); ++a) {
                    double* dst = out.data() + (i + a - hr) * c_ + (j - hc);
                    for (Index b = 0; b < k_.cols(); ++b) {
                        dst[b] += k_(a, b) * wij;
                    }
                }
                continue;
            }
            for (Index a = 0; a < k_.rows(); ++a) {
                const Index ii = std::clamp(i + a - hr, Index{0}, r_ - 1);
                for (Index b = 0; b < k_.cols(); ++b) {
                    const Index jj = std::clamp(j + b - hc, Index{0}, c_ - 1);
                    out[ii * c_ + jj] += k_(a, b) * wij;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------

void GramBlock::apply(VecCRef v, VecRef out) const {
    switch (kind) {
        case Kind::Zero:
            out.setZero();
            break;
        case Kind::ScaledIdentity:
            out = scale * v;
            break;
        case Kind::Dense:
            out.noalias() = dense * v;
            break;
    }
}

void GramBlock::apply_transpose(VecCRef v, VecRef out) const {
    switch (kind) {
        case Kind::Zero:
            out.setZero();
            break;
        case Kind::ScaledIdentity:
            out = scale * v;
            break;
        case Kind::Dense:
            out.noalias() = dense.transpose() * v;
            break;
    }
}

Matrix GramBlock::to_dense() const {
    switch (kind) {
        case Kind::Zero:
            return Matrix::Zero(rows, cols);
        case Kind::ScaledIdentity:
            return scale * Matrix::Identity(rows, cols);
        case Kind::Dense:
            return dense;
    }
    return {};
}

GramBlock gram(const LinOp& a, const LinOp& b) {
    if (a.rows() != b.rows()) {
        throw DimensionMismatch("gram: operators have different row counts");
    }
    GramBlock g;
    g.rows = a.cols();
    g.cols = b.cols();
    const auto ea = a.embedding();
    const auto eb = b.embedding();
    if (ea && eb) {
        const Index a_end = ea->offset + a.cols();
        const Index b_end = eb->offset + b.cols();
        if (a_end <= eb->offset || b_end <= ea->offset) {
            g.kind = GramBlock::Kind::Zero;
            return g;
        }
        if (ea->offset == eb->offset && a.cols() == b.cols()) {
            g.kind = GramBlock::Kind::ScaledIdentity;
            g.scale = ea->scale * eb->scale;
            return g;
        }
    }
    if (&a == &b) {
        if (auto c = a.gram_scale()) {
            g.kind = GramBlock::Kind::ScaledIdentity;
            g.scale = *c;
            return g;
        }
    }
    g.kind = GramBlock::Kind::Dense;
    g.dense = a.to_dense().transpose() * b.to_dense();
    return g;
}

double smallest_gram_eigenvalue(const LinOp& a) {
    if (auto c = a.gram_scale()) {
        return *c;
    }
    const Matrix d = a.to_dense();
    const Matrix g = d.transpose() * d;
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues()[0]);
}

double largest_gram_eigenvalue(const LinOp& a, int max_iters, double rel_tol) {
    if (auto c = a.gram_scale()) {
        return *c;
    }
    // Deterministic, non-degenerate start vector.
    Vector v(a.cols());
    for (Index j = 0; j < v.size(); ++j) {
        v[j] = 1.0 + 0.5 * std::sin(static_cast<double>(j + 1));
    }
    v.normalize();
    Vector av(a.rows());
    Vector w(a.cols());
    double lam = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        a.apply(v, av);
        a.apply_adjoint(av, w);
        const double next = v.dot(w);
        const double nw = w.norm();
        if (nw == 0.0) {
            return 0.0;
        }
        v = w / nw;
        if (std::abs(next - lam) <= rel_tol * std::abs(next)) {
            lam = next;
            break;
        }
        lam = next;
    }
    return lam;
}

std::optional<double> detect_gram_scale(const LinOp& a, double tol) {
    if (a.cols() == 0) {
        return std::nullopt;
    }
    const Matrix d = a.to_dense();
    const Matrix g = d.transpose() * d;
    const double c = g.diagonal().mean();
    if (c <= 0.0) {
        return std::nullopt;
    }
    const Matrix diff = g - c * Matrix::Identity(g.rows(), g.cols());
    if (diff.cwiseAbs().maxCoeff() <= tol * c) {
        return c;
    }
    return std::nullopt;
}

}  // namespace bosvs
