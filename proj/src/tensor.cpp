#include "bdsense/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include <fmt/format.h>

#include "bdsense/error.hpp"

namespace bdsense {

namespace {

void require_positive(const Shape& shape) {
    for (Index e : shape)
        if (e < 1) throw Error(Errc::shape, fmt::format("tensor extents must be positive, got {}", e));
}

void require_mode(Index mode, Index order) {
    if (mode < 1 || mode > order)
        throw Error(Errc::invalid_mode, fmt::format("mode {} out of range 1..{}", mode, order));
}

}  // namespace

Index shape_product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

ComplexTensor::ComplexTensor(Shape shape) : shape_(std::move(shape)) {
    require_positive(shape_);
    data_.assign(static_cast<std::size_t>(shape_product(shape_)), cd{0.0, 0.0});
}

ComplexTensor::ComplexTensor(Shape shape, std::vector<cd> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    require_positive(shape_);
    if (static_cast<Index>(data_.size()) != shape_product(shape_))
        throw Error(Errc::shape, fmt::format("data length {} does not match shape product {}",
                                             data_.size(), shape_product(shape_)));
}

ComplexTensor ComplexTensor::from_matrix(const ComplexMatrix& m) {
    return ComplexTensor({m.rows(), m.cols()}, std::vector<cd>(m.data(), m.data() + m.size()));
}

Index ComplexTensor::extent(Index mode) const {
    require_mode(mode, order());
    return shape_[static_cast<std::size_t>(mode - 1)];
}

Index ComplexTensor::linear_index(std::span<const Index> idx) const {
    if (idx.size() != shape_.size())
        throw Error(Errc::shape, fmt::format("index has {} entries for an order-{} tensor",
                                             idx.size(), shape_.size()));
    Index lin = 0;
    Index stride = 1;
    for (std::size_t d = 0; d < shape_.size(); ++d) {
        if (idx[d] < 0 || idx[d] >= shape_[d])
            throw Error(Errc::shape, fmt::format("index {} out of range for extent {}", idx[d], shape_[d]));
        lin += idx[d] * stride;
        stride *= shape_[d];
    }
    return lin;
}

ComplexTensor ComplexTensor::reshaped(Shape shape) const {
    if (shape_product(shape) != size())
        throw Error(Errc::shape, "reshape must preserve the element count");
    return ComplexTensor(std::move(shape), data_);
}

ComplexMatrix ComplexTensor::as_matrix() const {
    if (order() != 2) throw Error(Errc::shape, "as_matrix requires an order-2 tensor");
    return Eigen::Map<const ComplexMatrix>(data_.data(), shape_[0], shape_[1]);
}

double ComplexTensor::squared_norm() const {
    double s = 0.0;
    for (const cd& v : data_) s += std::norm(v);
    return s;
}

double ComplexTensor::norm() const { return std::sqrt(squared_norm()); }

ComplexTensor& ComplexTensor::operator*=(cd s) {
    for (cd& v : data_) v *= s;
    return *this;
}

ComplexTensor& ComplexTensor::operator+=(const ComplexTensor& other) {
    if (other.shape_ != shape_) throw Error(Errc::shape, "tensor sum requires equal shapes");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

ComplexTensor& ComplexTensor::operator-=(const ComplexTensor& other) {
    if (other.shape_ != shape_) throw Error(Errc::shape, "tensor difference requires equal shapes");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

ComplexTensor operator*(cd s, ComplexTensor t) { return t *= s; }
ComplexTensor operator+(ComplexTensor a, const ComplexTensor& b) { return a += b; }
ComplexTensor operator-(ComplexTensor a, const ComplexTensor& b) { return a -= b; }

double relative_error(const ComplexTensor& a, const ComplexTensor& b) {
    return (a - b).norm() / b.norm();
}

double relative_error(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(Errc::shape, "relative_error requires equal shapes");
    return (a - b).norm() / b.norm();
}

// Element (.., i_n, ..) sits at  ib + before·(i_n + I_n·ia)  where ib runs over
// the modes below n and ia over the modes above n. Its unfolded column is
// ib + before·ia, which is the lowest-remaining-mode-fastest rule.
ComplexMatrix unfold(const ComplexTensor& a, Index mode) {
    require_mode(mode, a.order());
    const auto& shape = a.shape();
    const auto k = static_cast<std::size_t>(mode - 1);
    const Index in = shape[k];
    const Index before = std::accumulate(shape.begin(), shape.begin() + static_cast<std::ptrdiff_t>(k),
                                         Index{1}, std::multiplies<>());
    const Index after = a.size() / (before * in);

    ComplexMatrix m(in, before * after);
    const auto data = a.data();
    for (Index ia = 0; ia < after; ++ia)
        for (Index i = 0; i < in; ++i) {
            const cd* src = data.data() + before * (i + in * ia);
            for (Index ib = 0; ib < before; ++ib) m(i, ib + before * ia) = src[ib];
        }
    return m;
}

ComplexTensor fold(const ComplexMatrix& m, Index mode, const Shape& shape) {
    require_mode(mode, static_cast<Index>(shape.size()));
    require_positive(shape);
    const auto k = static_cast<std::size_t>(mode - 1);
    const Index in = shape[k];
    const Index total = shape_product(shape);
    if (m.rows() != in || m.rows() * m.cols() != total)
        throw Error(Errc::shape, fmt::format("cannot fold a {}x{} matrix along mode {} into {} elements",
                                             m.rows(), m.cols(), mode, total));
    const Index before = std::accumulate(shape.begin(), shape.begin() + static_cast<std::ptrdiff_t>(k),
                                         Index{1}, std::multiplies<>());
    const Index after = total / (before * in);

    ComplexTensor t(shape);
    auto data = t.data();
    for (Index ia = 0; ia < after; ++ia)
        for (Index i = 0; i < in; ++i) {
            cd* dst = data.data() + before * (i + in * ia);
            for (Index ib = 0; ib < before; ++ib) dst[ib] = m(i, ib + before * ia);
        }
    return t;
}

ComplexTensor mode_product(const ComplexTensor& a, const ComplexMatrix& b, Index mode) {
    const Index in = a.extent(mode);
    if (b.cols() != in)
        throw Error(Errc::shape, fmt::format("mode-{} product needs {} columns, factor has {}",
                                             mode, in, b.cols()));
    Shape out = a.shape();
    out[static_cast<std::size_t>(mode - 1)] = b.rows();
    const ComplexMatrix prod = b * unfold(a, mode);
    return fold(prod, mode, out);
}

ComplexMatrix kronecker(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

ComplexMatrix khatri_rao(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.cols())
        throw Error(Errc::shape, fmt::format("Khatri-Rao needs equal column counts ({} vs {})",
                                             a.cols(), b.cols()));
    ComplexMatrix k(a.rows() * b.rows(), a.cols());
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            k.col(j).segment(i * b.rows(), b.rows()) = a(i, j) * b.col(j);
    return k;
}

ComplexMatrix hadamard(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(Errc::shape, "Hadamard product needs equal shapes");
    return a.cwiseProduct(b);
}

ComplexVector vec(const ComplexMatrix& a) {
    return Eigen::Map<const ComplexVector>(a.data(), a.size());
}

ComplexMatrix unvec(const ComplexVector& v, Index rows, Index cols) {
    if (rows < 1 || cols < 1 || v.size() != rows * cols)
        throw Error(Errc::shape, fmt::format("cannot unvec {} elements into {}x{}", v.size(), rows, cols));
    return Eigen::Map<const ComplexMatrix>(v.data(), rows, cols);
}

Pseudoinverse pseudo_inverse(const ComplexMatrix& m, double tol) {
    if (m.size() == 0) throw Error(Errc::shape, "pseudo-inverse of an empty matrix");
    Eigen::BDCSVD<ComplexMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sigma = svd.singularValues();
    Pseudoinverse out;
    out.sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
    const double cutoff = tol * out.sigma_max;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
    for (Index i = 0; i < sigma.size(); ++i)
        if (sigma(i) > cutoff && sigma(i) > 0.0) {
            inv(i) = 1.0 / sigma(i);
            ++out.rank;
        }
    out.matrix = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
    return out;
}

ComplexMatrix pinv(const ComplexMatrix& m, double tol) { return pseudo_inverse(m, tol).matrix; }

ComplexMatrix apply_pinv_right(const ComplexMatrix& b, const ComplexMatrix& a, double tol) {
    if (b.cols() != a.cols())
        throw Error(Errc::shape, fmt::format("cannot apply a {}x{} pseudo-inverse to {} columns", a.cols(), a.rows(),
                                             b.cols()));
    const Index r = a.rows();
    if (a.cols() < 4 * r) return b * pinv(a, tol);

    // aᴴ = Q R, so a = Rᴴ Qᴴ = U Σ (Q W)ᴴ with Rᴴ = U Σ Wᴴ.
    const Eigen::HouseholderQR<ComplexMatrix> qr(a.adjoint());
    const ComplexMatrix r_h = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>().toDenseMatrix().adjoint();
    Eigen::JacobiSVD<ComplexMatrix> svd(r_h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    const double cutoff = tol * (sigma.size() > 0 ? sigma(0) : 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
    for (Index i = 0; i < sigma.size(); ++i)
        if (sigma(i) > cutoff && sigma(i) > 0.0) inv(i) = 1.0 / sigma(i);

    // (b Q)ᴴ = Qᴴ bᴴ; only its leading r rows meet the column space of a.
    ComplexMatrix bq_h = b.adjoint();
    bq_h.applyOnTheLeft(qr.householderQ().adjoint());
    const ComplexMatrix bq = bq_h.topRows(r).adjoint();
    return bq * svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

ComplexTensor build_core(Index n) {
    if (n < 1) throw Error(Errc::shape, "group size must be at least 1");
    const Index n2 = n * n;
    const Index n4 = n2 * n2;
    ComplexTensor core({n, n, n4, n2});
    for (Index i4 = 0; i4 < n2; ++i4)
        for (Index i2 = 0; i2 < n; ++i2)
            for (Index i1 = 0; i1 < n; ++i1) core.at(i1, i2, i1 + n * i2 + n2 * i4, i4) = 1.0;
    return core;
}

ComplexTensor core_times_mode3(const ComplexMatrix& s, Index n) {
    const Index n2 = n * n;
    if (s.cols() != n2 * n2)
        throw Error(Errc::shape, fmt::format("selection matrix needs {} columns, has {}", n2 * n2, s.cols()));
    return fold(s, 3, {n, n, s.rows(), n2});
}

}  // namespace bdsense
