#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace bdsense {

using cd = std::complex<double>;
using Index = Eigen::Index;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using ComplexRowVector = Eigen::RowVectorXcd;
using Shape = std::vector<Index>;

/// Dense complex multiway array. Linear layout keeps the FIRST index fastest,
/// which is also Eigen's column-major layout, so a two-mode tensor and a
/// ComplexMatrix share the same memory order.
///
/// Mode indices are 1-based throughout this library (mode 1 .. order()).
class ComplexTensor {
public:
    ComplexTensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit ComplexTensor(Shape shape);
    ComplexTensor(Shape shape, std::vector<cd> data);

    static ComplexTensor from_matrix(const ComplexMatrix& m);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] Index order() const noexcept { return static_cast<Index>(shape_.size()); }
    [[nodiscard]] Index extent(Index mode) const;
    [[nodiscard]] Index size() const noexcept { return static_cast<Index>(data_.size()); }

    [[nodiscard]] std::span<const cd> data() const noexcept { return data_; }
    [[nodiscard]] std::span<cd> data() noexcept { return data_; }

    [[nodiscard]] Index linear_index(std::span<const Index> idx) const;
    cd& operator()(std::span<const Index> idx) { return data_[linear_index(idx)]; }
    const cd& operator()(std::span<const Index> idx) const { return data_[linear_index(idx)]; }

    template <typename... I>
    cd& at(I... i) {
        const Index idx[] = {static_cast<Index>(i)...};
        return (*this)(idx);
    }
    template <typename... I>
    const cd& at(I... i) const {
        const Index idx[] = {static_cast<Index>(i)...};
        return (*this)(idx);
    }

    /// Same data, different shape with equal element count.
    [[nodiscard]] ComplexTensor reshaped(Shape shape) const;

    /// Only valid for order-2 tensors.
    [[nodiscard]] ComplexMatrix as_matrix() const;

    [[nodiscard]] double squared_norm() const;
    [[nodiscard]] double norm() const;

    ComplexTensor& operator*=(cd s);
    ComplexTensor& operator+=(const ComplexTensor& other);
    ComplexTensor& operator-=(const ComplexTensor& other);

    friend bool operator==(const ComplexTensor&, const ComplexTensor&) = default;

private:
    Shape shape_;
    std::vector<cd> data_;
};

ComplexTensor operator*(cd s, ComplexTensor t);
ComplexTensor operator+(ComplexTensor a, const ComplexTensor& b);
ComplexTensor operator-(ComplexTensor a, const ComplexTensor& b);

/// ‖a − b‖_F / ‖b‖_F; shapes must match.
double relative_error(const ComplexTensor& a, const ComplexTensor& b);
double relative_error(const ComplexMatrix& a, const ComplexMatrix& b);

Index shape_product(const Shape& shape);

/// Mode-n unfolding [A]_(n): I_n rows; the column index enumerates the
/// remaining modes with the lowest mode varying fastest. With this
/// convention a Tucker tensor satisfies
///   [core ×1 U1 ⋯ ×D UD]_(n) = Un [core]_(n) (UD ⊗ ⋯ ⊗ Un+1 ⊗ Un−1 ⊗ ⋯ ⊗ U1)ᵀ.
ComplexMatrix unfold(const ComplexTensor& a, Index mode);

/// Inverse of unfold for the given target shape.
ComplexTensor fold(const ComplexMatrix& m, Index mode, const Shape& shape);

/// A ×n B = fold(B · [A]_(n)).
ComplexTensor mode_product(const ComplexTensor& a, const ComplexMatrix& b, Index mode);

/// Kronecker product with the second factor's index fastest, so that
/// vec(A·B·C) = (Cᵀ ⊗ A)·vec(B).
ComplexMatrix kronecker(const ComplexMatrix& a, const ComplexMatrix& b);

/// Column-wise Kronecker product; vec(A·D(b)·C) = (Cᵀ ⋄ A)·b.
ComplexMatrix khatri_rao(const ComplexMatrix& a, const ComplexMatrix& b);

ComplexMatrix hadamard(const ComplexMatrix& a, const ComplexMatrix& b);

/// Column-stacking vectorization (first index fastest), returned as a column.
ComplexVector vec(const ComplexMatrix& a);
ComplexMatrix unvec(const ComplexVector& v, Index rows, Index cols);

struct Pseudoinverse {
    ComplexMatrix matrix;
    Index rank = 0;
    double sigma_max = 0.0;
};

constexpr double kDefaultPinvTol = 1e-12;

/// Moore–Penrose pseudoinverse through the SVD. Singular values below
/// tol·σ_max are treated as zero.
Pseudoinverse pseudo_inverse(const ComplexMatrix& m, double tol = kDefaultPinvTol);
ComplexMatrix pinv(const ComplexMatrix& m, double tol = kDefaultPinvTol);

/// b · pinv(a) without forming pinv(a). For a strongly wide a the SVD is taken
/// of the small triangular factor of a QR decomposition of aᴴ; the cutoff is the
/// same as in pseudo_inverse.
ComplexMatrix apply_pinv_right(const ComplexMatrix& b, const ComplexMatrix& a, double tol = kDefaultPinvTol);

/// Known core of the nested model: shape N×N×N⁴×N² with [core]_(3) = I_{N⁴},
/// i.e. core(i1,i2,i3,i4) = 1 iff i3 = i1 + N·i2 + N²·i4.
ComplexTensor build_core(Index n);

/// core ×3 S without touching the dense core. Because [core]_(3) is the
/// identity, [core ×3 S]_(3) = S, so the product is just S folded into the
/// shape N×N×T×N².
ComplexTensor core_times_mode3(const ComplexMatrix& s, Index n);

}  // namespace bdsense
