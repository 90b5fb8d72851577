#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace preckacz {

using Vector = std::vector<double>;

/// Dense real matrix stored row-major.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Takes ownership of row-major `data`; throws DimensionMismatch if the
    /// length is not rows * cols.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const noexcept;

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Thin QR factors: q is rows x cols with orthonormal columns, r is
/// cols x cols upper triangular with a non-negative diagonal.
struct QrFactors {
    DenseMatrix q;
    DenseMatrix r;
};

/// Thin singular value decomposition a = u * diag(s) * v^T with s sorted in
/// decreasing order. Columns of u belonging to zero singular values are zero.
struct Svd {
    DenseMatrix u;
    Vector s;
    DenseMatrix v;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double squared_norm(std::span<const double> a);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

Vector matvec(const DenseMatrix& a, std::span<const double> x);
/// a^T x
Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
/// Copies the listed rows of `a`, in order.
DenseMatrix gather_rows(const DenseMatrix& a, std::span<const std::size_t> indices);

DenseMatrix householder_qr_r(const DenseMatrix& a);
QrFactors householder_qr(const DenseMatrix& a);

/// Relative diagonal threshold below which a triangular factor is singular.
inline constexpr double kSingularTolerance = 1e-12;

/// Inverse of an upper-triangular matrix. Throws SingularFactor when some
/// |r_ii| <= kSingularTolerance * max_j |r_jj|.
DenseMatrix invert_upper_triangular(const DenseMatrix& r);
/// Solves r x = b by back substitution, with the same singularity check.
Vector solve_upper_triangular(const DenseMatrix& r, std::span<const double> b);

Svd svd(const DenseMatrix& a);
Vector singular_values(const DenseMatrix& a);
/// Moore-Penrose pseudoinverse; singular values below 1e-12 * sigma_max are
/// treated as zero.
DenseMatrix pseudoinverse(const DenseMatrix& m);
/// Minimum-norm least-squares solution of a x = b.
Vector least_squares(const DenseMatrix& a, std::span<const double> b);

double frobenius_norm(const DenseMatrix& a);
double spectral_norm(const DenseMatrix& a);
double smallest_singular_value(const DenseMatrix& a);

} // namespace preckacz
