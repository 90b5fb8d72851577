#include "preckacz/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "preckacz/errors.hpp"

namespace preckacz {

namespace {

// Column-major scratch copy; the factorizations below work column by column.
struct ColumnMajor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    explicit ColumnMajor(const DenseMatrix& a)
        : rows(a.rows()), cols(a.cols()), data(a.rows() * a.cols()) {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) data[j * rows + i] = a(i, j);
    }
    ColumnMajor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* col(std::size_t j) { return data.data() + j * rows; }
    const double* col(std::size_t j) const { return data.data() + j * rows; }
};

struct Reflectors {
    ColumnMajor work;           // R in the upper triangle, reflectors below
    std::vector<double> beta;   // v^T v for each reflector (0 = identity)
    std::vector<double> head;   // first component of each reflector vector
    std::vector<double> diag;   // R_kk before sign normalization
};

// Householder triangularization. Reflector k acts on rows k..m-1; its
// vector is (head[k], work(k+1:m, k)).
Reflectors householder_factor(const DenseMatrix& a) {
    if (a.rows() < a.cols())
        throw DimensionMismatch("householder_qr: need rows >= cols, got " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Reflectors f{ColumnMajor(a), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                 std::vector<double>(n, 0.0)};

    for (std::size_t k = 0; k < n; ++k) {
        double* x = f.work.col(k) + k;
        const std::size_t len = m - k;
        double sq = 0.0;
        for (std::size_t i = 0; i < len; ++i) sq += x[i] * x[i];
        const double norm_x = std::sqrt(sq);
        if (norm_x == 0.0) {
            f.diag[k] = 0.0;
            continue;
        }
        const double alpha = x[0] > 0.0 ? -norm_x : norm_x;
        const double v0 = x[0] - alpha;
        // v^T v = (x0 - alpha)^2 + sum_{i>0} x_i^2 = 2 (norm^2 - alpha x0)
        const double beta = sq - x[0] * x[0] + v0 * v0;
        f.head[k] = v0;
        f.beta[k] = beta;
        f.diag[k] = alpha;
        x[0] = alpha;

        for (std::size_t j = k + 1; j < n; ++j) {
            double* w = f.work.col(j) + k;
            double s = v0 * w[0];
            for (std::size_t i = 1; i < len; ++i) s += x[i] * w[i];
            const double scale = 2.0 * s / beta;
            w[0] -= scale * v0;
            for (std::size_t i = 1; i < len; ++i) w[i] -= scale * x[i];
        }
    }
    return f;
}

DenseMatrix extract_r(const Reflectors& f) {
    const std::size_t n = f.work.cols;
    DenseMatrix r(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = f.diag[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = i; j < n; ++j) r(i, j) = sign * f.work.col(j)[i];
    }
    return r;
}

double max_abs_diagonal(const DenseMatrix& r) {
    double mx = 0.0;
    for (std::size_t i = 0; i < r.rows(); ++i) mx = std::max(mx, std::abs(r(i, i)));
    return mx;
}

void check_triangular_diagonal(const DenseMatrix& r) {
    if (r.rows() != r.cols()) throw DimensionMismatch("triangular factor must be square");
    const double limit = kSingularTolerance * max_abs_diagonal(r);
    for (std::size_t i = 0; i < r.rows(); ++i) {
        if (!(std::abs(r(i, i)) > limit))
            throw SingularFactor(i, "singular triangular factor at diagonal index " +
                                        std::to_string(i));
    }
}

// One-sided Jacobi on a square matrix.
Svd jacobi_svd_square(const DenseMatrix& a) {
    const std::size_t n = a.cols();
    ColumnMajor g(a);
    ColumnMajor v(n, n);
    for (std::size_t j = 0; j < n; ++j) v.col(j)[j] = 1.0;

    constexpr double eps = 1e-15;
    constexpr int max_sweeps = 80;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* gp = g.col(p);
                double* gq = g.col(q);
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < g.rows; ++i) {
                    alpha += gp[i] * gp[i];
                    beta += gq[i] * gq[i];
                    gamma += gp[i] * gq[i];
                }
                if (alpha == 0.0 || beta == 0.0) continue;
                if (std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = c * t;
                for (std::size_t i = 0; i < g.rows; ++i) {
                    const double x = gp[i], y = gq[i];
                    gp[i] = c * x - s * y;
                    gq[i] = s * x + c * y;
                }
                double* vp = v.col(p);
                double* vq = v.col(q);
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = vp[i], y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2({g.col(j), g.rows});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    Svd out{DenseMatrix(g.rows, n), Vector(n), DenseMatrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.s[k] = sigma[j];
        if (sigma[j] > 0.0)
            for (std::size_t i = 0; i < g.rows; ++i) out.u(i, k) = g.col(j)[i] / sigma[j];
        for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v.col(j)[i];
    }
    return out;
}

} // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw DimensionMismatch("DenseMatrix: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(m * n);
    for (const auto& r : rows) {
        if (r.size() != n) throw DimensionMismatch("from_rows: ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return DenseMatrix(m, n, std::move(data));
}

bool DenseMatrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

double norm2(std::span<const double> a) {
    // Scaled accumulation so tiny or huge entries do not under/overflow.
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0 || !std::isfinite(scale)) return scale;
    double s = 0.0;
    for (double v : a) {
        const double t = v / scale;
        s += t * t;
    }
    return scale * std::sqrt(s);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw DimensionMismatch("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size())
        throw DimensionMismatch("matvec: matrix has " + std::to_string(a.cols()) +
                                " columns, vector has " + std::to_string(x.size()));
    Vector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw DimensionMismatch("matvec_transposed: length mismatch");
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) axpy(x[i], a.row(i), y);
    return y;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik != 0.0) axpy(aik, b.row(k), ci);
        }
    }
    return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

DenseMatrix gather_rows(const DenseMatrix& a, std::span<const std::size_t> indices) {
    DenseMatrix out(indices.size(), a.cols());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= a.rows()) throw DimensionMismatch("gather_rows: index out of range");
        std::copy_n(a.row(indices[k]).begin(), a.cols(), out.row(k).begin());
    }
    return out;
}

DenseMatrix householder_qr_r(const DenseMatrix& a) { return extract_r(householder_factor(a)); }

QrFactors householder_qr(const DenseMatrix& a) {
    const Reflectors f = householder_factor(a);
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();

    // Q = H_0 ... H_{n-1} [I; 0], applied right to left.
    ColumnMajor q(m, n);
    for (std::size_t j = 0; j < n; ++j) q.col(j)[j] = 1.0;
    for (std::size_t kk = n; kk-- > 0;) {
        if (f.beta[kk] == 0.0) continue;
        const double* v = f.work.col(kk) + kk;  // v[0] is overwritten by R; use head
        const double v0 = f.head[kk];
        const std::size_t len = m - kk;
        for (std::size_t j = kk; j < n; ++j) {
            double* w = q.col(j) + kk;
            double s = v0 * w[0];
            for (std::size_t i = 1; i < len; ++i) s += v[i] * w[i];
            const double scale = 2.0 * s / f.beta[kk];
            w[0] -= scale * v0;
            for (std::size_t i = 1; i < len; ++i) w[i] -= scale * v[i];
        }
    }

    QrFactors out{DenseMatrix(m, n), extract_r(f)};
    for (std::size_t j = 0; j < n; ++j) {
        const double sign = f.diag[j] < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < m; ++i) out.q(i, j) = sign * q.col(j)[i];
    }
    return out;
}

DenseMatrix invert_upper_triangular(const DenseMatrix& r) {
    check_triangular_diagonal(r);
    const std::size_t n = r.rows();
    DenseMatrix x(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        x(j, j) = 1.0 / r(j, j);
        for (std::size_t i = j; i-- > 0;) {
            double s = 0.0;
            for (std::size_t k = i + 1; k <= j; ++k) s += r(i, k) * x(k, j);
            x(i, j) = -s / r(i, i);
        }
    }
    return x;
}

Vector solve_upper_triangular(const DenseMatrix& r, std::span<const double> b) {
    check_triangular_diagonal(r);
    if (b.size() != r.rows()) throw DimensionMismatch("solve_upper_triangular: length mismatch");
    const std::size_t n = r.rows();
    Vector x(b.begin(), b.end());
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= r(i, k) * x[k];
        x[i] = s / r(i, i);
    }
    return x;
}

Svd svd(const DenseMatrix& a) {
    if (a.rows() < a.cols()) {
        Svd t = svd(transpose(a));
        return Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
    }
    if (a.rows() == a.cols()) return jacobi_svd_square(a);
    // Tall: Jacobi on the triangular factor, then lift the left vectors.
    QrFactors qr = householder_qr(a);
    Svd inner = jacobi_svd_square(qr.r);
    return Svd{matmul(qr.q, inner.u), std::move(inner.s), std::move(inner.v)};
}

Vector singular_values(const DenseMatrix& a) {
    if (a.rows() > a.cols()) return jacobi_svd_square(householder_qr_r(a)).s;
    if (a.rows() < a.cols()) return singular_values(transpose(a));
    return jacobi_svd_square(a).s;
}

DenseMatrix pseudoinverse(const DenseMatrix& m) {
    DenseMatrix out(m.cols(), m.rows());
    if (m.empty()) return out;
    const Svd d = svd(m);
    const double cutoff = 1e-12 * d.s.front();
    for (std::size_t k = 0; k < d.s.size(); ++k) {
        if (!(d.s[k] > cutoff)) break;
        const double inv = 1.0 / d.s[k];
        for (std::size_t i = 0; i < m.cols(); ++i) {
            const double vik = d.v(i, k) * inv;
            if (vik == 0.0) continue;
            auto oi = out.row(i);
            for (std::size_t j = 0; j < m.rows(); ++j) oi[j] += vik * d.u(j, k);
        }
    }
    return out;
}

Vector least_squares(const DenseMatrix& a, std::span<const double> b) {
    if (b.size() != a.rows()) throw DimensionMismatch("least_squares: length mismatch");
    if (a.rows() >= a.cols()) {
        QrFactors qr = householder_qr(a);
        try {
            return solve_upper_triangular(qr.r, matvec_transposed(qr.q, b));
        } catch (const SingularFactor&) {
            // rank deficient; fall through to the minimum-norm solution
        }
    }
    return matvec(pseudoinverse(a), b);
}

double frobenius_norm(const DenseMatrix& a) { return norm2(a.data()); }

double spectral_norm(const DenseMatrix& a) {
    if (a.empty()) return 0.0;
    return singular_values(a).front();
}

double smallest_singular_value(const DenseMatrix& a) {
    if (a.empty()) return 0.0;
    return singular_values(a).back();
}

} // namespace preckacz
