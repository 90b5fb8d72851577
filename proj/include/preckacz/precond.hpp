#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "preckacz/numerics.hpp"
#include "preckacz/sampling.hpp"

namespace preckacz {

enum class PreconditionerStructure { Identity, UpperTriangular, Dense };

/// Right preconditioner P (n x n) for a x = b, used as (a P) y = b, x = P y.
/// Immutable after construction.
class SketchedPreconditioner {
public:
    SketchedPreconditioner(DenseMatrix p, PreconditionerStructure structure, double gamma,
                           std::vector<std::size_t> indices, bool used_pseudoinverse,
                           double build_seconds, double build_flops);

    /// P = I with no build cost.
    static SketchedPreconditioner identity(std::size_t n);

    const DenseMatrix& p() const noexcept { return p_; }
    std::size_t dim() const noexcept { return p_.rows(); }
    PreconditionerStructure structure() const noexcept { return structure_; }
    double gamma() const noexcept { return gamma_; }
    std::size_t sketch_rows() const noexcept { return indices_.size(); }
    const std::vector<std::size_t>& indices() const noexcept { return indices_; }
    bool used_pseudoinverse() const noexcept { return used_pseudoinverse_; }
    /// Wall time spent sampling, factoring and inverting.
    double build_seconds() const noexcept { return build_seconds_; }
    /// Nominal floating-point operation count of the build.
    double build_flops() const noexcept { return build_flops_; }
    /// Nominal flops of one apply_right.
    double apply_flops() const noexcept;

private:
    DenseMatrix p_;
    PreconditionerStructure structure_;
    double gamma_;
    std::vector<std::size_t> indices_;
    bool used_pseudoinverse_;
    double build_seconds_;
    double build_flops_;
};

/// Sketch size for a given oversampling factor: ceil(gamma * n) clamped to [n, m].
std::size_t sketch_size(double gamma, std::size_t n, std::size_t m);

/// Samples r = sketch_size(gamma, n, m) rows uniformly without replacement,
/// factors them with Householder QR and inverts R. Falls back to the
/// pseudoinverse of R when it is numerically singular.
SketchedPreconditioner build_sketched_preconditioner(const RowSource& source, double gamma,
                                                     RngStream& rng);

/// R^{-1} from the QR factorization of the full matrix. Throws SingularFactor
/// for rank-deficient input.
DenseMatrix exact_preconditioner(const DenseMatrix& a);

/// out = row * P.
void apply_right(const SketchedPreconditioner& p, std::span<const double> row, std::span<double> out);
Vector apply_right(const SketchedPreconditioner& p, std::span<const double> row);
/// x = P y.
Vector apply_preconditioner(const SketchedPreconditioner& p, std::span<const double> y);
/// y with P y = x: back substitution for triangular P, least squares otherwise.
Vector solve_preconditioner(const SketchedPreconditioner& p, std::span<const double> x);

/// ||a||_F / sigma_min(a). Throws ConditioningOverflow when sigma_min is below
/// 1e-14 * ||a||_2.
double kappa_f(const DenseMatrix& a);
/// sigma_max / sigma_min, same error contract as kappa_f.
double condition_number(const DenseMatrix& a);
/// Largest squared row norm of the thin Q factor. Diagnostic only: needs the
/// whole matrix. Throws SingularFactor for rank-deficient input.
double coherence(const DenseMatrix& a);

/// Writes `<stem>.mtx` (array format) and `<stem>.meta` (key = value lines).
void write_preconditioner(const std::filesystem::path& stem, const SketchedPreconditioner& p);
SketchedPreconditioner read_preconditioner(const std::filesystem::path& stem);

} // namespace preckacz
