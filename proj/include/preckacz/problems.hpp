#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "preckacz/numerics.hpp"
#include "preckacz/sampling.hpp"

namespace preckacz {

/// A linear system a x = b with optional ground truth.
struct GeneratedProblem {
    DenseMatrix a;
    Vector b;
    std::optional<Vector> x_star;
    std::string kind;
    std::map<std::string, std::string> metadata;

    /// View valid while this object is alive and unmodified.
    DenseRowSource source() const { return DenseRowSource(a, b); }
    /// ||a x - b|| / ||b||.
    double relative_residual(std::span<const double> x) const;
};

/// q x q image, row 0 at the top. Flattened row-major into the q^2 unknowns.
struct PhantomImage {
    std::size_t q = 0;
    DenseMatrix pixels;

    Vector flatten() const;
};

/// Random m x n system with geometrically spaced singular values. The largest
/// singular value is sqrt(m) + sqrt(n), the expected top singular value of an
/// m x n standard normal matrix; the smallest is that divided by cond_target.
/// x_star ~ N(0, I) and b = A x_star.
GeneratedProblem gen_random_conditioned(std::size_t m, std::size_t n, double cond_target,
                                        RngStream& rng);

/// b += eps with eps ~ N(0, sigma^2 I); x_star keeps the noiseless solution.
GeneratedProblem add_noise(GeneratedProblem problem, double sigma, RngStream& rng);

struct TestFunctionParams {
    std::array<double, 2> a{1.0, 1.0};
    double c = 1.0;
    double alpha = 0.1;
    double mu = 0.0;
    double sigma_f = 1.0;
};

/// a^T x + c + alpha * exp(-(||x|| - mu)^2 / sigma_f)
double test_function_f(std::array<double, 2> x, const TestFunctionParams& params = {});

/// Random-Fourier-feature regression system for test_function_f on m points
/// uniform in [0,1]^2. Columns alternate cos/sin of Z M with M ~ N(0, sigma^2).
/// The exact solution is unknown; metadata["ls_residual"] holds the relative
/// residual of the least-squares solution.
GeneratedProblem gen_rff_problem(std::size_t m, std::size_t d, double sigma, RngStream& rng);

/// Ten-ellipse Shepp-Logan phantom sampled at pixel centres on [-1,1]^2.
PhantomImage shepp_logan_phantom(std::size_t q);

/// Parallel-beam system over a q x q grid of unit pixels centred at the origin:
/// n_angles directions in [0, 180) degrees, n_rays parallel rays each spread
/// over a width of sqrt(2) q. Entries are ray/pixel intersection lengths.
/// b = A vec(phantom), x_star = vec(phantom).
GeneratedProblem gen_parallel_tomo(std::size_t q, std::size_t n_angles, std::size_t n_rays);
GeneratedProblem gen_parallel_tomo(std::size_t q, std::size_t n_angles, std::size_t n_rays,
                                   const PhantomImage& phantom);

/// Default ray count for a q x q grid: ceil(sqrt(2) q).
std::size_t default_ray_count(std::size_t q);

/// |X* - X_hat| / ||X*||_F elementwise. Throws DegenerateInput for a zero image.
DenseMatrix image_error_map(const PhantomImage& x_star, std::span<const double> x_hat);

void write_pgm(const std::filesystem::path& path, const PhantomImage& image);
void write_image_csv(const std::filesystem::path& path, const DenseMatrix& pixels);

/// Writes A.mtx, b.txt, x_star.txt (when known) and metadata.txt into `dir`.
void export_problem(const GeneratedProblem& problem, const std::filesystem::path& dir);

} // namespace preckacz
