#include "preckacz/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "preckacz/errors.hpp"
#include "preckacz/matrix_market.hpp"

namespace preckacz {

namespace {

std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
    DenseMatrix g(rows, cols);
    for (double& v : g.data()) v = rng.normal();
    return g;
}

struct Ellipse {
    double intensity;
    double semi_x;
    double semi_y;
    double cx;
    double cy;
    double angle_deg;
};

// Original Shepp-Logan table with unit skull intensity.
constexpr std::array<Ellipse, 10> kSheppLogan{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.01, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0},
}};

bool inside(const Ellipse& e, double x, double y) {
    const double phi = e.angle_deg * std::numbers::pi / 180.0;
    const double dx = x - e.cx;
    const double dy = y - e.cy;
    const double u = (dx * std::cos(phi) + dy * std::sin(phi)) / e.semi_x;
    const double v = (-dx * std::sin(phi) + dy * std::cos(phi)) / e.semi_y;
    return u * u + v * v <= 1.0;
}

// Intersection lengths of one line with the unit-pixel grid covering
// [-q/2, q/2]^2. The line is { s * dir + offset * normal }.
void trace_ray(std::size_t q, double dir_x, double dir_y, double offset, std::span<double> row) {
    constexpr double kParallel = 1e-14;
    const double half = static_cast<double>(q) / 2.0;
    const double px = -offset * dir_y;  // offset * normal, normal = (-dir_y, dir_x)
    const double py = offset * dir_x;

    double s_lo = -std::numeric_limits<double>::infinity();
    double s_hi = std::numeric_limits<double>::infinity();
    bool misses = false;
    auto clip = [&](double p, double d) {
        if (std::abs(d) < kParallel) {
            misses = misses || p < -half || p > half;
            return;
        }
        double a = (-half - p) / d;
        double b = (half - p) / d;
        if (a > b) std::swap(a, b);
        s_lo = std::max(s_lo, a);
        s_hi = std::min(s_hi, b);
    };
    clip(px, dir_x);
    clip(py, dir_y);
    if (misses || !(s_hi > s_lo)) return;

    std::vector<double> cuts{s_lo, s_hi};
    auto add_crossings = [&](double p, double d) {
        if (std::abs(d) < kParallel) return;
        for (std::size_t k = 0; k <= q; ++k) {
            const double s = (static_cast<double>(k) - half - p) / d;
            if (s > s_lo && s < s_hi) cuts.push_back(s);
        }
    };
    add_crossings(px, dir_x);
    add_crossings(py, dir_y);
    std::sort(cuts.begin(), cuts.end());

    const auto qi = static_cast<long>(q);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double len = cuts[k + 1] - cuts[k];
        if (!(len > 0.0)) continue;
        const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
        const double x = px + mid * dir_x;
        const double y = py + mid * dir_y;
        const long col = std::clamp(static_cast<long>(std::floor(x + half)), 0L, qi - 1);
        const long prow = std::clamp(static_cast<long>(std::floor(half - y)), 0L, qi - 1);
        row[static_cast<std::size_t>(prow * qi + col)] += len;
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

} // namespace

double GeneratedProblem::relative_residual(std::span<const double> x) const {
    Vector r = matvec(a, x);
    axpy(-1.0, b, r);
    return norm2(r) / norm2(b);
}

Vector PhantomImage::flatten() const {
    return Vector(pixels.data().begin(), pixels.data().end());
}

GeneratedProblem gen_random_conditioned(std::size_t m, std::size_t n, double cond_target,
                                        RngStream& rng) {
    if (n < 2 || m < n) throw InvalidArgument("gen_random_conditioned: need m >= n >= 2");
    if (!(cond_target >= 1.0)) throw InvalidArgument("gen_random_conditioned: cond_target must be >= 1");

    const DenseMatrix u = householder_qr(gaussian_matrix(m, n, rng)).q;
    const DenseMatrix v = householder_qr(gaussian_matrix(n, n, rng)).q;
    const double top = std::sqrt(static_cast<double>(m)) + std::sqrt(static_cast<double>(n));

    // A = U diag(s) V^T with s_k = top * cond^(-k/(n-1)).
    DenseMatrix us(u);
    for (std::size_t k = 0; k < n; ++k) {
        const double s = top * std::pow(cond_target, -static_cast<double>(k) / static_cast<double>(n - 1));
        for (std::size_t i = 0; i < m; ++i) us(i, k) *= s;
    }
    GeneratedProblem p;
    p.a = matmul(us, transpose(v));
    Vector x(n);
    for (double& xi : x) xi = rng.normal();
    p.b = matvec(p.a, x);
    p.x_star = std::move(x);
    p.kind = "random";
    p.metadata = {{"m", std::to_string(m)},
                  {"n", std::to_string(n)},
                  {"cond_target", format_real(cond_target)},
                  {"sigma_max", format_real(top)},
                  {"sigma", "0"}};
    return p;
}

GeneratedProblem add_noise(GeneratedProblem problem, double sigma, RngStream& rng) {
    if (!(sigma >= 0.0)) throw InvalidArgument("add_noise: sigma must be >= 0");
    if (sigma > 0.0)
        for (double& bi : problem.b) bi += sigma * rng.normal();
    problem.metadata["sigma"] = format_real(sigma);
    if (problem.kind == "random") problem.kind = "noisy";
    return problem;
}

double test_function_f(std::array<double, 2> x, const TestFunctionParams& params) {
    const double r = std::hypot(x[0], x[1]) - params.mu;
    return params.a[0] * x[0] + params.a[1] * x[1] + params.c +
           params.alpha * std::exp(-r * r / params.sigma_f);
}

GeneratedProblem gen_rff_problem(std::size_t m, std::size_t d, double sigma, RngStream& rng) {
    if (d < 2) throw InvalidArgument("gen_rff_problem: need d >= 2");
    if (m < 2 * d) throw InvalidArgument("gen_rff_problem: need m >= 2d");
    if (!(sigma > 0.0)) throw InvalidArgument("gen_rff_problem: sigma must be positive");

    DenseMatrix z(m, 2);
    for (double& v : z.data()) v = rng.uniform01();
    DenseMatrix freq(2, d);
    for (double& v : freq.data()) v = sigma * rng.normal();
    const DenseMatrix phase = matmul(z, freq);

    GeneratedProblem p;
    p.a = DenseMatrix(m, 2 * d);
    p.b.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            p.a(i, 2 * k) = std::cos(phase(i, k));
            p.a(i, 2 * k + 1) = std::sin(phase(i, k));
        }
        p.b[i] = test_function_f({z(i, 0), z(i, 1)});
    }
    const Vector x_ls = least_squares(p.a, p.b);
    p.kind = "rff";
    p.metadata = {{"m", std::to_string(m)},
                  {"d", std::to_string(d)},
                  {"sigma", format_real(sigma)},
                  {"ls_residual", format_real(p.relative_residual(x_ls))}};
    return p;
}

PhantomImage shepp_logan_phantom(std::size_t q) {
    if (q < 8) throw InvalidArgument("shepp_logan_phantom: need q >= 8");
    PhantomImage img{q, DenseMatrix(q, q)};
    const double h = 2.0 / static_cast<double>(q);
    for (std::size_t i = 0; i < q; ++i) {
        const double y = 1.0 - (static_cast<double>(i) + 0.5) * h;
        for (std::size_t j = 0; j < q; ++j) {
            const double x = -1.0 + (static_cast<double>(j) + 0.5) * h;
            double v = 0.0;
            for (const Ellipse& e : kSheppLogan)
                if (inside(e, x, y)) v += e.intensity;
            img.pixels(i, j) = std::max(v, 0.0);
        }
    }
    return img;
}

std::size_t default_ray_count(std::size_t q) {
    return static_cast<std::size_t>(std::ceil(std::numbers::sqrt2 * static_cast<double>(q)));
}

GeneratedProblem gen_parallel_tomo(std::size_t q, std::size_t n_angles, std::size_t n_rays) {
    return gen_parallel_tomo(q, n_angles, n_rays, shepp_logan_phantom(q));
}

GeneratedProblem gen_parallel_tomo(std::size_t q, std::size_t n_angles, std::size_t n_rays,
                                   const PhantomImage& phantom) {
    if (q < 8) throw InvalidArgument("gen_parallel_tomo: need q >= 8");
    if (n_angles == 0 || n_rays == 0) throw InvalidArgument("gen_parallel_tomo: need rays and angles");
    if (phantom.q != q) throw DimensionMismatch("gen_parallel_tomo: phantom size differs from q");

    const double width = std::numbers::sqrt2 * static_cast<double>(q);
    const double spacing = width / static_cast<double>(n_rays);
    GeneratedProblem p;
    p.a = DenseMatrix(n_angles * n_rays, q * q);
    std::vector<std::size_t> zero_rows;
    for (std::size_t ai = 0; ai < n_angles; ++ai) {
        const double theta = std::numbers::pi * static_cast<double>(ai) / static_cast<double>(n_angles);
        const double dx = std::cos(theta);
        const double dy = std::sin(theta);
        for (std::size_t ri = 0; ri < n_rays; ++ri) {
            const double offset =
                (static_cast<double>(ri) - (static_cast<double>(n_rays) - 1.0) / 2.0) * spacing;
            const std::size_t row = ai * n_rays + ri;
            trace_ray(q, dx, dy, offset, p.a.row(row));
            if (squared_norm(p.a.row(row)) == 0.0) zero_rows.push_back(row);
        }
    }
    Vector x = phantom.flatten();
    p.b = matvec(p.a, x);
    p.x_star = std::move(x);
    p.kind = "tomo";

    std::string zero_list;
    for (std::size_t k = 0; k < zero_rows.size(); ++k)
        zero_list += (k ? "," : "") + std::to_string(zero_rows[k]);
    p.metadata = {{"q", std::to_string(q)},
                  {"n_angles", std::to_string(n_angles)},
                  {"n_rays", std::to_string(n_rays)},
                  {"phantom", "shepp_logan_original"},
                  {"zero_row_count", std::to_string(zero_rows.size())},
                  {"zero_rows", zero_list}};
    return p;
}

DenseMatrix image_error_map(const PhantomImage& x_star, std::span<const double> x_hat) {
    const std::size_t q = x_star.q;
    if (x_hat.size() != q * q) throw DimensionMismatch("image_error_map: expected q^2 values");
    const double scale = frobenius_norm(x_star.pixels);
    if (!(scale > 0.0)) throw DegenerateInput("image_error_map: zero reference image");
    DenseMatrix out(q, q);
    for (std::size_t k = 0; k < q * q; ++k)
        out.data()[k] = std::abs(x_star.pixels.data()[k] - x_hat[k]) / scale;
    return out;
}

void write_pgm(const std::filesystem::path& path, const PhantomImage& image) {
    auto out = open_out(path);
    const auto& px = image.pixels.data();
    const double top = px.empty() ? 0.0 : *std::max_element(px.begin(), px.end());
    out << "P2\n" << image.q << ' ' << image.q << "\n255\n";
    for (std::size_t i = 0; i < image.q; ++i) {
        for (std::size_t j = 0; j < image.q; ++j) {
            const double v = top > 0.0 ? image.pixels(i, j) / top : 0.0;
            out << (j ? " " : "") << static_cast<int>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_image_csv(const std::filesystem::path& path, const DenseMatrix& pixels) {
    auto out = open_out(path);
    out << std::setprecision(17);
    for (std::size_t i = 0; i < pixels.rows(); ++i) {
        for (std::size_t j = 0; j < pixels.cols(); ++j) out << (j ? "," : "") << pixels(i, j);
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void export_problem(const GeneratedProblem& problem, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto format =
        problem.kind == "tomo" ? MatrixMarketFormat::Coordinate : MatrixMarketFormat::Array;
    write_matrix_market(dir / "A.mtx", problem.a, format);
    write_vector(dir / "b.txt", problem.b);
    if (problem.x_star) write_vector(dir / "x_star.txt", *problem.x_star);
    auto meta = open_out(dir / "metadata.txt");
    meta << "kind = " << problem.kind << '\n'
         << "rows = " << problem.a.rows() << '\n'
         << "cols = " << problem.a.cols() << '\n';
    for (const auto& [k, v] : problem.metadata) meta << k << " = " << v << '\n';
    if (!meta) throw IoError("failed writing metadata in " + dir.string());
}

} // namespace preckacz
