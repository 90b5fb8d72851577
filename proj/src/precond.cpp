#include "preckacz/precond.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "preckacz/errors.hpp"
#include "preckacz/matrix_market.hpp"

namespace preckacz {

namespace {

std::string_view structure_name(PreconditionerStructure s) {
    switch (s) {
    case PreconditionerStructure::Identity: return "identity";
    case PreconditionerStructure::UpperTriangular: return "upper_triangular";
    case PreconditionerStructure::Dense: return "dense";
    }
    return "dense";
}

PreconditionerStructure parse_structure(const std::string& s) {
    if (s == "identity") return PreconditionerStructure::Identity;
    if (s == "upper_triangular") return PreconditionerStructure::UpperTriangular;
    if (s == "dense") return PreconditionerStructure::Dense;
    throw IoError("preconditioner metadata: unknown structure '" + s + "'");
}

std::pair<double, double> extreme_singular_values(const DenseMatrix& a) {
    if (a.empty()) throw DegenerateInput("empty matrix has no singular values");
    const Vector s = singular_values(a);
    const double smax = s.front();
    const double smin = s.back();
    if (!(smin > 1e-14 * smax))
        throw ConditioningOverflow("smallest singular value " + std::to_string(smin) +
                                   " is below 1e-14 * largest (" + std::to_string(smax) + ")");
    return {smax, smin};
}

} // namespace

SketchedPreconditioner::SketchedPreconditioner(DenseMatrix p, PreconditionerStructure structure,
                                               double gamma, std::vector<std::size_t> indices,
                                               bool used_pseudoinverse, double build_seconds,
                                               double build_flops)
    : p_(std::move(p)),
      structure_(structure),
      gamma_(gamma),
      indices_(std::move(indices)),
      used_pseudoinverse_(used_pseudoinverse),
      build_seconds_(build_seconds),
      build_flops_(build_flops) {
    if (p_.rows() != p_.cols()) throw DimensionMismatch("preconditioner must be square");
}

SketchedPreconditioner SketchedPreconditioner::identity(std::size_t n) {
    return SketchedPreconditioner(DenseMatrix::identity(n), PreconditionerStructure::Identity, 1.0,
                                  {}, false, 0.0, 0.0);
}

double SketchedPreconditioner::apply_flops() const noexcept {
    const double n = static_cast<double>(dim());
    switch (structure_) {
    case PreconditionerStructure::Identity: return 0.0;
    case PreconditionerStructure::UpperTriangular: return n * (n + 1.0);
    case PreconditionerStructure::Dense: return 2.0 * n * n;
    }
    return 2.0 * n * n;
}

std::size_t sketch_size(double gamma, std::size_t n, std::size_t m) {
    if (!(gamma >= 1.0)) throw InvalidArgument("gamma must be >= 1");
    const double target = gamma * static_cast<double>(n);
    // Shave rounding noise so that e.g. 1.1 * 10 yields 11, not 12.
    const double r = std::ceil(target * (1.0 - 4.0 * std::numeric_limits<double>::epsilon()));
    const std::size_t clamped_low = std::max<std::size_t>(n, static_cast<std::size_t>(r));
    return std::min(clamped_low, m);
}

SketchedPreconditioner build_sketched_preconditioner(const RowSource& source, double gamma,
                                                     RngStream& rng) {
    const std::size_t m = source.row_count();
    const std::size_t n = source.col_count();
    if (m < n) throw InvalidArgument("sketched preconditioner needs at least as many rows as columns");

    const auto start = std::chrono::steady_clock::now();
    const std::size_t r = sketch_size(gamma, n, m);
    std::vector<std::size_t> indices = sample_sketch_indices(m, r, rng);

    DenseMatrix sketch(r, n);
    for (std::size_t k = 0; k < r; ++k) {
        const auto row = source.row(indices[k]);
        std::copy(row.begin(), row.end(), sketch.row(k).begin());
    }
    if (!sketch.all_finite()) throw DegenerateInput("sketched rows contain non-finite entries");

    const DenseMatrix rfac = householder_qr_r(sketch);
    DenseMatrix p;
    PreconditionerStructure structure = PreconditionerStructure::UpperTriangular;
    bool fallback = false;
    try {
        p = invert_upper_triangular(rfac);
    } catch (const SingularFactor&) {
        p = pseudoinverse(rfac);
        structure = PreconditionerStructure::Dense;
        fallback = true;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const double rd = static_cast<double>(r);
    const double nd = static_cast<double>(n);
    double flops = 2.0 * rd * nd * nd - 2.0 * nd * nd * nd / 3.0;  // Householder R
    flops += fallback ? 30.0 * nd * nd * nd : nd * nd * nd / 3.0;   // inverse or SVD-based pinv
    return SketchedPreconditioner(std::move(p), structure, gamma, std::move(indices), fallback,
                                  seconds, flops);
}

DenseMatrix exact_preconditioner(const DenseMatrix& a) {
    return invert_upper_triangular(householder_qr_r(a));
}

void apply_right(const SketchedPreconditioner& p, std::span<const double> row, std::span<double> out) {
    const std::size_t n = p.dim();
    if (row.size() != n || out.size() != n)
        throw DimensionMismatch("apply_right: row length does not match preconditioner");
    switch (p.structure()) {
    case PreconditionerStructure::Identity:
        std::copy(row.begin(), row.end(), out.begin());
        return;
    case PreconditionerStructure::UpperTriangular:
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double ri = row[i];
            if (ri == 0.0) continue;
            const auto prow = p.p().row(i);
            for (std::size_t j = i; j < n; ++j) out[j] += ri * prow[j];
        }
        return;
    case PreconditionerStructure::Dense:
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double ri = row[i];
            if (ri == 0.0) continue;
            const auto prow = p.p().row(i);
            for (std::size_t j = 0; j < n; ++j) out[j] += ri * prow[j];
        }
        return;
    }
}

Vector apply_right(const SketchedPreconditioner& p, std::span<const double> row) {
    Vector out(p.dim());
    apply_right(p, row, out);
    return out;
}

Vector apply_preconditioner(const SketchedPreconditioner& p, std::span<const double> y) {
    if (p.structure() == PreconditionerStructure::Identity) {
        if (y.size() != p.dim()) throw DimensionMismatch("apply: length mismatch");
        return Vector(y.begin(), y.end());
    }
    return matvec(p.p(), y);
}

Vector solve_preconditioner(const SketchedPreconditioner& p, std::span<const double> x) {
    switch (p.structure()) {
    case PreconditionerStructure::Identity:
        if (x.size() != p.dim()) throw DimensionMismatch("solve_preconditioner: length mismatch");
        return Vector(x.begin(), x.end());
    case PreconditionerStructure::UpperTriangular:
        return solve_upper_triangular(p.p(), x);
    case PreconditionerStructure::Dense:
        return matvec(pseudoinverse(p.p()), x);
    }
    return {};
}

double kappa_f(const DenseMatrix& a) {
    const auto [smax, smin] = extreme_singular_values(a);
    (void)smax;
    return frobenius_norm(a) / smin;
}

double condition_number(const DenseMatrix& a) {
    const auto [smax, smin] = extreme_singular_values(a);
    return smax / smin;
}

double coherence(const DenseMatrix& a) {
    const QrFactors qr = householder_qr(a);
    // Same singularity rule as the triangular inverse.
    double max_diag = 0.0;
    for (std::size_t i = 0; i < qr.r.rows(); ++i) max_diag = std::max(max_diag, qr.r(i, i));
    for (std::size_t i = 0; i < qr.r.rows(); ++i)
        if (!(qr.r(i, i) > kSingularTolerance * max_diag))
            throw SingularFactor(i, "coherence: matrix is rank deficient");
    double mu = 0.0;
    for (std::size_t i = 0; i < qr.q.rows(); ++i) mu = std::max(mu, squared_norm(qr.q.row(i)));
    return mu;
}

void write_preconditioner(const std::filesystem::path& stem, const SketchedPreconditioner& p) {
    auto mtx = stem;
    mtx += ".mtx";
    write_matrix_market(mtx, p.p());
    auto meta_path = stem;
    meta_path += ".meta";
    std::ofstream meta(meta_path);
    if (!meta) throw IoError("cannot open " + meta_path.string() + " for writing");
    meta << std::setprecision(17);
    meta << "n = " << p.dim() << '\n'
         << "structure = " << structure_name(p.structure()) << '\n'
         << "gamma = " << p.gamma() << '\n'
         << "r = " << p.sketch_rows() << '\n'
         << "indices =";
    for (std::size_t i = 0; i < p.indices().size(); ++i) meta << (i ? ", " : " ") << p.indices()[i];
    meta << '\n'
         << "used_pseudoinverse = " << (p.used_pseudoinverse() ? "true" : "false") << '\n'
         << "build_seconds = " << p.build_seconds() << '\n'
         << "build_flops = " << p.build_flops() << '\n';
    if (!meta) throw IoError("failed writing " + meta_path.string());
}

SketchedPreconditioner read_preconditioner(const std::filesystem::path& stem) {
    auto mtx = stem;
    mtx += ".mtx";
    DenseMatrix p = read_matrix_market(mtx);
    auto meta_path = stem;
    meta_path += ".meta";
    std::ifstream meta(meta_path);
    if (!meta) throw IoError("cannot open " + meta_path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw IoError("preconditioner metadata: missing key '" + key + "'");
        return it->second;
    };
    std::vector<std::size_t> indices;
    {
        std::string list = get("indices");
        std::replace(list.begin(), list.end(), ',', ' ');
        std::istringstream is(list);
        std::size_t v = 0;
        while (is >> v) indices.push_back(v);
    }
    if (indices.size() != std::stoul(get("r")))
        throw IoError("preconditioner metadata: index count does not match r");
    if (p.rows() != std::stoul(get("n"))) throw IoError("preconditioner metadata: n mismatch");
    return SketchedPreconditioner(std::move(p), parse_structure(get("structure")),
                                  std::stod(get("gamma")), std::move(indices),
                                  get("used_pseudoinverse") == "true",
                                  std::stod(get("build_seconds")), std::stod(get("build_flops")));
}

} // namespace preckacz
