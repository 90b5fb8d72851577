#include "preckacz/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "preckacz/errors.hpp"

namespace preckacz {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Next line that is neither blank nor a '%' comment.
bool next_data_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '%') continue;
        return true;
    }
    return false;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << std::setprecision(17);
    return out;
}

} // namespace

DenseMatrix read_matrix_market(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw IoError("matrix market: empty input");
    std::istringstream hs(header);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || lower(object) != "matrix")
        throw IoError("matrix market: bad banner '" + header + "'");
    format = lower(format);
    field = lower(field);
    symmetry = lower(symmetry);
    if (field != "real" && field != "double" && field != "integer")
        throw IoError("matrix market: unsupported field '" + field + "'");
    if (symmetry != "general" && symmetry != "symmetric")
        throw IoError("matrix market: unsupported symmetry '" + symmetry + "'");
    const bool symmetric = symmetry == "symmetric";

    std::string line;
    if (!next_data_line(in, line)) throw IoError("matrix market: missing size line");
    std::istringstream size_line(line);

    if (format == "array") {
        std::size_t m = 0, n = 0;
        if (!(size_line >> m >> n)) throw IoError("matrix market: bad size line");
        DenseMatrix a(m, n);
        // Column-major; symmetric arrays list only the lower triangle.
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = symmetric ? j : 0; i < m; ++i) {
                if (!next_data_line(in, line)) throw IoError("matrix market: truncated array data");
                double v = 0.0;
                std::istringstream(line) >> v;
                a(i, j) = v;
                if (symmetric) a(j, i) = v;
            }
        }
        return a;
    }
    if (format == "coordinate") {
        std::size_t m = 0, n = 0, nnz = 0;
        if (!(size_line >> m >> n >> nnz)) throw IoError("matrix market: bad size line");
        DenseMatrix a(m, n);
        for (std::size_t k = 0; k < nnz; ++k) {
            if (!next_data_line(in, line)) throw IoError("matrix market: truncated coordinate data");
            std::istringstream es(line);
            std::size_t i = 0, j = 0;
            double v = 0.0;
            if (!(es >> i >> j >> v) || i == 0 || j == 0 || i > m || j > n)
                throw IoError("matrix market: bad entry '" + line + "'");
            a(i - 1, j - 1) += v;
            if (symmetric && i != j) a(j - 1, i - 1) += v;
        }
        return a;
    }
    throw IoError("matrix market: unsupported format '" + format + "'");
}

DenseMatrix read_matrix_market(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const DenseMatrix& a, MatrixMarketFormat format) {
    const auto old_precision = out.precision(17);
    if (format == MatrixMarketFormat::Array) {
        out << "%%MatrixMarket matrix array real general\n" << a.rows() << ' ' << a.cols() << '\n';
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t i = 0; i < a.rows(); ++i) out << a(i, j) << '\n';
    } else {
        const auto nnz = static_cast<std::size_t>(
            std::count_if(a.data().begin(), a.data().end(), [](double v) { return v != 0.0; }));
        out << "%%MatrixMarket matrix coordinate real general\n"
            << a.rows() << ' ' << a.cols() << ' ' << nnz << '\n';
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j)
                if (a(i, j) != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << a(i, j) << '\n';
    }
    out.precision(old_precision);
}

void write_matrix_market(const std::filesystem::path& path, const DenseMatrix& a,
                         MatrixMarketFormat format) {
    auto out = open_out(path);
    write_matrix_market(out, a, format);
    if (!out) throw IoError("failed writing " + path.string());
}

Vector read_vector(std::istream& in) {
    Vector v;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        double value = 0.0;
        if (!(ls >> value)) throw IoError("vector file: bad value '" + line + "'");
        v.push_back(value);
    }
    return v;
}

Vector read_vector(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_vector(in);
}

void write_vector(std::ostream& out, std::span<const double> v) {
    const auto old_precision = out.precision(17);
    for (double x : v) out << x << '\n';
    out.precision(old_precision);
}

void write_vector(const std::filesystem::path& path, std::span<const double> v) {
    auto out = open_out(path);
    write_vector(out, v);
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace preckacz
