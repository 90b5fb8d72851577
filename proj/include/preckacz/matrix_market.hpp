#pragma once

#include <filesystem>
#include <iosfwd>

#include "preckacz/numerics.hpp"

namespace preckacz {

enum class MatrixMarketFormat { Array, Coordinate };

/// Reads a real general matrix in either the array or coordinate variant.
/// Symmetric coordinate files are expanded; pattern/complex files are rejected.
DenseMatrix read_matrix_market(std::istream& in);
DenseMatrix read_matrix_market(const std::filesystem::path& path);

void write_matrix_market(std::ostream& out, const DenseMatrix& a,
                         MatrixMarketFormat format = MatrixMarketFormat::Array);
void write_matrix_market(const std::filesystem::path& path, const DenseMatrix& a,
                         MatrixMarketFormat format = MatrixMarketFormat::Array);

/// Plain-text vectors: one value per line, '#' comments and blank lines skipped.
Vector read_vector(std::istream& in);
Vector read_vector(const std::filesystem::path& path);
void write_vector(std::ostream& out, std::span<const double> v);
void write_vector(const std::filesystem::path& path, std::span<const double> v);

} // namespace preckacz
