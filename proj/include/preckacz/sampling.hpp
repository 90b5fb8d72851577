#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "preckacz/numerics.hpp"

namespace preckacz {

/// Seeded pseudo-random source. Equal (seed, stream_id) pairs replay the same
/// sequence; distinct stream ids give independent streams.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n);
    /// Uniform real in [0, 1).
    double uniform01();
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Read-only row access to a linear system a x = b. Solvers only ever see a
/// system through this interface.
class RowSource {
public:
    virtual ~RowSource() = default;

    virtual std::size_t row_count() const = 0;
    virtual std::size_t col_count() const = 0;
    virtual std::span<const double> row(std::size_t i) const = 0;
    virtual double rhs(std::size_t i) const = 0;
};

/// Non-owning RowSource over a dense matrix and right-hand side; both must
/// outlive the source.
class DenseRowSource final : public RowSource {
public:
    DenseRowSource(const DenseMatrix& a, std::span<const double> b);

    std::size_t row_count() const override { return a_->rows(); }
    std::size_t col_count() const override { return a_->cols(); }
    std::span<const double> row(std::size_t i) const override { return a_->row(i); }
    double rhs(std::size_t i) const override { return b_[i]; }

private:
    const DenseMatrix* a_;
    std::span<const double> b_;
};

enum class SamplerKind { Uniform, SquaredNorm, Cyclic };

std::string_view to_string(SamplerKind kind);
/// Accepts "uniform", "squared_norm" and "cyclic"; throws InvalidArgument.
SamplerKind parse_sampler_kind(std::string_view text);

/// Row-index generator for the Kaczmarz loop.
class RowSampler {
public:
    static RowSampler uniform(std::size_t m);
    static RowSampler cyclic(std::size_t m, std::size_t start = 0);
    /// Probabilities proportional to the given squared row norms. Throws
    /// DegenerateDistribution if they are all zero.
    static RowSampler squared_norm(std::span<const double> squared_row_norms);
    /// Builds the sampler for `kind`, reading row norms from `source` when needed.
    static RowSampler make(SamplerKind kind, const RowSource& source);

    std::size_t next(RngStream& rng);

    SamplerKind kind() const noexcept { return kind_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cursor() const noexcept { return cursor_; }
    /// Selection probability of row i.
    double probability(std::size_t i) const;

private:
    RowSampler(SamplerKind kind, std::size_t rows) : kind_(kind), rows_(rows) {}

    SamplerKind kind_;
    std::size_t rows_;
    std::size_t cursor_ = 0;
    std::vector<double> cumulative_;  // normalized, last entry == 1
};

/// r distinct indices drawn uniformly without replacement from [0, m),
/// returned strictly increasing. Throws InvalidSketchSize if r > m.
std::vector<std::size_t> sample_sketch_indices(std::size_t m, std::size_t r, RngStream& rng);

/// The r x m selection matrix with a single unit entry per row at column k_i.
DenseMatrix selection_matrix(std::size_t m, std::span<const std::size_t> indices);

} // namespace preckacz
