#include "preckacz/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "preckacz/errors.hpp"

namespace preckacz {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(seeded_engine(seed, stream_id)) {}

std::size_t RngStream::uniform_index(std::size_t n) {
    if (n == 0) throw InvalidArgument("uniform_index: empty range");
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

double RngStream::uniform01() {
    // 53 random mantissa bits
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

DenseRowSource::DenseRowSource(const DenseMatrix& a, std::span<const double> b) : a_(&a), b_(b) {
    if (b.size() != a.rows())
        throw DimensionMismatch("DenseRowSource: rhs length does not match row count");
}

std::string_view to_string(SamplerKind kind) {
    switch (kind) {
    case SamplerKind::Uniform: return "uniform";
    case SamplerKind::SquaredNorm: return "squared_norm";
    case SamplerKind::Cyclic: return "cyclic";
    }
    return "unknown";
}

SamplerKind parse_sampler_kind(std::string_view text) {
    if (text == "uniform") return SamplerKind::Uniform;
    if (text == "squared_norm") return SamplerKind::SquaredNorm;
    if (text == "cyclic") return SamplerKind::Cyclic;
    throw InvalidArgument("unknown sampler '" + std::string(text) +
                          "' (expected uniform, squared_norm or cyclic)");
}

RowSampler RowSampler::uniform(std::size_t m) {
    if (m == 0) throw InvalidArgument("sampler over zero rows");
    return RowSampler(SamplerKind::Uniform, m);
}

RowSampler RowSampler::cyclic(std::size_t m, std::size_t start) {
    if (m == 0) throw InvalidArgument("sampler over zero rows");
    RowSampler s(SamplerKind::Cyclic, m);
    s.cursor_ = start % m;
    return s;
}

RowSampler RowSampler::squared_norm(std::span<const double> squared_row_norms) {
    if (squared_row_norms.empty()) throw InvalidArgument("sampler over zero rows");
    RowSampler s(SamplerKind::SquaredNorm, squared_row_norms.size());
    s.cumulative_.resize(squared_row_norms.size());
    double total = 0.0;
    for (std::size_t i = 0; i < squared_row_norms.size(); ++i) {
        total += squared_row_norms[i];
        s.cumulative_[i] = total;
    }
    if (!(total > 0.0) || !std::isfinite(total))
        throw DegenerateDistribution("squared-norm sampler: all rows have zero norm");
    for (double& c : s.cumulative_) c /= total;
    return s;
}

RowSampler RowSampler::make(SamplerKind kind, const RowSource& source) {
    switch (kind) {
    case SamplerKind::Uniform: return uniform(source.row_count());
    case SamplerKind::Cyclic: return cyclic(source.row_count());
    case SamplerKind::SquaredNorm: {
        std::vector<double> norms(source.row_count());
        for (std::size_t i = 0; i < norms.size(); ++i) norms[i] = preckacz::squared_norm(source.row(i));
        return squared_norm(norms);
    }
    }
    throw InvalidArgument("unknown sampler kind");
}

std::size_t RowSampler::next(RngStream& rng) {
    switch (kind_) {
    case SamplerKind::Uniform: return rng.uniform_index(rows_);
    case SamplerKind::Cyclic: {
        const std::size_t i = cursor_;
        cursor_ = (cursor_ + 1) % rows_;
        return i;
    }
    case SamplerKind::SquaredNorm: {
        const double u = rng.uniform01();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) {
            // u rounded past the last partial sum; take the last row with weight.
            it = std::lower_bound(cumulative_.begin(), cumulative_.end(), cumulative_.back());
        }
        return static_cast<std::size_t>(it - cumulative_.begin());
    }
    }
    return 0;
}

double RowSampler::probability(std::size_t i) const {
    if (i >= rows_) return 0.0;
    if (kind_ != SamplerKind::SquaredNorm) return 1.0 / static_cast<double>(rows_);
    return cumulative_[i] - (i == 0 ? 0.0 : cumulative_[i - 1]);
}

std::vector<std::size_t> sample_sketch_indices(std::size_t m, std::size_t r, RngStream& rng) {
    if (r > m)
        throw InvalidSketchSize("sketch size " + std::to_string(r) + " exceeds row count " +
                                std::to_string(m));
    std::vector<std::size_t> out;
    out.reserve(r);
    if (r == m) {
        for (std::size_t i = 0; i < m; ++i) out.push_back(i);
        return out;
    }
    // Floyd's algorithm: one draw per selected index.
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(2 * r);
    for (std::size_t j = m - r; j < m; ++j) {
        const std::size_t t = rng.uniform_index(j + 1);
        const std::size_t pick = chosen.contains(t) ? j : t;
        chosen.insert(pick);
        out.push_back(pick);
    }
    std::sort(out.begin(), out.end());
    return out;
}

DenseMatrix selection_matrix(std::size_t m, std::span<const std::size_t> indices) {
    DenseMatrix s(indices.size(), m);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m) throw DimensionMismatch("selection_matrix: index out of range");
        s(i, indices[i]) = 1.0;
    }
    return s;
}

} // namespace preckacz
