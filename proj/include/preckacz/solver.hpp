#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "preckacz/numerics.hpp"
#include "preckacz/precond.hpp"
#include "preckacz/sampling.hpp"

namespace preckacz {

/// How elapsed time is measured.
///  Wall: monotonic wall clock around the iteration loop.
///  Work: nominal flop count at kWorkFlopsPerSecond; deterministic.
enum class ClockKind { Wall, Work };

inline constexpr double kWorkFlopsPerSecond = 1e9;

std::string_view to_string(ClockKind kind);
ClockKind parse_clock_kind(std::string_view text);

/// RngStream ids derived from SolveConfig::seed.
inline constexpr std::uint64_t kRowStream = 0;
inline constexpr std::uint64_t kSketchStream = 1;

struct SolveConfig {
    SamplerKind sampler = SamplerKind::Uniform;
    std::size_t max_iters = 1'000'000;
    double time_budget_seconds = 60.0;
    double target_rel_error = 1e-10;
    /// Iterations between metric evaluations; unset means one pass (row count).
    std::optional<std::size_t> eval_every;
    std::uint64_t seed = 0;
    ClockKind clock = ClockKind::Wall;

    /// Throws InvalidArgument on max_iters == 0, eval_every == 0 or a
    /// non-positive time budget.
    void validate() const;
};

/// Ground truth and harness-side metrics. Solvers never see the full matrix;
/// the residual callback is how a harness that holds it reports ||Ax-b||/||b||.
struct Reference {
    std::span<const double> x_star;  // empty when unknown
    std::function<double(std::span<const double>)> residual;

    bool has_x_star() const noexcept { return !x_star.empty(); }
};

struct TraceRecord {
    std::size_t iter = 0;
    double elapsed_seconds = 0.0;
    std::optional<double> rel_error;
    std::optional<double> residual;

    bool operator==(const TraceRecord&) const = default;
};

enum class SolveStatus { Converged, IterBudget, TimeBudget };

std::string_view to_string(SolveStatus status);

struct PreconditionerMeta {
    double gamma = 1.0;
    std::size_t sketch_rows = 0;
    bool used_pseudoinverse = false;
    /// Build time on the run's clock.
    double build_seconds = 0.0;
    /// For fine-tuned runs: iteration and elapsed time at the switch.
    std::optional<std::size_t> switch_iter;
    std::optional<double> switch_seconds;
};

struct SolveResult {
    Vector x;
    std::vector<TraceRecord> trace;
    SolveStatus status = SolveStatus::IterBudget;
    std::optional<PreconditionerMeta> preconditioner;
    std::size_t iterations = 0;
    /// Draws that hit a zero (or annihilated) row and made no update.
    std::size_t skipped_rows = 0;
};

/// Projection of x onto the hyperplane <a, x> = b_i. Throws ZeroRow if a = 0.
Vector kaczmarz_step(std::span<const double> x, std::span<const double> a, double b_i);

/// Randomized Kaczmarz from x0 = 0.
SolveResult kaczmarz_solve(const RowSource& source, const SolveConfig& config,
                           const Reference& reference = {});

/// Kaczmarz on (A P) y = b from y0 = 0, reporting x = P y. Elapsed time
/// starts at the preconditioner build time.
SolveResult preconditioned_kaczmarz_solve(const RowSource& source, const SketchedPreconditioner& p,
                                          const SolveConfig& config,
                                          const Reference& reference = {});

/// Plain Kaczmarz until elapsed >= tau_seconds, then builds a sketched
/// preconditioner and continues preconditioned from the current iterate.
SolveResult fine_tuned_solve(const RowSource& source, double gamma, double tau_seconds,
                             const SolveConfig& config, const Reference& reference = {});

/// (1 - kappa_f^-2)^k * init_sq_error.
double theoretical_bound(double kappa_f_value, std::size_t k, double init_sq_error);

/// CSV trace with header `iter,elapsed_seconds,rel_error,residual`; missing
/// metrics are empty fields. Reals use 17 significant digits.
void write_trace_csv(std::ostream& out, std::span<const TraceRecord> trace);
/// Throws IoError on malformed input.
std::vector<TraceRecord> read_trace_csv(std::istream& in);

} // namespace preckacz
