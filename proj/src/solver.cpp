#include "preckacz/solver.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "preckacz/errors.hpp"

namespace preckacz {

namespace {

using SteadyClock = std::chrono::steady_clock;

double seconds_since(SteadyClock::time_point start) {
    return std::chrono::duration<double>(SteadyClock::now() - start).count();
}

// Wall-clock budget checks are amortized over this many iterations.
constexpr std::size_t kClockStride = 64;

/// Shared iteration state for the plain and preconditioned loops. The
/// iterate lives in solve space: x for plain runs, y for preconditioned ones.
class KaczmarzEngine {
public:
    KaczmarzEngine(const RowSource& source, const SolveConfig& config, const Reference& reference)
        : source_(source),
          config_(config),
          reference_(reference),
          sampler_(RowSampler::make(config.sampler, source)),
          rng_(config.seed, kRowStream),
          iterate_(source.col_count(), 0.0),
          row_buffer_(source.col_count()),
          eval_every_(config.eval_every.value_or(source.row_count())) {
        if (reference.has_x_star() && reference.x_star.size() != source.col_count())
            throw DimensionMismatch("x_star length does not match column count");
    }

    void set_preconditioner(const SketchedPreconditioner* p) {
        if (p != nullptr && p->dim() != source_.col_count())
            throw DimensionMismatch("preconditioner size does not match column count");
        preconditioner_ = p;
    }

    Vector& iterate() { return iterate_; }
    double elapsed() const { return elapsed_; }
    std::size_t iterations() const { return iter_; }
    std::size_t skipped() const { return skipped_; }
    std::vector<TraceRecord>& trace() { return trace_; }

    void advance_clock(double seconds) { elapsed_ += seconds; }

    /// Solution-space estimate for the current iterate.
    Vector current_x() const {
        return preconditioner_ ? apply_preconditioner(*preconditioner_, iterate_) : iterate_;
    }

    /// Records metrics at the current iteration unless already recorded.
    /// Returns true when the stopping target is met.
    bool evaluate() {
        if (!trace_.empty() && trace_.back().iter == iter_) return met_target(trace_.back());
        const Vector x = current_x();
        TraceRecord rec;
        rec.iter = iter_;
        rec.elapsed_seconds = elapsed_;
        if (reference_.has_x_star()) {
            Vector diff(x);
            axpy(-1.0, reference_.x_star, diff);
            rec.rel_error = norm2(diff) / norm2(reference_.x_star);
        }
        if (reference_.residual) rec.residual = reference_.residual(x);
        trace_.push_back(rec);
        return met_target(rec);
    }

    /// Iterates until the target, max_iters, or elapsed >= time_limit.
    SolveStatus run(double time_limit) {
        if (evaluate()) return SolveStatus::Converged;
        while (true) {
            if (iter_ >= config_.max_iters) return SolveStatus::IterBudget;
            if (elapsed_ >= time_limit) return SolveStatus::TimeBudget;

            const std::size_t next_eval = (iter_ / eval_every_ + 1) * eval_every_;
            const std::size_t segment_end = std::min(next_eval, config_.max_iters);
            const bool timed_out = run_segment(segment_end, time_limit);
            if (evaluate()) return SolveStatus::Converged;
            if (timed_out) return SolveStatus::TimeBudget;
        }
    }

private:
    bool met_target(const TraceRecord& rec) const {
        if (rec.rel_error) return *rec.rel_error <= config_.target_rel_error;
        if (rec.residual) return *rec.residual <= config_.target_rel_error;
        return false;
    }

    double step_flops() const {
        const double n = static_cast<double>(source_.col_count());
        return 6.0 * n + (preconditioner_ ? preconditioner_->apply_flops() : 0.0);
    }

    // One row draw and projection. Zero rows consume the iteration unchanged.
    void step() {
        const std::size_t i = sampler_.next(rng_);
        std::span<const double> a = source_.row(i);
        if (preconditioner_) {
            apply_right(*preconditioner_, a, row_buffer_);
            a = row_buffer_;
        }
        const double norm_sq = squared_norm(a);
        ++iter_;
        if (!(norm_sq > 0.0)) {
            ++skipped_;
            return;
        }
        const double scale = (dot(a, iterate_) - source_.rhs(i)) / norm_sq;
        axpy(-scale, a, iterate_);
    }

    // Returns true if the time limit stopped the segment early.
    bool run_segment(std::size_t segment_end, double time_limit) {
        if (config_.clock == ClockKind::Work) {
            const double dt = step_flops() / kWorkFlopsPerSecond;
            while (iter_ < segment_end) {
                step();
                elapsed_ += dt;
                if (elapsed_ >= time_limit) return true;
            }
            return false;
        }
        const double base = elapsed_;
        const auto start = SteadyClock::now();
        bool timed_out = false;
        while (iter_ < segment_end) {
            step();
            if (iter_ % kClockStride == 0 && base + seconds_since(start) >= time_limit) {
                timed_out = true;
                break;
            }
        }
        elapsed_ = base + seconds_since(start);
        return timed_out || elapsed_ >= time_limit;
    }

    const RowSource& source_;
    const SolveConfig& config_;
    const Reference& reference_;
    RowSampler sampler_;
    RngStream rng_;
    Vector iterate_;
    Vector row_buffer_;
    std::size_t eval_every_;
    const SketchedPreconditioner* preconditioner_ = nullptr;
    std::size_t iter_ = 0;
    std::size_t skipped_ = 0;
    double elapsed_ = 0.0;
    std::vector<TraceRecord> trace_;
};

double build_time(const SketchedPreconditioner& p, ClockKind clock) {
    return clock == ClockKind::Work ? p.build_flops() / kWorkFlopsPerSecond : p.build_seconds();
}

PreconditionerMeta meta_of(const SketchedPreconditioner& p, ClockKind clock) {
    return PreconditionerMeta{p.gamma(), p.sketch_rows(), p.used_pseudoinverse(),
                              build_time(p, clock), std::nullopt, std::nullopt};
}

SolveResult finish(KaczmarzEngine& engine, SolveStatus status) {
    SolveResult result;
    result.x = engine.current_x();
    result.trace = std::move(engine.trace());
    result.status = status;
    result.iterations = engine.iterations();
    result.skipped_rows = engine.skipped();
    return result;
}

} // namespace

std::string_view to_string(ClockKind kind) {
    return kind == ClockKind::Work ? "work" : "wall";
}

ClockKind parse_clock_kind(std::string_view text) {
    if (text == "wall") return ClockKind::Wall;
    if (text == "work") return ClockKind::Work;
    throw InvalidArgument("unknown clock '" + std::string(text) + "' (expected wall or work)");
}

std::string_view to_string(SolveStatus status) {
    switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::IterBudget: return "iter_budget";
    case SolveStatus::TimeBudget: return "time_budget";
    }
    return "unknown";
}

void SolveConfig::validate() const {
    if (max_iters == 0) throw InvalidArgument("max_iters must be >= 1");
    if (eval_every && *eval_every == 0) throw InvalidArgument("eval_every must be >= 1");
    if (!(time_budget_seconds > 0.0)) throw InvalidArgument("time budget must be positive");
    if (!(target_rel_error >= 0.0)) throw InvalidArgument("target_rel_error must be >= 0");
}

Vector kaczmarz_step(std::span<const double> x, std::span<const double> a, double b_i) {
    if (x.size() != a.size()) throw DimensionMismatch("kaczmarz_step: length mismatch");
    const double norm_sq = squared_norm(a);
    if (!(norm_sq > 0.0)) throw ZeroRow("kaczmarz_step: zero row");
    Vector out(x.begin(), x.end());
    axpy(-(dot(a, x) - b_i) / norm_sq, a, out);
    return out;
}

SolveResult kaczmarz_solve(const RowSource& source, const SolveConfig& config,
                           const Reference& reference) {
    config.validate();
    KaczmarzEngine engine(source, config, reference);
    const SolveStatus status = engine.run(config.time_budget_seconds);
    return finish(engine, status);
}

SolveResult preconditioned_kaczmarz_solve(const RowSource& source, const SketchedPreconditioner& p,
                                          const SolveConfig& config, const Reference& reference) {
    config.validate();
    KaczmarzEngine engine(source, config, reference);
    engine.set_preconditioner(&p);
    engine.advance_clock(build_time(p, config.clock));
    const SolveStatus status = engine.run(config.time_budget_seconds);
    SolveResult result = finish(engine, status);
    result.preconditioner = meta_of(p, config.clock);
    return result;
}

SolveResult fine_tuned_solve(const RowSource& source, double gamma, double tau_seconds,
                             const SolveConfig& config, const Reference& reference) {
    config.validate();
    if (!(tau_seconds >= 0.0)) throw InvalidArgument("tau must be >= 0");
    KaczmarzEngine engine(source, config, reference);
    const double budget = config.time_budget_seconds;
    SolveStatus status = engine.run(std::min(tau_seconds, budget));
    // The switch only fires when the plain phase stopped on tau.
    if (status != SolveStatus::TimeBudget || engine.elapsed() >= budget)
        return finish(engine, status);

    RngStream sketch_rng(config.seed, kSketchStream);
    const SketchedPreconditioner p = build_sketched_preconditioner(source, gamma, sketch_rng);
    const std::size_t switch_iter = engine.iterations();
    const double switch_seconds = engine.elapsed();
    engine.advance_clock(build_time(p, config.clock));
    Vector y = solve_preconditioner(p, engine.iterate());
    engine.iterate() = std::move(y);
    engine.set_preconditioner(&p);
    status = engine.run(budget);

    SolveResult result = finish(engine, status);
    PreconditionerMeta meta = meta_of(p, config.clock);
    meta.switch_iter = switch_iter;
    meta.switch_seconds = switch_seconds;
    result.preconditioner = meta;
    return result;
}

double theoretical_bound(double kappa_f_value, std::size_t k, double init_sq_error) {
    if (!(kappa_f_value >= 1.0)) throw InvalidArgument("kappa_f must be >= 1");
    const double rate = -1.0 / (kappa_f_value * kappa_f_value);
    return std::exp(static_cast<double>(k) * std::log1p(rate)) * init_sq_error;
}

void write_trace_csv(std::ostream& out, std::span<const TraceRecord> trace) {
    const auto old_precision = out.precision(17);
    out << "iter,elapsed_seconds,rel_error,residual\n";
    for (const TraceRecord& r : trace) {
        out << r.iter << ',' << r.elapsed_seconds << ',';
        if (r.rel_error) out << *r.rel_error;
        out << ',';
        if (r.residual) out << *r.residual;
        out << '\n';
    }
    out.precision(old_precision);
}

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("trace: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "iter,elapsed_seconds,rel_error,residual")
        throw IoError("trace: unexpected header '" + line + "'");

    std::vector<TraceRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (line.back() == ',') fields.emplace_back();
        if (fields.size() != 4)
            throw IoError("trace line " + std::to_string(line_no) + ": expected 4 fields");
        try {
            TraceRecord r;
            std::size_t pos = 0;
            r.iter = std::stoull(fields[0], &pos);
            if (pos != fields[0].size()) throw std::invalid_argument("iter");
            r.elapsed_seconds = std::stod(fields[1]);
            if (!fields[2].empty()) r.rel_error = std::stod(fields[2]);
            if (!fields[3].empty()) r.residual = std::stod(fields[3]);
            out.push_back(r);
        } catch (const std::exception&) {
            throw IoError("trace line " + std::to_string(line_no) + ": malformed value in '" +
                          line + "'");
        }
    }
    return out;
}

} // namespace preckacz
