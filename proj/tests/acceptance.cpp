// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance                 run every criterion
//   acceptance --criterion 5   run one criterion (exit status reflects it)
//
// Runs that compare methods at an iteration budget use the work clock so the
// outcome does not depend on machine load; see README for the clock model.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "preckacz/errors.hpp"
#include "preckacz/precond.hpp"
#include "preckacz/problems.hpp"
#include "preckacz/solver.hpp"

using namespace preckacz;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double time_limit_seconds;
    std::function<Outcome()> run;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

SolveConfig iteration_budget(std::uint64_t seed, std::size_t iters, std::size_t eval_every) {
    SolveConfig cfg;
    cfg.seed = seed;
    cfg.max_iters = iters;
    cfg.eval_every = eval_every;
    cfg.time_budget_seconds = 1e12;
    cfg.target_rel_error = 0.0;
    cfg.clock = ClockKind::Work;
    return cfg;
}

Reference reference_for(const GeneratedProblem& p) {
    Reference ref;
    if (p.x_star) ref.x_star = *p.x_star;
    ref.residual = [&p](std::span<const double> x) { return p.relative_residual(x); };
    return ref;
}

SolveResult run_preconditioned(const GeneratedProblem& p, double gamma, const SolveConfig& cfg,
                               const Reference& ref) {
    RngStream sketch(cfg.seed, kSketchStream);
    const SketchedPreconditioner pre = build_sketched_preconditioner(p.source(), gamma, sketch);
    return preconditioned_kaczmarz_solve(p.source(), pre, cfg, ref);
}

// Value of the record at iteration `iter`; the trace must contain it.
double error_at(const SolveResult& r, std::size_t iter) {
    for (const TraceRecord& rec : r.trace)
        if (rec.iter == iter) return *rec.rel_error;
    throw Error("trace has no record at iteration " + std::to_string(iter));
}

GeneratedProblem random_system(std::uint64_t seed, std::size_t m, std::size_t n, double cond) {
    RngStream rng(seed, 0);
    return gen_random_conditioned(m, n, cond, rng);
}

GeneratedProblem desk_tomography() { return gen_parallel_tomo(16, 36, default_ray_count(16)); }

// ---------------------------------------------------------------------------

Outcome exact_preconditioner_optimality() {
    double worst_k = 0.0;
    double worst_kf = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const GeneratedProblem p = random_system(seed, 500, 25, 1e4);
        const DenseMatrix ap = matmul(p.a, exact_preconditioner(p.a));
        worst_k = std::max(worst_k, std::abs(condition_number(ap) - 1.0));
        worst_kf = std::max(worst_kf, std::abs(kappa_f(ap) - 5.0) / 5.0);
    }
    return {worst_k <= 1e-8 && worst_kf <= 1e-6,
            "max |k(AP*)-1| = " + sci(worst_k) + ", max |kF(AP*)-5|/5 = " + sci(worst_kf)};
}

Outcome full_sketch_equivalence() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const GeneratedProblem p = random_system(seed, 500, 25, 1e4);
        RngStream sketch(seed, kSketchStream);
        const double gamma = 500.0 / 25.0;
        const SketchedPreconditioner s = build_sketched_preconditioner(p.source(), gamma, sketch);
        if (s.sketch_rows() != 500) return {false, "sketch did not take every row"};
        const DenseMatrix exact = exact_preconditioner(p.a);
        for (std::size_t k = 0; k < exact.data().size(); ++k)
            worst = std::max(worst, std::abs(exact.data()[k] - s.p().data()[k]));
    }
    return {worst <= 1e-10, "max entrywise difference = " + sci(worst)};
}

Outcome expected_error_bound() {
    const GeneratedProblem p = random_system(1, 400, 20, 50.0);
    const Reference ref = reference_for(p);
    const double kf = kappa_f(p.a);
    const double x_sq = squared_norm(*p.x_star);
    const std::size_t stride = 400;
    const std::size_t points = 11;
    std::vector<double> mean(points, 0.0);
    const int seeds = 200;
    for (int s = 1; s <= seeds; ++s) {
        SolveConfig cfg = iteration_budget(static_cast<std::uint64_t>(s), stride * (points - 1), stride);
        cfg.sampler = SamplerKind::SquaredNorm;
        const SolveResult r = kaczmarz_solve(p.source(), cfg, ref);
        for (std::size_t k = 0; k < points; ++k) {
            const double e = error_at(r, k * stride);
            mean[k] += e * e * x_sq / seeds;
        }
    }
    double worst_ratio = 0.0;
    for (std::size_t k = 0; k < points; ++k)
        worst_ratio = std::max(worst_ratio, mean[k] / theoretical_bound(kf, k * stride, x_sq));
    return {worst_ratio <= 1.1, "kF = " + sci(kf) + ", max mean/bound over checkpoints = " +
                                    sci(worst_ratio) + " (mean at k=4000: " + sci(mean.back()) + ")"};
}

Outcome kappa_f_inequality() {
    std::vector<DenseMatrix> matrices;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) matrices.push_back(random_system(seed, 500, 25, 1e4).a);
    matrices.push_back(random_system(1, 400, 20, 50.0).a);
    matrices.push_back(random_system(1, 2000, 50, 1e5).a);
    matrices.push_back(desk_tomography().a);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (std::size_t d : {3, 5, 10, 20}) {
            RngStream rng(seed, 0);
            matrices.push_back(gen_rff_problem(2000, d, 1.0, rng).a);
        }
    }
    RngStream rng(11, 0);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + rng.uniform_index(30);
        const std::size_t m = n + rng.uniform_index(200);
        matrices.push_back(gen_random_conditioned(m, n, std::pow(10.0, 4.0 * rng.uniform01()), rng).a);
    }
    std::size_t violations = 0;
    std::size_t skipped = 0;
    double tightest = std::numeric_limits<double>::infinity();
    for (const DenseMatrix& a : matrices) {
        try {
            const double lhs = kappa_f(a);
            const double rhs = std::sqrt(static_cast<double>(a.cols())) * condition_number(a);
            if (lhs > rhs + 1e-9) ++violations;
            tightest = std::min(tightest, rhs - lhs);
        } catch (const ConditioningOverflow&) {
            ++skipped;
        }
    }
    return {violations == 0 && skipped == 0,
            std::to_string(matrices.size()) + " matrices, " + std::to_string(violations) +
                " violations, " + std::to_string(skipped) + " numerically singular, min slack " +
                sci(tightest)};
}

Outcome gamma_ordering() {
    const GeneratedProblem p = random_system(1, 2000, 50, 1e5);
    const Reference ref = reference_for(p);
    const std::size_t m = 2000;
    std::vector<double> plain, g1, g2, g3;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const SolveConfig cfg = iteration_budget(seed, 40 * m, m);
        plain.push_back(*kaczmarz_solve(p.source(), cfg, ref).trace.back().rel_error);
        g1.push_back(*run_preconditioned(p, 1.0, cfg, ref).trace.back().rel_error);
        g2.push_back(*run_preconditioned(p, 2.0, cfg, ref).trace.back().rel_error);
        g3.push_back(*run_preconditioned(p, 3.0, cfg, ref).trace.back().rel_error);
    }
    const double mp = median(plain), m1 = median(g1), m2 = median(g2), m3 = median(g3);
    return {m3 < m2 && m2 < mp && m3 <= 1e-8 && mp >= 1e-3,
            "median rel_error plain " + sci(mp) + ", g1 " + sci(m1) + ", g2 " + sci(m2) + ", g3 " +
                sci(m3)};
}

Outcome noise_floor() {
    const GeneratedProblem clean = random_system(1, 2000, 50, 1e5);
    const std::size_t m = 2000;
    const std::vector<double> sigmas{1e-4, 1e-3, 1e-2, 1e-1};
    std::vector<double> pre, plain;
    for (double sigma : sigmas) {
        RngStream noise_rng(1, 1);
        const GeneratedProblem p = add_noise(clean, sigma, noise_rng);
        const Reference ref = reference_for(p);
        std::vector<double> e_pre, e_plain;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const SolveConfig cfg = iteration_budget(seed, 40 * m, m);
            e_plain.push_back(*kaczmarz_solve(p.source(), cfg, ref).trace.back().rel_error);
            e_pre.push_back(*run_preconditioned(p, 3.0, cfg, ref).trace.back().rel_error);
        }
        pre.push_back(median(e_pre));
        plain.push_back(median(e_plain));
    }
    bool monotone = true;
    for (std::size_t k = 1; k < pre.size(); ++k) monotone = monotone && pre[k] > pre[k - 1];
    const bool low_noise_gain = pre.front() < plain.front();
    const double high_ratio = std::max(pre.back(), plain.back()) / std::min(pre.back(), plain.back());
    std::ostringstream os;
    os << "sigma: precond(g3) / plain median rel_error =";
    for (std::size_t k = 0; k < sigmas.size(); ++k)
        os << ' ' << sci(sigmas[k]) << ": " << sci(pre[k]) << "/" << sci(plain[k]) << ';';
    os << " monotone=" << monotone << " gain@1e-4=" << low_noise_gain
       << " ratio@1e-1=" << sci(high_ratio);
    return {monotone && low_noise_gain && high_ratio < 2.0, os.str()};
}

Outcome tomography_crossing() {
    const GeneratedProblem p = desk_tomography();
    const Reference ref = reference_for(p);
    const std::size_t m = p.a.rows();
    std::vector<double> plain_early, plain_final;
    std::vector<std::vector<double>> pre_early(2), pre_final(2);
    std::size_t fallbacks = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const SolveConfig cfg = iteration_budget(seed, 60 * m, m);
        const SolveResult plain = kaczmarz_solve(p.source(), cfg, ref);
        plain_early.push_back(error_at(plain, m));
        plain_final.push_back(*plain.trace.back().rel_error);
        for (std::size_t g = 0; g < 2; ++g) {
            const SolveResult r = run_preconditioned(p, 2.0 + static_cast<double>(g), cfg, ref);
            pre_early[g].push_back(error_at(r, m));
            pre_final[g].push_back(*r.trace.back().rel_error);
        }
        const SolveResult g1 = run_preconditioned(p, 1.0, cfg, ref);
        if (g1.preconditioner && g1.preconditioner->used_pseudoinverse) ++fallbacks;
        if (!std::isfinite(*g1.trace.back().rel_error)) return {false, "gamma=1 run diverged"};
    }
    const double pe = median(plain_early), pf = median(plain_final);
    bool plain_leads = true;
    bool pre_wins = true;
    std::ostringstream os;
    os << "median rel_error at 1m / 60m: plain " << sci(pe) << " / " << sci(pf);
    for (std::size_t g = 0; g < 2; ++g) {
        const double e = median(pre_early[g]), f = median(pre_final[g]);
        plain_leads = plain_leads && pe < e;
        pre_wins = pre_wins && f < pf;
        os << ", g" << g + 2 << ' ' << sci(e) << " / " << sci(f);
    }
    os << "; gamma=1 pseudoinverse fallback on " << fallbacks << "/5 seeds";
    return {plain_leads && pre_wins && fallbacks >= 1, os.str()};
}

Outcome fine_tuning_dominance() {
    const GeneratedProblem p = desk_tomography();
    const Reference ref = reference_for(p);
    const double budget = 0.64;  // modeled seconds on the work clock
    const double tau = 0.25 * budget;
    const double gamma = 2.0;
    std::vector<double> plain, pre, fine;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SolveConfig cfg = iteration_budget(seed, std::numeric_limits<std::size_t>::max(), p.a.rows());
        cfg.time_budget_seconds = budget;
        plain.push_back(*kaczmarz_solve(p.source(), cfg, ref).trace.back().rel_error);
        pre.push_back(*run_preconditioned(p, gamma, cfg, ref).trace.back().rel_error);
        fine.push_back(*fine_tuned_solve(p.source(), gamma, tau, cfg, ref).trace.back().rel_error);
    }
    const double mp = median(plain), mpre = median(pre), mf = median(fine);
    return {mf <= 1.1 * std::min(mp, mpre),
            "budget " + sci(budget) + " s, tau " + sci(tau) + " s: median rel_error plain " + sci(mp) +
                ", preconditioned " + sci(mpre) + ", fine-tuned " + sci(mf)};
}

Outcome rff_consistency() {
    const std::vector<std::size_t> ds{3, 5, 10, 20};
    std::vector<double> ls_medians;
    for (std::size_t d : ds) {
        std::vector<double> res;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            RngStream rng(seed, 0);
            res.push_back(std::stod(gen_rff_problem(2000, d, 1.0, rng).metadata.at("ls_residual")));
        }
        ls_medians.push_back(median(res));
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < ls_medians.size(); ++k)
        decreasing = decreasing && ls_medians[k] < ls_medians[k - 1];

    // Iteration race to a relative residual of 1e-6 on the d = 5 systems.
    const std::size_t budget = 200 * 2000;
    std::size_t pre_reached = 0, plain_reached = 0;
    std::vector<double> pre_final, plain_final;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        RngStream rng(seed, 0);
        const GeneratedProblem p = gen_rff_problem(2000, 5, 1.0, rng);
        const Reference ref = reference_for(p);
        SolveConfig cfg = iteration_budget(seed, budget, 2000);
        cfg.target_rel_error = 1e-6;
        const SolveResult plain = kaczmarz_solve(p.source(), cfg, ref);
        const SolveResult pre = run_preconditioned(p, 2.0, cfg, ref);
        plain_reached += plain.status == SolveStatus::Converged;
        pre_reached += pre.status == SolveStatus::Converged;
        plain_final.push_back(*plain.trace.back().residual);
        pre_final.push_back(*pre.trace.back().residual);
    }
    const bool race = 2 * pre_reached > 10 && 2 * plain_reached <= 10;
    std::ostringstream os;
    os << "median LS residual d=3,5,10,20: ";
    for (double v : ls_medians) os << sci(v) << ' ';
    os << "(decreasing=" << decreasing << "); d=5 within " << budget / 2000
       << "m iterations reached 1e-6: precond(g2) " << pre_reached << "/10, plain " << plain_reached
       << "/10; median final residual precond " << sci(median(pre_final)) << ", plain "
       << sci(median(plain_final)) << ", LS floor " << sci(ls_medians[1]);
    return {decreasing && race, os.str()};
}

Outcome step_invariants() {
    std::size_t steps = 0, plane_fail = 0, monotone_fail = 0;
    double worst_plane = 0.0;
    RngStream meta(5, 0);
    for (std::uint64_t sys = 1; sys <= 20; ++sys) {
        const std::size_t n = 2 + meta.uniform_index(40);
        const std::size_t m = n + meta.uniform_index(300);
        const double cond = std::pow(10.0, 6.0 * meta.uniform01());
        RngStream rng(sys, 0);
        const GeneratedProblem p = gen_random_conditioned(m, n, cond, rng);
        const Vector& xs = *p.x_star;
        RowSampler sampler = sys % 2 ? RowSampler::uniform(m) : RowSampler::make(SamplerKind::SquaredNorm, p.source());
        RngStream draws(sys, kRowStream);
        Vector x(n);
        for (double& v : x) v = rng.normal(0.0, 5.0);
        Vector err(x);
        axpy(-1.0, xs, err);
        double dist = norm2(err);
        for (int k = 0; k < 1000; ++k) {
            const std::size_t i = sampler.next(draws);
            const auto a = p.a.row(i);
            const Vector next = kaczmarz_step(x, a, p.b[i]);
            const double gap = std::abs(dot(a, next) - p.b[i]);
            const double scale = std::abs(p.b[i]) + norm2(a) * norm2(x);
            worst_plane = std::max(worst_plane, gap / scale);
            if (gap > 1e-12 * scale) ++plane_fail;
            Vector e(next);
            axpy(-1.0, xs, e);
            const double d = norm2(e);
            // b is A x* rounded, so x* itself sits within roundoff of each plane.
            if (d > dist + 1e-12 * (norm2(xs) + dist)) ++monotone_fail;
            dist = d;
            x = next;
            ++steps;
        }
    }
    return {steps >= 10000 && plane_fail == 0 && monotone_fail == 0,
            std::to_string(steps) + " steps, hyperplane violations " + std::to_string(plane_fail) +
                " (worst scaled gap " + sci(worst_plane) + "), distance increases " +
                std::to_string(monotone_fail)};
}

Outcome coherence_bounds() {
    std::size_t checked = 0, violations = 0;
    double lo_slack = std::numeric_limits<double>::infinity();
    double hi_slack = std::numeric_limits<double>::infinity();
    auto check = [&](const DenseMatrix& a) {
        const double mu = coherence(a);
        const double floor = static_cast<double>(a.cols()) / static_cast<double>(a.rows());
        if (mu < floor - 1e-12 || mu > 1.0 + 1e-12) ++violations;
        lo_slack = std::min(lo_slack, mu - floor);
        hi_slack = std::min(hi_slack, 1.0 - mu);
        ++checked;
    };
    RngStream rng(7, 0);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + rng.uniform_index(30);
        const std::size_t m = n + rng.uniform_index(300);
        DenseMatrix a(m, n);
        for (double& v : a.data()) v = rng.normal();
        check(a);
    }
    const DenseMatrix tomo = desk_tomography().a;
    check(tomo);
    return {violations == 0 && checked == 51,
            std::to_string(checked) + " matrices, " + std::to_string(violations) +
                " outside [n/m, 1]; tomography mu = " + sci(coherence(tomo))};
}

std::vector<Criterion> criteria() {
    return {
        {1, "exact_preconditioner_optimality", 10, exact_preconditioner_optimality},
        {2, "full_sketch_equivalence", 5, full_sketch_equivalence},
        {3, "expected_error_bound", 60, expected_error_bound},
        {4, "kappa_f_inequality", 30, kappa_f_inequality},
        {5, "gamma_ordering", 120, gamma_ordering},
        {6, "noise_floor", 180, noise_floor},
        {7, "tomography_crossing", 300, tomography_crossing},
        {8, "fine_tuning_dominance", 300, fine_tuning_dominance},
        {9, "rff_consistency", 120, rff_consistency},
        {10, "step_invariants", 10, step_invariants},
        {11, "coherence_bounds", 10, coherence_bounds},
    };
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"preckacz acceptance suite"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-11)")->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);

    int failures = 0;
    for (const Criterion& c : criteria()) {
        if (only != 0 && c.id != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& ex) {
            outcome = {false, std::string("exception: ") + ex.what()};
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds < c.time_limit_seconds;
        const bool pass = outcome.pass && in_time;
        failures += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " C" << c.id << ' ' << c.name << ": "
                  << outcome.detail << " [" << sci(seconds) << " s of " << c.time_limit_seconds
                  << " s" << (in_time ? "" : ", over time limit") << "]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
