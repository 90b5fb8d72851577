#include "preckacz/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "preckacz/precond.hpp"

namespace preckacz {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string real_text(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// Short form for file names: 2 -> "2", 0.5 -> "0.5".
std::string short_real(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

struct Entry {
    std::string section;
    std::string key;
    std::string value;
    std::size_t line = 0;
};

class EntryReader {
public:
    EntryReader(std::string_view origin, const Entry& e) : origin_(origin), e_(e) {}

    [[noreturn]] void fail(const std::string& why) const {
        throw ConfigError(origin_ + ":" + std::to_string(e_.line) + ": field '" + e_.section +
                          "." + e_.key + "': " + why);
    }

    std::size_t count() const {
        try {
            std::size_t pos = 0;
            if (!e_.value.empty() && e_.value[0] == '-') throw std::invalid_argument("neg");
            // Accept integral scientific notation such as 4e4.
            const double d = std::stod(e_.value, &pos);
            if (pos != e_.value.size() || d < 0 || d != std::floor(d)) throw std::invalid_argument("");
            return static_cast<std::size_t>(d);
        } catch (const std::exception&) {
            fail("expected a non-negative integer, got '" + e_.value + "'");
        }
    }

    std::uint64_t u64() const {
        try {
            std::size_t pos = 0;
            if (!e_.value.empty() && e_.value[0] == '-') throw std::invalid_argument("neg");
            const auto v = std::stoull(e_.value, &pos);
            if (pos != e_.value.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            fail("expected an unsigned integer, got '" + e_.value + "'");
        }
    }

    double real() const { return real_of(e_.value); }

    double real_of(const std::string& text) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(text, &pos);
            if (pos != text.size() || !std::isfinite(v)) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            fail("expected a real number, got '" + text + "'");
        }
    }

    bool boolean() const {
        if (e_.value == "true" || e_.value == "yes" || e_.value == "1") return true;
        if (e_.value == "false" || e_.value == "no" || e_.value == "0") return false;
        fail("expected true or false, got '" + e_.value + "'");
    }

    const std::string& text() const { return e_.value; }

private:
    std::string origin_;
    const Entry& e_;
};

std::vector<Entry> read_entries(std::istream& in, std::string_view origin) {
    std::vector<Entry> entries;
    std::string section;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                                  ": malformed section header '" + line + "'");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        if (section.empty())
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                              ": key outside of any [section]");
        entries.push_back({section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no});
    }
    return entries;
}

bool apply_problem_entry(ProblemSpec& p, const Entry& e, std::string_view origin) {
    const EntryReader r(origin, e);
    if (e.key == "kind") {
        if (e.value != "random" && e.value != "tomo" && e.value != "rff")
            r.fail("expected random, tomo or rff, got '" + e.value + "'");
        p.kind = e.value;
    } else if (e.key == "m") p.m = r.count();
    else if (e.key == "n") p.n = r.count();
    else if (e.key == "cond") p.cond = r.real();
    else if (e.key == "noise") p.noise = r.real();
    else if (e.key == "q") p.q = r.count();
    else if (e.key == "angles") p.angles = r.count();
    else if (e.key == "rays") p.rays = r.count();
    else if (e.key == "d") p.d = r.count();
    else if (e.key == "rff_sigma") p.rff_sigma = r.real();
    else if (e.key == "seed") p.seed = r.u64();
    else r.fail("unknown key");
    return true;
}

void apply_methods_entry(std::vector<MethodSpec>& methods, const Entry& e, std::string_view origin) {
    const EntryReader r(origin, e);
    using Kind = MethodSpec::Kind;
    if (e.key == "plain") {
        if (r.boolean()) methods.push_back({Kind::Plain, 1.0, 0.0});
    } else if (e.key == "identity") {
        if (r.boolean()) methods.push_back({Kind::Identity, 1.0, 0.0});
    } else if (e.key == "preconditioned") {
        for (const std::string& g : split_list(e.value)) {
            const double gamma = r.real_of(g);
            if (!(gamma >= 1.0)) r.fail("gamma must be >= 1, got " + g);
            methods.push_back({Kind::Preconditioned, gamma, 0.0});
        }
    } else if (e.key == "fine_tuned") {
        for (const std::string& item : split_list(e.value)) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) r.fail("expected gamma:tau pairs, got '" + item + "'");
            const double gamma = r.real_of(trim(item.substr(0, colon)));
            const double tau = r.real_of(trim(item.substr(colon + 1)));
            if (!(gamma >= 1.0)) r.fail("gamma must be >= 1");
            if (!(tau >= 0.0)) r.fail("tau must be >= 0");
            methods.push_back({Kind::FineTuned, gamma, tau});
        }
    } else {
        r.fail("unknown key");
    }
}

void apply_solver_entry(SolveConfig& s, const Entry& e, std::string_view origin) {
    const EntryReader r(origin, e);
    try {
        if (e.key == "sampler") s.sampler = parse_sampler_kind(e.value);
        else if (e.key == "max_iters") s.max_iters = r.count();
        else if (e.key == "time_budget") s.time_budget_seconds = r.real();
        else if (e.key == "target_rel_error") s.target_rel_error = r.real();
        else if (e.key == "eval_every") s.eval_every = r.count();
        else if (e.key == "clock") s.clock = parse_clock_kind(e.value);
        else r.fail("unknown key");
    } catch (const InvalidArgument& ex) {
        r.fail(ex.what());
    }
}

void apply_run_entry(ExperimentConfig& c, const Entry& e, std::string_view origin) {
    const EntryReader r(origin, e);
    if (e.key == "seeds") {
        c.seeds.clear();
        for (const std::string& s : split_list(e.value)) {
            Entry single = e;
            single.value = s;
            c.seeds.push_back(EntryReader(origin, single).u64());
        }
    } else if (e.key == "output") {
        c.output = e.value;
    } else if (e.key == "threads") {
        c.threads = r.count();
    } else {
        r.fail("unknown key");
    }
}

void validate_problem(const ProblemSpec& p, std::string_view origin) {
    auto bad = [&](const std::string& why) {
        throw ConfigError(std::string(origin) + ": [problem]: " + why);
    };
    if (p.kind == "random") {
        if (p.n < 2 || p.m < p.n) bad("random problems need m >= n >= 2");
        if (!(p.cond >= 1.0)) bad("cond must be >= 1");
        if (!(p.noise >= 0.0)) bad("noise must be >= 0");
    } else if (p.kind == "tomo") {
        if (p.q < 8) bad("tomo problems need q >= 8");
        if (p.angles == 0 || (p.rays && *p.rays == 0)) bad("angles and rays must be positive");
    } else if (p.kind == "rff") {
        if (p.d < 2 || p.m < 2 * p.d) bad("rff problems need d >= 2 and m >= 2d");
        if (!(p.rff_sigma > 0.0)) bad("rff_sigma must be positive");
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

void write_optional(std::ostream& out, const std::optional<double>& v) {
    if (v) out << *v;
}

// Step interpolation: value of the last record at or before t.
std::optional<double> value_at(const std::vector<TraceRecord>& trace, bool use_rel, double t) {
    std::optional<double> v;
    for (const TraceRecord& r : trace) {
        if (r.elapsed_seconds > t) break;
        v = use_rel ? r.rel_error : r.residual;
    }
    return v;
}

std::string seed_suffix(const std::string& name) {
    const auto pos = name.rfind("_seed");
    return pos == std::string::npos ? std::string() : name.substr(pos);
}

} // namespace

std::string MethodSpec::label() const {
    switch (kind) {
    case Kind::Plain: return "plain";
    case Kind::Identity: return "identity";
    case Kind::Preconditioned: return "precond_g" + short_real(gamma);
    case Kind::FineTuned: return "finetune_g" + short_real(gamma) + "_tau" + short_real(tau);
    }
    return "unknown";
}

ProblemSpec parse_problem_spec(std::istream& in, std::string_view origin) {
    ProblemSpec p;
    for (const Entry& e : read_entries(in, origin))
        if (e.section == "problem") apply_problem_entry(p, e, origin);
    validate_problem(p, origin);
    return p;
}

ExperimentConfig parse_experiment_config(std::istream& in, std::string_view origin) {
    ExperimentConfig c;
    c.seeds = {1};
    bool seen_methods = false;
    for (const Entry& e : read_entries(in, origin)) {
        if (e.section == "problem") apply_problem_entry(c.problem, e, origin);
        else if (e.section == "methods") {
            seen_methods = true;
            apply_methods_entry(c.methods, e, origin);
        } else if (e.section == "solver") apply_solver_entry(c.solver, e, origin);
        else if (e.section == "run") apply_run_entry(c, e, origin);
        else
            throw ConfigError(std::string(origin) + ":" + std::to_string(e.line) +
                              ": unknown section [" + e.section + "]");
    }
    validate_problem(c.problem, origin);
    if (!seen_methods || c.methods.empty())
        throw ConfigError(std::string(origin) + ": [methods]: at least one method is required");
    if (c.seeds.empty()) throw ConfigError(std::string(origin) + ": [run]: seeds must be nonempty");
    if (c.threads == 0) throw ConfigError(std::string(origin) + ": [run]: threads must be >= 1");
    for (const MethodSpec& m : c.methods)
        if (m.kind == MethodSpec::Kind::FineTuned && !(m.tau < c.solver.time_budget_seconds))
            throw ConfigError(std::string(origin) + ": [methods]: fine_tuned tau " +
                              short_real(m.tau) + " must be below the time budget");
    try {
        c.solver.validate();
    } catch (const InvalidArgument& ex) {
        throw ConfigError(std::string(origin) + ": [solver]: " + ex.what());
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    return parse_experiment_config(in, path.string());
}

std::string format_experiment_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << std::setprecision(17);
    const ProblemSpec& p = c.problem;
    os << "[problem]\n"
       << "kind = " << p.kind << '\n'
       << "m = " << p.m << '\n'
       << "n = " << p.n << '\n'
       << "cond = " << p.cond << '\n'
       << "noise = " << p.noise << '\n'
       << "q = " << p.q << '\n'
       << "angles = " << p.angles << '\n';
    if (p.rays) os << "rays = " << *p.rays << '\n';
    os << "d = " << p.d << '\n'
       << "rff_sigma = " << p.rff_sigma << '\n'
       << "seed = " << p.seed << "\n\n[methods]\n";

    std::vector<std::string> pre, fine;
    for (const MethodSpec& m : c.methods) {
        switch (m.kind) {
        case MethodSpec::Kind::Plain: os << "plain = true\n"; break;
        case MethodSpec::Kind::Identity: os << "identity = true\n"; break;
        case MethodSpec::Kind::Preconditioned: pre.push_back(real_text(m.gamma)); break;
        case MethodSpec::Kind::FineTuned:
            fine.push_back(real_text(m.gamma) + ":" + real_text(m.tau));
            break;
        }
    }
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
        return s;
    };
    if (!pre.empty()) os << "preconditioned = " << join(pre) << '\n';
    if (!fine.empty()) os << "fine_tuned = " << join(fine) << '\n';

    const SolveConfig& s = c.solver;
    os << "\n[solver]\n"
       << "sampler = " << to_string(s.sampler) << '\n'
       << "max_iters = " << s.max_iters << '\n'
       << "time_budget = " << s.time_budget_seconds << '\n'
       << "target_rel_error = " << s.target_rel_error << '\n';
    if (s.eval_every) os << "eval_every = " << *s.eval_every << '\n';
    os << "clock = " << to_string(s.clock) << "\n\n[run]\nseeds = ";
    for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? ", " : "") << c.seeds[i];
    os << "\noutput = " << c.output.string() << "\nthreads = " << c.threads << '\n';
    return os.str();
}

GeneratedProblem build_problem(const ProblemSpec& spec) {
    RngStream rng(spec.seed, 0);
    if (spec.kind == "random") {
        GeneratedProblem p = gen_random_conditioned(spec.m, spec.n, spec.cond, rng);
        if (spec.noise > 0.0) {
            RngStream noise_rng(spec.seed, 1);
            p = add_noise(std::move(p), spec.noise, noise_rng);
        }
        return p;
    }
    if (spec.kind == "tomo")
        return gen_parallel_tomo(spec.q, spec.angles, spec.rays.value_or(default_ray_count(spec.q)));
    if (spec.kind == "rff") return gen_rff_problem(spec.m, spec.d, spec.rff_sigma, rng);
    throw ConfigError("unknown problem kind '" + spec.kind + "'");
}

std::vector<RunSummary> run_experiment(const ExperimentConfig& config) {
    std::filesystem::path out_dir = config.output;
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') out_dir = env;
    std::filesystem::create_directories(out_dir);

    const GeneratedProblem problem = build_problem(config.problem);
    const DenseRowSource source = problem.source();
    Reference reference;
    if (problem.x_star) reference.x_star = *problem.x_star;
    reference.residual = [&problem](std::span<const double> x) { return problem.relative_residual(x); };

    struct Task {
        const MethodSpec* method;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (std::uint64_t seed : config.seeds)
        for (const MethodSpec& m : config.methods) tasks.push_back({&m, seed});

    std::vector<RunSummary> summaries(tasks.size());
    auto run_task = [&](std::size_t k) {
        const Task& task = tasks[k];
        RunSummary& s = summaries[k];
        s.method = task.method->label();
        s.gamma = task.method->gamma;
        s.tau = task.method->tau;
        s.seed = task.seed;
        s.trace_file = s.method + "_seed" + std::to_string(task.seed) + ".csv";
        SolveConfig solve = config.solver;
        solve.seed = task.seed;
        try {
            const SolveResult result = [&]() -> SolveResult {
                switch (task.method->kind) {
                case MethodSpec::Kind::Identity:
                    return preconditioned_kaczmarz_solve(
                        source, SketchedPreconditioner::identity(source.col_count()), solve, reference);
                case MethodSpec::Kind::Preconditioned: {
                    RngStream sketch_rng(task.seed, kSketchStream);
                    const SketchedPreconditioner p =
                        build_sketched_preconditioner(source, task.method->gamma, sketch_rng);
                    return preconditioned_kaczmarz_solve(source, p, solve, reference);
                }
                case MethodSpec::Kind::FineTuned:
                    return fine_tuned_solve(source, task.method->gamma, task.method->tau, solve,
                                            reference);
                case MethodSpec::Kind::Plain:
                    break;
                }
                return kaczmarz_solve(source, solve, reference);
            }();
            auto out = open_out(out_dir / s.trace_file);
            write_trace_csv(out, result.trace);
            if (!out) throw IoError("failed writing " + s.trace_file);

            s.status = std::string(to_string(result.status));
            const TraceRecord& last = result.trace.back();
            s.iterations = last.iter;
            s.final_rel_error = last.rel_error;
            s.final_residual = last.residual;
            s.elapsed_seconds = last.elapsed_seconds;
            if (result.preconditioner) {
                s.build_seconds = result.preconditioner->build_seconds;
                s.used_pseudoinverse = result.preconditioner->used_pseudoinverse;
            }
        } catch (const std::exception& ex) {
            s.status = "error";
            s.error = ex.what();
        }
    };

    const std::size_t workers = std::min(config.threads, tasks.size());
    if (workers <= 1) {
        for (std::size_t k = 0; k < tasks.size(); ++k) run_task(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < tasks.size(); k = next++) run_task(k);
            });
    }

    auto summary = open_out(out_dir / "summary.csv");
    summary << std::setprecision(17)
            << "method,gamma,tau,seed,status,iterations,final_rel_error,final_residual,"
               "elapsed_seconds,build_seconds,used_pseudoinverse,trace_file,error\n";
    for (const RunSummary& s : summaries) {
        std::string error = s.error;
        std::replace(error.begin(), error.end(), ',', ';');
        std::replace(error.begin(), error.end(), '\n', ' ');
        summary << s.method << ',' << s.gamma << ',' << s.tau << ',' << s.seed << ',' << s.status
                << ',' << s.iterations << ',';
        write_optional(summary, s.final_rel_error);
        summary << ',';
        write_optional(summary, s.final_residual);
        summary << ',' << s.elapsed_seconds << ',' << s.build_seconds << ','
                << (s.used_pseudoinverse ? "true" : "false") << ',' << s.trace_file << ',' << error
                << '\n';
    }
    if (!summary) throw IoError("failed writing summary.csv");

    auto manifest = open_out(out_dir / "manifest.txt");
    manifest << "# preckacz " << kVersion << "\n" << format_experiment_config(config) << "\n[problem_metadata]\n";
    manifest << "rows = " << problem.a.rows() << "\ncols = " << problem.a.cols() << '\n';
    for (const auto& [k, v] : problem.metadata) manifest << k << " = " << v << '\n';
    if (!manifest) throw IoError("failed writing manifest.txt");
    return summaries;
}

CompareReport compare_traces(const std::filesystem::path& dir, std::size_t checkpoint_count) {
    CompareReport report;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv" &&
            entry.path().filename() != "summary.csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<std::vector<TraceRecord>> traces;
    for (const auto& f : files) {
        std::ifstream in(f);
        try {
            auto t = read_trace_csv(in);
            if (t.empty()) throw IoError("no records");
            traces.push_back(std::move(t));
            report.names.push_back(f.filename().string());
        } catch (const std::exception& ex) {
            report.warnings.push_back(f.filename().string() + ": " + ex.what());
        }
    }
    if (traces.empty()) return report;

    const bool use_rel = std::all_of(traces.begin(), traces.end(), [](const auto& t) {
        return std::all_of(t.begin(), t.end(), [](const TraceRecord& r) { return r.rel_error.has_value(); });
    });
    report.metric = use_rel ? "rel_error" : "residual";

    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& t : traces) {
        lo = std::max(lo, t.front().elapsed_seconds);
        hi = std::min(hi, t.back().elapsed_seconds);
    }
    if (lo <= hi) {
        const std::size_t count = std::max<std::size_t>(checkpoint_count, 1);
        for (std::size_t k = 0; k < count; ++k) {
            const double frac = count == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(count - 1);
            report.checkpoints.push_back(lo + frac * (hi - lo));
        }
    } else {
        report.warnings.push_back("traces have no common time range; no checkpoints");
    }
    for (const auto& t : traces) {
        std::vector<std::optional<double>> row;
        for (double c : report.checkpoints) row.push_back(value_at(t, use_rel, c));
        report.values.push_back(std::move(row));
    }

    // Crossings: earliest common time at which a run is strictly below plain.
    for (std::size_t i = 0; i < traces.size(); ++i) {
        if (report.names[i].rfind("plain", 0) == 0) continue;
        std::optional<std::size_t> base;
        for (std::size_t j = 0; j < traces.size(); ++j) {
            if (report.names[j].rfind("plain", 0) != 0) continue;
            if (!base) base = j;
            if (seed_suffix(report.names[j]) == seed_suffix(report.names[i])) {
                base = j;
                break;
            }
        }
        if (!base) continue;
        const auto& a = traces[i];
        const auto& b = traces[*base];
        const double t_lo = std::max(a.front().elapsed_seconds, b.front().elapsed_seconds);
        const double t_hi = std::min(a.back().elapsed_seconds, b.back().elapsed_seconds);
        std::vector<double> times;
        for (const auto* t : {&a, &b})
            for (const TraceRecord& r : *t)
                if (r.elapsed_seconds >= t_lo && r.elapsed_seconds <= t_hi) times.push_back(r.elapsed_seconds);
        std::sort(times.begin(), times.end());
        CompareReport::Crossing crossing{report.names[i], report.names[*base], std::nullopt};
        for (double t : times) {
            const auto va = value_at(a, use_rel, t);
            const auto vb = value_at(b, use_rel, t);
            if (va && vb && *va < *vb) {
                crossing.time = t;
                break;
            }
        }
        report.crossings.push_back(crossing);
    }
    return report;
}

void print_report(std::ostream& out, const CompareReport& report) {
    const auto old_flags = out.flags();
    const auto old_precision = out.precision();
    for (const auto& w : report.warnings) out << "warning: " << w << '\n';
    if (report.names.empty()) {
        out << "no readable traces\n";
        return;
    }
    std::size_t width = 5;
    for (const auto& n : report.names) width = std::max(width, n.size());
    out << "metric: " << report.metric << "\n";
    out << std::left << std::setw(static_cast<int>(width)) << "trace";
    out << std::scientific << std::setprecision(3);
    for (double c : report.checkpoints) out << "  t=" << std::setw(10) << c;
    out << '\n';
    for (std::size_t i = 0; i < report.names.size(); ++i) {
        out << std::setw(static_cast<int>(width)) << report.names[i];
        for (const auto& v : report.values[i]) {
            out << "    ";
            if (v) out << std::setw(10) << *v;
            else out << std::setw(10) << "-";
        }
        out << '\n';
    }
    if (!report.crossings.empty()) {
        out << "crossings below plain:\n";
        for (const auto& c : report.crossings) {
            out << "  " << c.run << " vs " << c.baseline << ": ";
            if (c.time) out << "t=" << *c.time << '\n';
            else out << "never\n";
        }
    }
    out.flags(old_flags);
    out.precision(old_precision);
}

} // namespace preckacz
