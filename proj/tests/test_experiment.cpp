#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "preckacz/experiment.hpp"
#include "test_support.hpp"

using namespace preckacz;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_config(in, "test.conf");
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

const char* kSmallRun = R"(
[problem]
kind = random
m = 120
n = 8
cond = 1e3
seed = 4

[methods]
plain = true
identity = true
preconditioned = 2
fine_tuned = 2:0.0002

[solver]
max_iters = 100000
time_budget = 0.001
target_rel_error = 0
eval_every = 120
clock = work

[run]
seeds = 1, 2
)";

} // namespace

TEST_CASE("config parsing fills every section") {
    const ExperimentConfig c = parse(R"(
# comment line
[problem]
kind = tomo   # trailing comment
q = 12
angles = 20
rays = 17

[methods]
plain = true
identity = false
preconditioned = 1, 2.5
fine_tuned = 2:0.5, 3:1

[solver]
sampler = squared_norm
max_iters = 5000
time_budget = 2
target_rel_error = 1e-8
clock = work

[run]
seeds = 3, 5, 8
output = out/dir
threads = 2
)");
    CHECK(c.problem.kind == "tomo");
    CHECK(c.problem.q == 12);
    CHECK(c.problem.angles == 20);
    CHECK(*c.problem.rays == 17);
    REQUIRE(c.methods.size() == 5);
    CHECK(c.methods[0].label() == "plain");
    CHECK(c.methods[1].label() == "precond_g1");
    CHECK(c.methods[2].label() == "precond_g2.5");
    CHECK(c.methods[3].label() == "finetune_g2_tau0.5");
    CHECK(c.solver.sampler == SamplerKind::SquaredNorm);
    CHECK(c.solver.max_iters == 5000);
    CHECK(c.solver.time_budget_seconds == 2.0);
    CHECK(c.solver.clock == ClockKind::Work);
    CHECK(c.seeds == std::vector<std::uint64_t>{3, 5, 8});
    CHECK(c.output == std::filesystem::path("out/dir"));
    CHECK(c.threads == 2);
}

TEST_CASE("formatted config parses back to the same config") {
    const ExperimentConfig c = parse(kSmallRun);
    const std::string text = format_experiment_config(c);
    const ExperimentConfig back = parse(text);
    CHECK(format_experiment_config(back) == text);
    CHECK(back.methods.size() == c.methods.size());
    CHECK(back.solver.eval_every == c.solver.eval_every);
}

TEST_CASE("config errors name the line and field") {
    CHECK(error_of("[problem]\nm = -5\n[methods]\nplain = true\n").find("test.conf:2: field 'problem.m'") !=
          std::string::npos);
    CHECK(error_of("[problem]\nkind = spiral\n[methods]\nplain = true\n").find("problem.kind") !=
          std::string::npos);
    CHECK(error_of("[problem]\nbogus = 1\n[methods]\nplain = true\n").find("unknown key") !=
          std::string::npos);
    CHECK(error_of("[methods]\npreconditioned = 0.5\n").find("gamma must be >= 1") != std::string::npos);
    CHECK(error_of("[methods]\nplain = maybe\n").find("true or false") != std::string::npos);
    CHECK(error_of("[methods]\nfine_tuned = 2\n").find("gamma:tau") != std::string::npos);
    CHECK(error_of("[nowhere]\nx = 1\n").find("unknown section") != std::string::npos);
    CHECK(error_of("plain = true\n").find("outside of any") != std::string::npos);
    CHECK(error_of("[methods]\nplain\n").find("key = value") != std::string::npos);
    CHECK(error_of("[methods]\nplain = true\n[solver]\nclock = sundial\n").find("solver.clock") !=
          std::string::npos);
    CHECK(error_of("[methods]\nplain = true\n[solver]\nmax_iters = 0\n").find("max_iters") !=
          std::string::npos);
}

TEST_CASE("an empty method list is rejected") {
    CHECK(error_of("[problem]\nm = 100\n").find("at least one method") != std::string::npos);
    CHECK(error_of("[methods]\nplain = false\n").find("at least one method") != std::string::npos);
}

TEST_CASE("fine-tuning tau must lie inside the budget") {
    CHECK(error_of("[methods]\nfine_tuned = 2:5\n[solver]\ntime_budget = 5\n").find("below the time budget") !=
          std::string::npos);
}

TEST_CASE("problem spec parsing ignores other sections") {
    std::istringstream in("[problem]\nkind = rff\nm = 400\nd = 10\n[methods]\nwhatever = 1\n");
    const ProblemSpec p = parse_problem_spec(in);
    CHECK(p.kind == "rff");
    CHECK(p.d == 10);
    const GeneratedProblem g = build_problem(p);
    CHECK(g.a.rows() == 400);
    CHECK(g.a.cols() == 20);
}

TEST_CASE("experiment writes traces, summary and manifest deterministically") {
    ExperimentConfig c = parse(kSmallRun);
    const auto first = test_support::scratch_dir("run_a");
    const auto second = test_support::scratch_dir("run_b");
    c.output = first;
    const auto summaries = run_experiment(c);
    REQUIRE(summaries.size() == 8);
    for (const RunSummary& s : summaries) {
        CHECK(s.error.empty());
        CHECK(std::filesystem::exists(first / s.trace_file));
    }
    CHECK(std::filesystem::exists(first / "summary.csv"));
    CHECK(std::filesystem::exists(first / "manifest.txt"));

    // The identity preconditioner is indistinguishable from plain Kaczmarz.
    CHECK(slurp(first / "plain_seed1.csv") == slurp(first / "identity_seed1.csv"));
    CHECK(slurp(first / "plain_seed1.csv") != slurp(first / "plain_seed2.csv"));

    // Under the work clock a rerun is byte-identical, including threaded runs.
    c.output = second;
    c.threads = 3;
    run_experiment(c);
    for (const RunSummary& s : summaries) CHECK(slurp(first / s.trace_file) == slurp(second / s.trace_file));
    CHECK(slurp(first / "summary.csv") == slurp(second / "summary.csv"));
}

TEST_CASE("a sketch larger than the matrix is clamped to every row") {
    ExperimentConfig c = parse(R"(
[problem]
kind = random
m = 40
n = 40
cond = 10
[methods]
plain = true
preconditioned = 2
[solver]
max_iters = 100
clock = work
)");
    c.output = test_support::scratch_dir("run_err");
    const auto summaries = run_experiment(c);
    REQUIRE(summaries.size() == 2);
    CHECK(summaries[0].status == "iter_budget");
    // gamma = 2 asks for 80 rows of 40; the sketch takes all of them.
    CHECK(summaries[1].error.empty());
}

TEST_CASE("output directory can be overridden from the environment") {
    ExperimentConfig c = parse(kSmallRun);
    c.methods.resize(1);
    c.seeds = {1};
    c.output = "/nonexistent/should/not/be/used";
    const auto dir = test_support::scratch_dir("env_out");
    ::setenv(kOutputDirEnv, dir.c_str(), 1);
    run_experiment(c);
    ::unsetenv(kOutputDirEnv);
    CHECK(std::filesystem::exists(dir / "plain_seed1.csv"));
}

TEST_CASE("compare tabulates traces and finds crossings") {
    const auto dir = test_support::scratch_dir("compare");
    auto write = [&](const std::string& name, const std::vector<TraceRecord>& t) {
        std::ofstream out(dir / name);
        write_trace_csv(out, t);
    };
    write("plain_seed1.csv", {{0, 0.0, 1.0, 1.0}, {10, 1.0, 0.5, 0.5}, {20, 2.0, 0.4, 0.4}});
    write("precond_g2_seed1.csv", {{0, 0.5, 1.0, 1.0}, {10, 1.5, 0.3, 0.3}, {20, 2.5, 0.01, 0.01}});
    {
        std::ofstream junk(dir / "broken.csv");
        junk << "not,a,trace\n";
    }
    {
        std::ofstream summary(dir / "summary.csv");
        summary << "method\n";
    }
    const CompareReport r = compare_traces(dir, 3);
    CHECK(r.metric == "rel_error");
    REQUIRE(r.names.size() == 2);
    CHECK(r.warnings.size() == 1);
    // Checkpoints are restricted to the overlap [0.5, 2.0].
    REQUIRE(r.checkpoints.size() == 3);
    CHECK(r.checkpoints.front() == doctest::Approx(0.5));
    CHECK(r.checkpoints.back() == doctest::Approx(2.0));
    REQUIRE(r.crossings.size() == 1);
    CHECK(r.crossings[0].baseline == "plain_seed1.csv");
    REQUIRE(r.crossings[0].time.has_value());
    CHECK(*r.crossings[0].time == doctest::Approx(1.5));

    std::ostringstream os;
    print_report(os, r);
    CHECK(os.str().find("crossings below plain") != std::string::npos);
}

TEST_CASE("compare handles a single trace and disjoint ranges") {
    const auto dir = test_support::scratch_dir("compare_edge");
    {
        std::ofstream out(dir / "plain_seed1.csv");
        write_trace_csv(out, std::vector<TraceRecord>{{0, 0.0, std::nullopt, 1.0}, {5, 1.0, std::nullopt, 0.1}});
    }
    CompareReport single = compare_traces(dir, 4);
    CHECK(single.metric == "residual");
    CHECK(single.checkpoints.size() == 4);
    CHECK(single.crossings.empty());

    {
        std::ofstream out(dir / "precond_g2_seed1.csv");
        write_trace_csv(out, std::vector<TraceRecord>{{0, 5.0, std::nullopt, 1.0}, {5, 6.0, std::nullopt, 0.1}});
    }
    CompareReport disjoint = compare_traces(dir, 4);
    CHECK(disjoint.checkpoints.empty());
    CHECK_FALSE(disjoint.warnings.empty());
    REQUIRE(disjoint.crossings.size() == 1);
    CHECK_FALSE(disjoint.crossings[0].time.has_value());
}
