#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "preckacz/errors.hpp"
#include "preckacz/problems.hpp"
#include "preckacz/solver.hpp"

namespace preckacz {

inline constexpr std::string_view kVersion = "0.1.0";

/// Environment variable that overrides [run] output.
inline constexpr const char* kOutputDirEnv = "PRECKACZ_OUTPUT_DIR";

/// Configuration problem with a location: "config:12: field 'm': ...".
class ConfigError : public Error {
public:
    using Error::Error;
};

struct ProblemSpec {
    std::string kind = "random";  // random | tomo | rff
    std::size_t m = 2000;
    std::size_t n = 50;
    double cond = 1e5;
    double noise = 0.0;
    std::size_t q = 16;
    std::size_t angles = 36;
    std::optional<std::size_t> rays;
    std::size_t d = 5;
    double rff_sigma = 1.0;
    std::uint64_t seed = 1;
};

struct MethodSpec {
    enum class Kind { Plain, Identity, Preconditioned, FineTuned };
    Kind kind = Kind::Plain;
    double gamma = 1.0;
    double tau = 0.0;

    /// File-name friendly label, e.g. "precond_g2" or "finetune_g2_tau0.5".
    std::string label() const;
};

struct ExperimentConfig {
    ProblemSpec problem;
    std::vector<MethodSpec> methods;
    SolveConfig solver;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output = "results";
    std::size_t threads = 1;
};

/// Parses the sectioned `key = value` format. Throws ConfigError.
ExperimentConfig parse_experiment_config(std::istream& in, std::string_view origin = "config");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Only the [problem] section; other sections are ignored.
ProblemSpec parse_problem_spec(std::istream& in, std::string_view origin = "problem");

/// Canonical text form of a config; parsing it yields the same config.
std::string format_experiment_config(const ExperimentConfig& config);

GeneratedProblem build_problem(const ProblemSpec& spec);

struct RunSummary {
    std::string method;
    double gamma = 0.0;
    double tau = 0.0;
    std::uint64_t seed = 0;
    std::string status;
    std::size_t iterations = 0;
    std::optional<double> final_rel_error;
    std::optional<double> final_residual;
    double elapsed_seconds = 0.0;
    double build_seconds = 0.0;
    bool used_pseudoinverse = false;
    std::string trace_file;
    std::string error;
};

/// Runs every (method, seed) pair, writing one trace CSV per run plus
/// summary.csv and manifest.txt into config.output.
std::vector<RunSummary> run_experiment(const ExperimentConfig& config);

struct CompareReport {
    struct Crossing {
        std::string run;
        std::string baseline;
        std::optional<double> time;  // empty: never below the baseline
    };
    std::string metric;  // "rel_error" or "residual"
    std::vector<std::string> names;
    std::vector<double> checkpoints;
    std::vector<std::vector<std::optional<double>>> values;  // [trace][checkpoint]
    std::vector<Crossing> crossings;
    std::vector<std::string> warnings;
};

/// Loads all trace CSVs in `dir` (summary.csv excluded) and tabulates the
/// metric at shared time checkpoints inside the common time range.
CompareReport compare_traces(const std::filesystem::path& dir, std::size_t checkpoint_count = 8);
void print_report(std::ostream& out, const CompareReport& report);

} // namespace preckacz
