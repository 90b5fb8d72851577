// Experiment runner: run / compare / gen / phantom.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "preckacz/experiment.hpp"
#include "preckacz/problems.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

// A problem spec is either a config file or inline "key=value;key=value".
preckacz::ProblemSpec load_problem_spec(const std::string& spec) {
    if (std::filesystem::exists(spec)) {
        std::ifstream in(spec);
        return preckacz::parse_problem_spec(in, spec);
    }
    if (spec.find('=') == std::string::npos)
        throw preckacz::ConfigError("problem spec '" + spec + "' is neither a file nor key=value pairs");
    std::string text = "[problem]\n" + spec;
    for (char& c : text)
        if (c == ';') c = '\n';
    std::istringstream in(text);
    return preckacz::parse_problem_spec(in, "inline");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sketch-preconditioned randomized Kaczmarz experiments"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run an experiment config and write traces");
    run->add_option("config", config_path, "Experiment config file")->required();

    std::string trace_dir;
    auto* compare = app.add_subcommand("compare", "Tabulate traces at shared time checkpoints");
    compare->add_option("dir", trace_dir, "Directory with trace CSVs")->required();
    std::size_t checkpoints = 8;
    compare->add_option("--checkpoints", checkpoints, "Number of time checkpoints")
        ->check(CLI::PositiveNumber);

    std::string problem_spec;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "Export a generated problem");
    gen->add_option("problem", problem_spec,
                    "Config file with a [problem] section, or inline 'kind=tomo;q=16'")
        ->required();
    gen->add_option("--out", gen_out, "Output directory")->required();

    std::size_t phantom_q = 0;
    std::string phantom_out;
    auto* phantom = app.add_subcommand("phantom", "Write the Shepp-Logan phantom (.pgm or .csv)");
    phantom->add_option("--q", phantom_q, "Image side length")->required();
    phantom->add_option("--out", phantom_out, "Output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            const auto config = preckacz::load_experiment_config(config_path);
            const auto summaries = preckacz::run_experiment(config);
            int failures = 0;
            for (const auto& s : summaries) {
                if (!s.error.empty()) {
                    std::cerr << "run " << s.method << " seed " << s.seed << " failed: " << s.error << '\n';
                    ++failures;
                }
            }
            std::cout << summaries.size() - failures << '/' << summaries.size() << " runs completed\n";
            return failures == 0 ? kExitOk : kExitRuntime;
        }
        if (*compare) {
            const auto report = preckacz::compare_traces(trace_dir, checkpoints);
            preckacz::print_report(std::cout, report);
            return report.names.empty() ? kExitRuntime : kExitOk;
        }
        if (*gen) {
            const auto spec = load_problem_spec(problem_spec);
            const auto problem = preckacz::build_problem(spec);
            preckacz::export_problem(problem, gen_out);
            std::cout << "wrote " << problem.kind << " problem " << problem.a.rows() << 'x'
                      << problem.a.cols() << " to " << gen_out << '\n';
            return kExitOk;
        }
        if (*phantom) {
            const auto image = preckacz::shepp_logan_phantom(phantom_q);
            const std::filesystem::path out(phantom_out);
            if (out.extension() == ".csv") preckacz::write_image_csv(out, image.pixels);
            else preckacz::write_pgm(out, image);
            return kExitOk;
        }
    } catch (const preckacz::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const preckacz::InvalidArgument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
