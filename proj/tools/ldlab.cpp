// Command-line front end: each subcommand loads a flat key = value experiment
// file, runs it, and writes results, a summary, and a JSON manifest to the
// output directory. Exit codes: 0 success, 1 a check failed, 2 config error,
// 3 I/O error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ldlab/runner.hpp"
#include "ldlab/version.hpp"

namespace {

struct CliState {
    std::string config_path;
    std::string out_dir = "out";
    std::string format = "csv";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
};

int run_command(const std::string& name, const CliState& state) {
    ldlab::ExperimentConfig config;
    try {
        config = ldlab::load_config_file(state.config_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << e.what() << "\n";
        return 3;
    }
    const std::string declared = config.command();
    if (declared.empty()) {
        ldlab::ConfigValue cv;
        cv.type = ldlab::ConfigValue::Type::string;
        cv.str = name;
        config.entries.emplace_back("command", std::move(cv));
    } else if (declared != name) {
        std::cerr << "config error: 'command': file declares '" << declared << "' but the subcommand is '"
                  << name << "'\n";
        return 2;
    }
    ldlab::RunOptions options;
    options.out_dir = state.out_dir;
    options.format = state.format;
    if (state.seed_set) options.seed_override = state.seed;
    options.threads = state.threads;

    const ldlab::RunOutcome outcome = ldlab::run_experiment(config, options);
    for (const auto& diag : outcome.diagnostics) std::cerr << diag.render() << "\n";
    if (!outcome.error.empty()) std::cerr << "error: " << outcome.error << "\n";
    for (const auto& file : outcome.files) std::cout << "wrote " << file << "\n";
    if (outcome.checks_passed + outcome.checks_failed > 0) {
        std::cout << "checks: " << outcome.checks_passed << " passed, " << outcome.checks_failed
                  << " failed\n";
    }
    if (outcome.flags > 0) std::cout << "flags: " << outcome.flags << " (see summary.txt)\n";
    return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lattice large-deviations laboratory"};
    app.set_version_flag("--version", std::string(ldlab::kVersion));
    app.require_subcommand(1);

    CliState state;
    int exit_code = 0;

    const std::pair<const char*, const char*> commands[] = {
        {"pressure", "estimate the tilted log-moment functional on a lambda grid"},
        {"entropy", "estimate the entropy-type window functional at target means"},
        {"conjugate", "discrete Legendre-Fenchel transform of a grid file or estimated pressure"},
        {"check-duality", "pressure/entropy ladders and the conjugate duality checks"},
        {"check-decoupling", "product lower bound for events on two separated boxes"},
        {"check-subadditive", "gapped-tiling lower bound between two box sizes"},
        {"check-local-control", "conditional single-site mass against the declared floor"},
        {"fekete-demo", "subadditive sequence limit demo"},
        {"largest-term-demo", "largest-exponent rule for finite sums demo"},
    };
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", state.config_path, "experiment file (flat key = value)")
            ->required();
        sub->add_option("--out", state.out_dir, "output directory (default: out)");
        sub->add_option("--format", state.format, "results format: csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", state.seed, "override the config seed");
        sub->add_option("--threads", state.threads, "worker threads for replica loops")
            ->check(CLI::PositiveNumber);
        const std::string sub_name = name;
        sub->callback([&state, &exit_code, sub, sub_name]() {
            state.seed_set = sub->count("--seed") > 0;
            exit_code = run_command(sub_name, state);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are config errors
    }
    return exit_code;
}
