#pragma once
// Configuration-driven experiment runner: parses flat key = value experiment
// files, validates them, executes the requested command, and writes a result
// table (CSV or JSON), a JSON run manifest, and a human-readable summary.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ldlab/fields.hpp"

namespace ldlab {

struct ConfigValue {
    enum class Type { string, number, list };
    Type type = Type::string;
    std::string str;
    double num = 0.0;
    std::vector<double> list;
};

// One experiment: a command plus typed key = value entries (insertion order
// preserved for the manifest echo).
struct ExperimentConfig {
    std::vector<std::pair<std::string, ConfigValue>> entries;

    bool has(const std::string& key) const;
    std::optional<std::string> get_string(const std::string& key) const;
    std::optional<double> get_number(const std::string& key) const;
    // Numbers promote to one-element lists.
    std::optional<std::vector<double>> get_list(const std::string& key) const;
    std::string command() const;  // value of "command", empty if missing
};

// Parses the flat format: one "key = value" per line, '#' comments, values
// typed as number, number list (space separated), or string.
// Throws std::invalid_argument with a line diagnostic on malformed input.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);  // throws std::runtime_error on I/O

struct Diagnostic {
    std::string field;
    std::string constraint;
    std::string offending;
    std::string render() const;
};

// Empty iff the config is runnable.
std::vector<Diagnostic> validate(const ExperimentConfig& config);

// Builds the model described by the config ("model" plus parameter keys);
// nullptr with diagnostics on failure.
ModelPtr model_from_config(const ExperimentConfig& config, std::vector<Diagnostic>& diags);

struct RunOptions {
    std::string out_dir = "out";
    std::string format = "csv";  // csv | json
    std::optional<std::uint64_t> seed_override;
    int threads = 1;
};

struct RunOutcome {
    int exit_code = 0;  // 0 ok, 1 check failed, 2 config error, 3 I/O error
    std::vector<std::string> files;        // written artifacts
    std::vector<Diagnostic> diagnostics;   // non-empty on exit_code 2
    std::string error;                     // non-empty on exit_code 3
    long long checks_passed = 0, checks_failed = 0, flags = 0;
};

RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options);

}  // namespace ldlab
