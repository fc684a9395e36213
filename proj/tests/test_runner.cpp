// Experiment runner: config parsing and typing, validation diagnostics, model
// construction, and end-to-end runs with artifact checks in temp directories.
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldlab/estimators.hpp"
#include "ldlab/runner.hpp"

using namespace ldlab;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "ldlab_runner_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

bool has_diag(const std::vector<Diagnostic>& diags, const std::string& field) {
    for (const auto& d : diags) {
        if (d.field == field) return true;
    }
    return false;
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("config text parses into typed entries") {
    const ExperimentConfig cfg = parse_config_text(
        "# experiment\n"
        "command = pressure\n"
        "model = bernoulli\n"
        "p = 0.3   # success probability\n"
        "n = 16\n"
        "lambda = -1 0 1\n"
        "label = run one\n"
        "\n");
    CHECK(cfg.command() == "pressure");
    CHECK(cfg.entries.size() == 6);
    CHECK(cfg.entries[0].first == "command");  // insertion order kept
    CHECK(cfg.entries[3].first == "n");
    CHECK(cfg.get_number("p") == 0.3);
    CHECK(cfg.get_number("n") == 16.0);
    CHECK(cfg.get_list("lambda") == std::vector<double>{-1.0, 0.0, 1.0});
    CHECK(cfg.get_string("label") == "run one");  // mixed tokens stay a string
    CHECK(cfg.get_number("label") == std::nullopt);
    CHECK_FALSE(cfg.has("missing"));
    CHECK(cfg.get_number("missing") == std::nullopt);
    // promotions: scalars read as one-element lists, singleton lists as numbers
    CHECK(cfg.get_list("p") == std::vector<double>{0.3});
    CHECK(cfg.get_number("lambda") == std::nullopt);
    CHECK(parse_config_text("x = 4\n").command().empty());
}

TEST_CASE("malformed config lines are rejected with line numbers") {
    CHECK_THROWS_AS(parse_config_text("command pressure\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("n =\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("a b = 3\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("n = 1\nn = 2\n"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_text("n = 1\n= 2\n"),
                         doctest::Contains("line 2"), std::invalid_argument);
    // comment-only and blank lines are fine
    CHECK(parse_config_text("# nothing\n\n   \n").entries.empty());
}

TEST_CASE("validation reports missing and out-of-range keys") {
    CHECK(validate(parse_config_text("command = pressure\nmodel = bernoulli\nlambda = 0.5\n")).empty());

    CHECK(has_diag(validate(parse_config_text("model = bernoulli\n")), "command"));
    CHECK(has_diag(validate(parse_config_text("command = frobnicate\n")), "command"));
    CHECK(has_diag(validate(parse_config_text("command = pressure\nmodel = bernoulli\n")), "lambda"));
    CHECK(has_diag(validate(parse_config_text("command = entropy\nmodel = bernoulli\nx = 0.5\neps = 0\n")),
                   "eps"));
    CHECK(has_diag(validate(parse_config_text("command = entropy\nmodel = bernoulli\nx = 0.5\nn = 2.5\n")),
                   "n"));
    CHECK(has_diag(validate(parse_config_text("command = entropy\nmodel = bernoulli\nx = 0.5\nseed = -3\n")),
                   "seed"));
    CHECK(has_diag(validate(parse_config_text("command = entropy\nmodel = bernoulli\nx = 0.5\nseed = 0.5\n")),
                   "seed"));
    const auto sub = validate(parse_config_text(
        "command = check-subadditive\nmodel = bernoulli\nx = 0.5\nbody = ball\nradius = 0.1\n"
        "m = 20\nn = 10\n"));
    CHECK(has_diag(sub, "m"));

    const Diagnostic diag{"command", "unknown command", "frobnicate"};
    CHECK(diag.render() == "config error: 'command': unknown command (got 'frobnicate')");
}

TEST_CASE("models are built from config keys") {
    std::vector<Diagnostic> diags;
    const ModelPtr bern = model_from_config(
        parse_config_text("model = bernoulli\np = 0.3\ndim = 2\n"), diags);
    REQUIRE(bern != nullptr);
    CHECK(bern->dimension() == 2);
    CHECK(bern->state_dim() == 1);
    CHECK(bern->name().find("bernoulli") != std::string::npos);

    for (const char* text : {"model = spin\np = 0.6\n",
                             "model = gaussian\nmean = 1\nvar = 2\n",
                             "model = uniform\na = -1\nb = 2\n",
                             "model = ising1d\nbeta = 0.4\nh = 0.1\n",
                             "model = ising2d\nbeta = 0.3\nburn_in = 50\nthinning = 5\n"}) {
        diags.clear();
        CHECK(model_from_config(parse_config_text(text), diags) != nullptr);
        CHECK(diags.empty());
    }

    diags.clear();
    const ModelPtr markov = model_from_config(
        parse_config_text("model = markov\nstates = 2\ntransition = 0.7 0.3 0.4 0.6\n"
                          "observable = 1 0\n"),
        diags);
    REQUIRE(markov != nullptr);
    CHECK(markov->state_dim() == 1);

    diags.clear();
    CHECK(model_from_config(parse_config_text("model = laplace\n"), diags) == nullptr);
    CHECK(has_diag(diags, "model"));
    diags.clear();
    CHECK(model_from_config(parse_config_text("model = bernoulli\np = 1.5\n"), diags) == nullptr);
    CHECK(has_diag(diags, "model"));
    diags.clear();
    CHECK(model_from_config(parse_config_text("model = markov\nstates = 2\ntransition = 1 0 0\n"
                                              "observable = 1 0\n"),
                            diags) == nullptr);
    CHECK(has_diag(diags, "transition"));
}

TEST_CASE("pressure run writes results, summary, and manifest") {
    const ExperimentConfig cfg = parse_config_text(
        "command = pressure\nmodel = bernoulli\np = 0.3\nn = 16\n"
        "lambda = -1 0 1\nreplicas = 2000\nseed = 4\n");
    RunOptions opt;
    opt.out_dir = fresh_dir("pressure").string();
    const RunOutcome outcome = run_experiment(cfg, opt);
    REQUIRE(outcome.exit_code == 0);
    REQUIRE(outcome.files.size() == 3);
    CHECK(outcome.error.empty());

    const std::string csv = read_file(outcome.files[0]);
    CHECK(csv.rfind("n,lambda,pressure,std_error,max_weight_fraction,ess_warning,oracle,finite_n_oracle\n",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + one row per lambda

    const std::string summary = read_file(outcome.files[1]);
    CHECK(summary.find("command: pressure") != std::string::npos);
    CHECK(summary.find("seed: 4") != std::string::npos);

    const nlohmann::json manifest = nlohmann::json::parse(read_file(outcome.files[2]));
    CHECK(manifest["command"] == "pressure");
    CHECK(manifest["config"]["n"] == 16.0);
    CHECK(manifest["config"]["lambda"] == std::vector<double>{-1.0, 0.0, 1.0});
    CHECK(manifest["options"]["seed"] == 4);
    CHECK(manifest["options"]["threads"] == 1);
    CHECK(manifest["checks"]["failed"] == 0);
    CHECK(manifest.contains("generated_at"));

    // same config, fresh directory: the result table is byte-identical
    RunOptions opt2 = opt;
    opt2.out_dir = fresh_dir("pressure_again").string();
    const RunOutcome again = run_experiment(cfg, opt2);
    REQUIRE(again.exit_code == 0);
    CHECK(read_file(again.files[0]) == csv);

    // a seed override changes the numbers
    RunOptions opt3 = opt;
    opt3.out_dir = fresh_dir("pressure_reseeded").string();
    opt3.seed_override = 99;
    const RunOutcome reseeded = run_experiment(cfg, opt3);
    REQUIRE(reseeded.exit_code == 0);
    CHECK(read_file(reseeded.files[0]) != csv);

    // more worker threads, identical bytes
    RunOptions opt4 = opt;
    opt4.out_dir = fresh_dir("pressure_threads").string();
    opt4.threads = 4;
    const RunOutcome threaded = run_experiment(cfg, opt4);
    set_thread_count(1);
    REQUIRE(threaded.exit_code == 0);
    CHECK(read_file(threaded.files[0]) == csv);
}

TEST_CASE("json format emits a parsable results array") {
    const ExperimentConfig cfg = parse_config_text(
        "command = entropy\nmodel = bernoulli\np = 0.5\nn = 20\nx = 0.5 0.6\n"
        "eps = 0.05\nreplicas = 1000\nseed = 2\n");
    RunOptions opt;
    opt.out_dir = fresh_dir("entropy_json").string();
    opt.format = "json";
    const RunOutcome outcome = run_experiment(cfg, opt);
    REQUIRE(outcome.exit_code == 0);
    CHECK(outcome.files[0].find("results.json") != std::string::npos);
    const nlohmann::json rows = nlohmann::json::parse(read_file(outcome.files[0]));
    REQUIRE(rows.is_array());
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row.contains("entropy"));
        CHECK(row.contains("oracle"));
        CHECK(row["n"] == 20);
    }

    RunOptions bad = opt;
    bad.format = "xml";
    bad.out_dir = fresh_dir("entropy_badformat").string();
    CHECK(run_experiment(cfg, bad).exit_code == 2);
}

TEST_CASE("empty windows are surfaced as flags, not failures") {
    const ExperimentConfig cfg = parse_config_text(
        "command = entropy\nmodel = bernoulli\np = 0.5\nn = 30\nx = 0.999\n"
        "eps = 0.001\nreplicas = 50\nseed = 1\n");
    RunOptions opt;
    opt.out_dir = fresh_dir("entropy_zero").string();
    const RunOutcome outcome = run_experiment(cfg, opt);
    CHECK(outcome.exit_code == 0);
    CHECK(outcome.flags == 1);
    CHECK(read_file(outcome.files[0]).find("-inf") != std::string::npos);
}

TEST_CASE("check commands set the exit code from the verdict") {
    // the window condition eps/rho >= t fails at n = 45, so the check fails
    const ExperimentConfig failing = parse_config_text(
        "command = check-subadditive\nmodel = bernoulli\np = 0.5\nx = 0.5\n"
        "body = ball\nradius = 0.1\neps = 0.5\nm = 10\nn = 45\nreplicas = 200\nseed = 1\n");
    RunOptions opt;
    opt.out_dir = fresh_dir("subadd_fail").string();
    const RunOutcome bad = run_experiment(failing, opt);
    CHECK(bad.exit_code == 1);
    CHECK(bad.checks_failed == 1);
    CHECK(read_file(fs::path(opt.out_dir) / "summary.txt").find("FAIL") != std::string::npos);

    const ExperimentConfig passing = parse_config_text(
        "command = check-subadditive\nmodel = bernoulli\np = 0.5\nx = 0.5\n"
        "body = ball\nradius = 0.1\neps = 0.5\nm = 10\nn = 40\nreplicas = 200\nseed = 1\n");
    RunOptions opt2;
    opt2.out_dir = fresh_dir("subadd_pass").string();
    const RunOutcome good = run_experiment(passing, opt2);
    CHECK(good.exit_code == 0);
    CHECK(good.checks_passed == 1);
    const std::string csv = read_file(good.files[0]);
    CHECK(csv.rfind("m,n,eps,rho,rho_exact,t,alpha", 0) == 0);
    CHECK(csv.find("0/1") != std::string::npos);  // rho printed as an exact rational
}

TEST_CASE("demo commands run from explicit inputs") {
    const ExperimentConfig fekete = parse_config_text(
        "command = fekete-demo\nu = 1.5 3 4.5 6 7.5 9\n");
    RunOptions opt;
    opt.out_dir = fresh_dir("fekete").string();
    const RunOutcome fk = run_experiment(fekete, opt);
    CHECK(fk.exit_code == 0);
    CHECK(fk.checks_passed == 1);
    CHECK(read_file(fk.files[0]).rfind("n,u,ratio\n", 0) == 0);

    const ExperimentConfig largest = parse_config_text(
        "command = largest-term-demo\nmodel = bernoulli\np = 0.5\ncenters = 0.3 0.7\n"
        "n_max = 10\nradius = 0.1\nreplicas = 10\nseed = 1\n");
    RunOptions opt2;
    opt2.out_dir = fresh_dir("largest").string();
    const RunOutcome lt = run_experiment(largest, opt2);
    CHECK(lt.exit_code == 0);
    CHECK(lt.checks_passed == 1);

    const ExperimentConfig conj = parse_config_text(
        "command = conjugate\nmodel = bernoulli\np = 0.3\nn = 16\n"
        "lambda_grid = -2 -1.5 -1 -0.5 0 0.5 1 1.5 2\nx_grid = 0.2 0.3 0.4\n"
        "replicas = 2000\nseed = 3\n");
    RunOptions opt3;
    opt3.out_dir = fresh_dir("conjugate").string();
    const RunOutcome cj = run_experiment(conj, opt3);
    CHECK(cj.exit_code == 0);
    const std::string csv = read_file(cj.files[0]);
    CHECK(csv.rfind("x,entropy_from_conjugate,entropy_oracle\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("config and I/O problems map to exit codes 2 and 3") {
    RunOptions opt;
    opt.out_dir = fresh_dir("errors").string();

    const RunOutcome invalid = run_experiment(parse_config_text("command = pressure\n"), opt);
    CHECK(invalid.exit_code == 2);
    CHECK_FALSE(invalid.diagnostics.empty());
    CHECK(invalid.files.empty());

    // command-level argument errors surface as diagnostics too
    const RunOutcome badgrid = run_experiment(
        parse_config_text("command = check-duality\nmodel = bernoulli\nn_ladder = 8\n"
                          "x_grid = 0.4\nlambda_grid = 0.5\nreplicas = 100\n"),
        opt);
    CHECK(badgrid.exit_code == 2);

    const fs::path blocker = fresh_dir("blocked") / "file";
    std::ofstream(blocker) << "x";
    RunOptions blocked;
    blocked.out_dir = (blocker / "out").string();
    const RunOutcome io = run_experiment(
        parse_config_text("command = fekete-demo\nu = 1 2 3\n"), blocked);
    CHECK(io.exit_code == 3);
    CHECK_FALSE(io.error.empty());

    CHECK_THROWS_AS(load_config_file((fresh_dir("nofile") / "missing.cfg").string()),
                    std::runtime_error);
}

}  // TEST_SUITE
