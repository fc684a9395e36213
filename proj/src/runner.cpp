#include "ldlab/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ldlab/convex.hpp"
#include "ldlab/estimators.hpp"
#include "ldlab/rng.hpp"
#include "ldlab/version.hpp"

namespace ldlab {

namespace {

using OrderedJson = nlohmann::ordered_json;

const std::set<std::string> kCommands = {
    "pressure",       "entropy",           "conjugate",
    "check-duality",  "check-decoupling",  "check-subadditive",
    "check-local-control", "fekete-demo",  "largest-term-demo",
};

std::string fmt_g(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_full_double(const std::string& tok, double& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

// A typed result cell; CSV formatting is %.17g for reals so runs with equal
// inputs compare byte-identical.
struct Cell {
    enum class T { real, integer, boolean, text } t = T::text;
    double d = 0.0;
    long long i = 0;
    bool b = false;
    std::string s;

    static Cell real(double v) { Cell c; c.t = T::real; c.d = v; return c; }
    static Cell integer(long long v) { Cell c; c.t = T::integer; c.i = v; return c; }
    static Cell boolean(bool v) { Cell c; c.t = T::boolean; c.b = v; return c; }
    static Cell text(std::string v) { Cell c; c.t = T::text; c.s = std::move(v); return c; }

    std::string csv() const {
        switch (t) {
            case T::real: return fmt_g(d);
            case T::integer: return std::to_string(i);
            case T::boolean: return b ? "true" : "false";
            case T::text: {
                if (s.find_first_of(",\"\n") == std::string::npos) return s;
                std::string quoted = "\"";
                for (char c : s) {
                    if (c == '"') quoted += '"';
                    quoted += c;
                }
                quoted += '"';
                return quoted;
            }
        }
        return "";
    }

    OrderedJson json() const {
        switch (t) {
            case T::real:
                if (std::isnan(d) || std::isinf(d)) return fmt_g(d);
                return d;
            case T::integer: return i;
            case T::boolean: return b;
            case T::text: return s;
        }
        return nullptr;
    }
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

void write_table_csv(const Table& t, std::ostream& out) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
    out << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c].csv();
        out << "\n";
    }
}

void write_table_json(const Table& t, std::ostream& out) {
    OrderedJson arr = OrderedJson::array();
    for (const auto& row : t.rows) {
        OrderedJson obj = OrderedJson::object();
        for (std::size_t c = 0; c < row.size(); ++c) obj[t.columns[c]] = row[c].json();
        arr.push_back(std::move(obj));
    }
    out << arr.dump(2) << "\n";
}

Diagnostic make_diag(std::string field, std::string constraint, std::string offending = "") {
    return Diagnostic{std::move(field), std::move(constraint), std::move(offending)};
}

// ---------------------------------------------------------------------------
// typed config access helpers with range diagnostics
// ---------------------------------------------------------------------------

std::optional<long long> get_integer(const ExperimentConfig& config, const std::string& key,
                                     std::vector<Diagnostic>* diags) {
    const auto v = config.get_number(key);
    if (!v) return std::nullopt;
    if (!(std::floor(*v) == *v) || std::abs(*v) > 9.0e15) {
        if (diags) diags->push_back(make_diag(key, "must be an integer", fmt_g(*v)));
        return std::nullopt;
    }
    return static_cast<long long>(*v);
}

long long integer_or(const ExperimentConfig& config, const std::string& key, long long fallback) {
    const auto v = get_integer(config, key, nullptr);
    return v ? *v : fallback;
}

double number_or(const ExperimentConfig& config, const std::string& key, double fallback) {
    const auto v = config.get_number(key);
    return v ? *v : fallback;
}

void require_positive_integer(const ExperimentConfig& config, const std::string& key,
                              std::vector<Diagnostic>& diags) {
    if (!config.has(key)) return;
    const auto v = config.get_number(key);
    if (!v) {
        diags.push_back(make_diag(key, "must be a number", config.get_string(key).value_or("")));
        return;
    }
    if (std::floor(*v) != *v || *v < 1) {
        diags.push_back(make_diag(key, "must be a positive integer", fmt_g(*v)));
    }
}

void require_positive(const ExperimentConfig& config, const std::string& key,
                      std::vector<Diagnostic>& diags) {
    if (!config.has(key)) return;
    const auto v = config.get_number(key);
    if (!v || !(*v > 0.0)) {
        diags.push_back(make_diag(key, "must be a positive number",
                                  v ? fmt_g(*v) : config.get_string(key).value_or("")));
    }
}

// Builds a convex body from prefixed keys: {p}body selects the kind (ball,
// box, polytope, translate_ball, translate_box) and {p}radius /
// {p}halfwidths / {p}vertices / {p}shift supply the parameters.
std::optional<ConvexBody> parse_body(const ExperimentConfig& config, const std::string& prefix, int dim,
                                     std::vector<Diagnostic>& diags) {
    const std::string kind_key = prefix + "body";
    const auto kind = config.get_string(kind_key);
    if (!kind) {
        diags.push_back(make_diag(kind_key, "required (ball, box, polytope, translate_ball, translate_box)"));
        return std::nullopt;
    }
    try {
        if (*kind == "ball" || *kind == "translate_ball") {
            const auto r = config.get_number(prefix + "radius");
            if (!r) {
                diags.push_back(make_diag(prefix + "radius", "required for a ball body"));
                return std::nullopt;
            }
            ConvexBody base = ConvexBody::ball(dim, *r);
            if (*kind == "ball") return base;
            const auto shift = config.get_list(prefix + "shift");
            if (!shift || static_cast<int>(shift->size()) != dim) {
                diags.push_back(make_diag(prefix + "shift", "required, one number per dimension"));
                return std::nullopt;
            }
            return ConvexBody::translate(*shift, std::move(base));
        }
        if (*kind == "box" || *kind == "translate_box") {
            const auto w = config.get_list(prefix + "halfwidths");
            if (!w || static_cast<int>(w->size()) != dim) {
                diags.push_back(make_diag(prefix + "halfwidths", "required, one number per dimension"));
                return std::nullopt;
            }
            ConvexBody base = ConvexBody::box(*w);
            if (*kind == "box") return base;
            const auto shift = config.get_list(prefix + "shift");
            if (!shift || static_cast<int>(shift->size()) != dim) {
                diags.push_back(make_diag(prefix + "shift", "required, one number per dimension"));
                return std::nullopt;
            }
            return ConvexBody::translate(*shift, std::move(base));
        }
        if (*kind == "polytope") {
            const auto flat = config.get_list(prefix + "vertices");
            if (!flat || flat->empty() || flat->size() % static_cast<std::size_t>(dim) != 0) {
                diags.push_back(make_diag(prefix + "vertices",
                                          "required, row-major with one row per vertex"));
                return std::nullopt;
            }
            std::vector<std::vector<double>> verts;
            for (std::size_t i = 0; i < flat->size(); i += static_cast<std::size_t>(dim)) {
                verts.emplace_back(flat->begin() + static_cast<long>(i),
                                   flat->begin() + static_cast<long>(i) + dim);
            }
            return ConvexBody::polytope(dim, std::move(verts));
        }
    } catch (const std::invalid_argument& e) {
        diags.push_back(make_diag(kind_key, e.what()));
        return std::nullopt;
    }
    diags.push_back(make_diag(kind_key, "unknown body kind", *kind));
    return std::nullopt;
}

OrderedJson config_echo(const ExperimentConfig& config) {
    OrderedJson obj = OrderedJson::object();
    for (const auto& [key, value] : config.entries) {
        switch (value.type) {
            case ConfigValue::Type::string: obj[key] = value.str; break;
            case ConfigValue::Type::number: obj[key] = value.num; break;
            case ConfigValue::Type::list: obj[key] = value.list; break;
        }
    }
    return obj;
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::string rational_text(const Rational& r) {
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

struct CommandOutput {
    Table table;
    std::vector<std::string> summary;
    long long checks_passed = 0, checks_failed = 0, flags = 0;
};

Cell optional_real(const std::optional<double>& v) {
    return v ? Cell::real(*v) : Cell::text("");
}

// ---------------------------------------------------------------------------
// command implementations
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> scalar_or_vector_grid(const std::vector<double>& flat, int sd) {
    std::vector<std::vector<double>> grid;
    if (sd == 1) {
        for (double v : flat) grid.push_back({v});
    } else {
        grid.push_back(flat);
    }
    return grid;
}

CommandOutput run_pressure(const ModelPtr& model, const ExperimentConfig& config, long long N,
                           std::uint64_t seed) {
    CommandOutput out;
    const long long n = integer_or(config, "n", 16);
    const auto flat = config.get_list("lambda");
    if (!flat) throw std::invalid_argument("'lambda' must be a number or number list");
    const auto lambdas = scalar_or_vector_grid(*flat, model->state_dim());
    const auto ests = pressure_curve(*model, n, lambdas, N, seed);
    out.table.columns = {"n",         "lambda",        "pressure", "std_error",
                         "max_weight_fraction", "ess_warning", "oracle",   "finite_n_oracle"};
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        std::string ltxt;
        for (std::size_t a = 0; a < lambdas[i].size(); ++a) {
            ltxt += (a ? " " : "") + fmt_g(lambdas[i][a]);
        }
        const auto& est = ests[i];
        if (est.ess_warning) ++out.flags;
        out.table.add({Cell::integer(n), Cell::text(ltxt), Cell::real(est.value), Cell::real(est.std_error),
                       Cell::real(est.max_weight_fraction), Cell::boolean(est.ess_warning),
                       optional_real(model->pressure_oracle(lambdas[i])),
                       optional_real(model->finite_pressure_oracle(n, lambdas[i]))});
    }
    out.summary.push_back("pressure points: " + std::to_string(lambdas.size()) + " at n = " +
                          std::to_string(n) + ", replicas = " + std::to_string(N));
    if (out.flags > 0) {
        out.summary.push_back("warning: " + std::to_string(out.flags) +
                              " point(s) dominated by a single replica weight (>10%)");
    }
    return out;
}

CommandOutput run_entropy(const ModelPtr& model, const ExperimentConfig& config, long long N,
                          std::uint64_t seed) {
    CommandOutput out;
    const long long n = integer_or(config, "n", 16);
    const double eps = number_or(config, "eps", 0.05);
    const auto flat = config.get_list("x");
    if (!flat) throw std::invalid_argument("'x' must be a number or number list");
    const auto xs = scalar_or_vector_grid(*flat, model->state_dim());
    out.table.columns = {"n",    "x",       "eps",   "entropy",   "std_error",
                         "hits", "samples", "zero_hits", "oracle"};
    for (const auto& x : xs) {
        const auto est = entropy_estimate(*model, n, x, eps, N, seed);
        if (est.zero_hits) ++out.flags;
        std::string xtxt;
        for (std::size_t a = 0; a < x.size(); ++a) xtxt += (a ? " " : "") + fmt_g(x[a]);
        out.table.add({Cell::integer(n), Cell::text(xtxt), Cell::real(eps), Cell::real(est.value),
                       Cell::real(est.std_error), Cell::integer(est.hit_count), Cell::integer(est.samples),
                       Cell::boolean(est.zero_hits), optional_real(model->entropy_oracle(x))});
    }
    out.summary.push_back("entropy points: " + std::to_string(xs.size()) + " at n = " + std::to_string(n) +
                          ", eps = " + fmt_g(eps) + ", replicas = " + std::to_string(N));
    if (out.flags > 0) {
        out.summary.push_back("note: " + std::to_string(out.flags) +
                              " window(s) saw no hits; their estimate is -inf, not averaged");
    }
    return out;
}

CommandOutput run_conjugate(const ModelPtr& model, const ExperimentConfig& config, long long N,
                            std::uint64_t seed, std::vector<Diagnostic>& diags) {
    CommandOutput out;
    if (const auto input = config.get_string("input")) {
        GridFunction f = read_grid_csv_file(*input);
        GridFunction result;
        if (integer_or(config, "biconjugate", 0) == 1) {
            result = biconjugate(f);
            out.summary.push_back("biconjugate of " + *input + " on its own grid");
        } else {
            std::vector<std::vector<double>> dual;
            if (const auto d1 = config.get_list("dual_grid")) {
                dual.push_back(*d1);
            } else {
                for (int a = 0;; ++a) {
                    const auto da = config.get_list("dual_grid_" + std::to_string(a));
                    if (!da) break;
                    dual.push_back(*da);
                }
            }
            if (dual.empty()) dual = auto_dual_axes(f);
            if (static_cast<int>(dual.size()) != f.dimension()) {
                diags.push_back(make_diag("dual_grid", "needs one axis per input dimension"));
                return out;
            }
            result = legendre_transform(f, dual);
            out.summary.push_back("conjugate of " + *input + " on " + std::to_string(result.node_count()) +
                                  " dual nodes");
        }
        out.table.columns.clear();
        for (int a = 0; a < result.dimension(); ++a) out.table.columns.push_back("x" + std::to_string(a));
        out.table.columns.push_back("value");
        for (std::size_t i = 0; i < result.node_count(); ++i) {
            std::vector<Cell> row;
            for (double c : result.node(i)) row.push_back(Cell::real(c));
            row.push_back(Cell::real(result.values[i]));
            out.table.add(std::move(row));
        }
        return out;
    }
    // model route: conjugate the estimated pressure curve into an entropy table
    const long long n = integer_or(config, "n", 16);
    const auto lgrid = config.get_list("lambda_grid");
    const auto xgrid = config.get_list("x_grid");
    if (!lgrid || !xgrid) {
        diags.push_back(make_diag("lambda_grid", "lambda_grid and x_grid must be number lists"));
        return out;
    }
    if (model->state_dim() != 1) {
        diags.push_back(make_diag("model", "the conjugate route needs a scalar observable"));
        return out;
    }
    std::vector<std::vector<double>> lambdas;
    for (double l : *lgrid) lambdas.push_back({l});
    const auto ests = pressure_curve(*model, n, lambdas, N, seed);
    GridFunction phat;
    phat.axes = {*lgrid};
    for (const auto& est : ests) phat.values.push_back(est.value);
    const GridFunction conj = legendre_transform(phat, {*xgrid});
    out.table.columns = {"x", "entropy_from_conjugate", "entropy_oracle"};
    for (std::size_t i = 0; i < xgrid->size(); ++i) {
        out.table.add({Cell::real((*xgrid)[i]), Cell::real(-conj.values[i]),
                       optional_real(model->entropy_oracle({(*xgrid)[i]}))});
    }
    out.summary.push_back("entropy via the conjugate of the estimated pressure: n = " + std::to_string(n) +
                          ", " + std::to_string(lgrid->size()) + " lambda nodes, " +
                          std::to_string(xgrid->size()) + " x nodes");
    return out;
}

CommandOutput run_check_duality(const ModelPtr& model, const ExperimentConfig& config, long long N,
                                std::uint64_t seed) {
    CommandOutput out;
    const auto xg = config.get_list("x_grid");
    const auto lg = config.get_list("lambda_grid");
    const auto nlist = config.get_list("n_ladder");
    if (!xg || !lg || !nlist) {
        throw std::invalid_argument("'x_grid', 'lambda_grid', 'n_ladder' must be number lists");
    }
    const double eps = number_or(config, "eps", 0.05);
    std::vector<long long> ladder;
    for (double v : *nlist) ladder.push_back(static_cast<long long>(v));
    const DualityReport rep = duality_check(*model, *xg, *lg, ladder, eps, N, seed);
    out.table.columns = {"n",       "x",       "lambda",        "pressure", "pressure_sigma",
                         "entropy", "entropy_sigma", "margin",  "slack",    "tolerance",
                         "entropy_zero_hits", "pass"};
    for (const auto& row : rep.rows) {
        out.table.add({Cell::integer(row.n), Cell::real(row.x), Cell::real(row.lambda),
                       Cell::real(row.pressure), Cell::real(row.pressure_sigma), Cell::real(row.entropy),
                       Cell::real(row.entropy_sigma), Cell::real(row.margin), Cell::real(row.slack),
                       Cell::real(row.tolerance), Cell::boolean(row.entropy_zero_hits),
                       Cell::boolean(row.pass)});
        if (row.pass) ++out.checks_passed; else ++out.checks_failed;
        if (row.entropy_zero_hits) ++out.flags;
    }
    out.summary.push_back("duality rows: " + std::to_string(rep.rows.size()) + " (failed " +
                          std::to_string(rep.failed_rows) + ")");
    for (const auto& gap : rep.conjugate_gaps) {
        out.summary.push_back("n = " + std::to_string(gap.n) +
                              ": sup |conjugate - entropy| = " + fmt_g(gap.sup_gap_vs_entropy) + " over " +
                              std::to_string(gap.usable_points) + " points" +
                              (gap.sup_gap_vs_oracle >= 0.0
                                   ? ", vs oracle " + fmt_g(gap.sup_gap_vs_oracle)
                                   : ""));
    }
    if (rep.oracle_route_available) {
        if (rep.oracle_route_pass) ++out.checks_passed; else ++out.checks_failed;
        out.summary.push_back("oracle conjugate route: sup gap " + fmt_g(rep.oracle_route_gap) + " (tol " +
                              fmt_g(rep.oracle_route_tolerance) + ") " +
                              (rep.oracle_route_pass ? "PASS" : "FAIL"));
    }
    return out;
}

CommandOutput run_check_decoupling(const ModelPtr& model, const ExperimentConfig& config, long long N,
                                   std::uint64_t seed, std::vector<Diagnostic>& diags) {
    CommandOutput out;
    const long long m = integer_or(config, "m", 8);
    const long long gap = integer_or(config, "gap", 0);
    const auto body_a = parse_body(config, "a_", model->state_dim(), diags);
    const auto body_b = parse_body(config, "b_", model->state_dim(), diags);
    const auto center_a = config.get_list("a_center");
    const auto center_b = config.get_list("b_center");
    if (!body_a || !body_b) return out;
    if (!center_a || static_cast<int>(center_a->size()) != model->state_dim() || !center_b ||
        static_cast<int>(center_b->size()) != model->state_dim()) {
        diags.push_back(make_diag("a_center/b_center", "required, one number per state dimension"));
        return out;
    }
    const DecouplingResult res =
        decoupling_check(*model, m, gap, *body_a, *center_a, *body_b, *center_b, N, seed);
    out.table.columns = {"m",   "gap", "delta",  "sigma",  "c_declared", "p_a",       "p_b",
                         "p_ab", "hits_a", "hits_b", "hits_ab", "samples",   "degenerate", "pass"};
    out.table.add({Cell::integer(res.m), Cell::integer(res.gap), Cell::real(res.delta),
                   Cell::real(res.sigma), Cell::real(res.c_declared), Cell::real(res.p_a),
                   Cell::real(res.p_b), Cell::real(res.p_ab), Cell::integer(res.hits_a),
                   Cell::integer(res.hits_b), Cell::integer(res.hits_ab), Cell::integer(res.samples),
                   Cell::boolean(res.degenerate), Cell::boolean(res.pass)});
    if (res.pass) ++out.checks_passed; else ++out.checks_failed;
    if (res.degenerate) ++out.flags;
    out.summary.push_back("decoupling defect delta = " + fmt_g(res.delta) + " +- " + fmt_g(res.sigma) +
                          " against -c = " + fmt_g(-res.c_declared) + ": " + (res.pass ? "PASS" : "FAIL"));
    if (res.degenerate) {
        out.summary.push_back("note: an event saw no hits; the defect cannot be certified at this sample size");
    }
    return out;
}

CommandOutput run_check_subadditive(const ModelPtr& model, const ExperimentConfig& config, long long N,
                                    std::uint64_t seed, std::vector<Diagnostic>& diags) {
    CommandOutput out;
    const auto body = parse_body(config, "", model->state_dim(), diags);
    const auto x = config.get_list("x");
    if (!body) return out;
    if (!x || static_cast<int>(x->size()) != model->state_dim()) {
        diags.push_back(make_diag("x", "required, one number per state dimension"));
        return out;
    }
    const long long m = integer_or(config, "m", 8);
    const long long n = integer_or(config, "n", 32);
    const double eps = number_or(config, "eps", 0.05);
    const SubadditivityResult res = subadditivity_check(*model, *x, *body, eps, m, n, N, seed);
    out.table.columns = {"m",     "n",     "eps",       "rho",      "rho_exact", "t",
                         "alpha", "lhs",   "lhs_sigma", "inner",    "inner_sigma", "c_term",
                         "alpha_term", "rhs", "margin", "sigma",    "threshold_ok", "skipped",
                         "exact", "pass"};
    out.table.add({Cell::integer(res.m), Cell::integer(res.n), Cell::real(res.eps),
                   Cell::real(boost::rational_cast<double>(res.rho)), Cell::text(rational_text(res.rho)),
                   Cell::real(res.t), Cell::real(res.alpha), Cell::real(res.lhs.value),
                   Cell::real(res.lhs.std_error), Cell::real(res.inner.value),
                   Cell::real(res.inner.std_error), Cell::real(res.c_term), Cell::real(res.alpha_term),
                   Cell::real(res.rhs), Cell::real(res.margin), Cell::real(res.sigma),
                   Cell::boolean(res.threshold_ok), Cell::boolean(res.skipped), Cell::boolean(res.exact),
                   Cell::boolean(res.pass)});
    if (res.pass) ++out.checks_passed; else ++out.checks_failed;
    if (res.skipped) ++out.flags;
    out.summary.push_back("gapped-tiling bound at m = " + std::to_string(res.m) + ", n = " +
                          std::to_string(res.n) + ": margin = " + fmt_g(res.margin) + " (sigma " +
                          fmt_g(res.sigma) + "): " + (res.pass ? "PASS" : "FAIL"));
    if (!res.threshold_ok) {
        out.summary.push_back("note: window condition eps/rho >= t fails (eps = " + fmt_g(res.eps) +
                              ", rho = " + rational_text(res.rho) + ", t = " + fmt_g(res.t) + ")");
    }
    if (res.skipped) {
        out.summary.push_back("note: inner event saw no hits; the bound is vacuous at this sample size");
    }
    return out;
}

CommandOutput run_check_local_control(const ModelPtr& model, const ExperimentConfig& config, long long N,
                                      std::uint64_t seed, std::vector<Diagnostic>& diags) {
    CommandOutput out;
    const auto body = parse_body(config, "", model->state_dim(), diags);
    if (!body) return out;
    const LocalControlResult res = local_control_check(*model, *body, N, seed);
    out.table.columns = {"bin", "label", "count", "hits", "freq", "sigma", "exact", "pass"};
    for (const auto& bin : res.bins) {
        out.table.add({Cell::integer(bin.key), Cell::text(bin.label), Cell::integer(bin.count),
                       Cell::integer(bin.hits), Cell::real(bin.freq), Cell::real(bin.sigma),
                       optional_real(bin.exact), Cell::boolean(bin.pass)});
        if (bin.pass) ++out.checks_passed; else ++out.checks_failed;
    }
    out.flags += res.empty_bins;
    out.summary.push_back(std::string("local control ") +
                          (res.declared ? "declared (t = " + fmt_g(res.t) + ", alpha = " + fmt_g(res.alpha) + ")"
                                        : "not declared for this body (informational run)"));
    out.summary.push_back("bins: " + std::to_string(res.bins.size()) + ", min frequency " +
                          fmt_g(res.min_freq) + ", untested (thin) bins " + std::to_string(res.empty_bins) +
                          ": " + (res.pass ? "PASS" : "FAIL"));
    return out;
}

CommandOutput run_fekete(const ModelPtr& model, const ExperimentConfig& config, long long N,
                         std::uint64_t seed, std::vector<Diagnostic>& diags) {
    CommandOutput out;
    std::vector<double> u_values;
    bool exact = true;
    if (const auto listed = config.get_list("u")) {
        u_values = *listed;
        out.summary.push_back("explicit sequence of " + std::to_string(u_values.size()) + " values");
    } else {
        const long long n_max = integer_or(config, "n_max", 32);
        const auto body = parse_body(config, "", model->state_dim(), diags);
        const auto center = config.get_list("center");
        if (!body) return out;
        if (!center || static_cast<int>(center->size()) != model->state_dim()) {
            diags.push_back(make_diag("center", "required, one number per state dimension"));
            return out;
        }
        for (long long n = 1; n <= n_max; ++n) {
            const auto est = box_probability(*model, n, *body, *center, N, derive_seed(seed, 0xfe4eULL));
            exact = exact && est.exact;
            u_values.push_back(est.value > 0.0 ? -std::log(est.value)
                                               : std::numeric_limits<double>::infinity());
        }
        out.summary.push_back("u(n) = -log P(mean in event) for n = 1.." + std::to_string(n_max) +
                              (exact ? " (exact oracle)" : " (Monte Carlo)"));
    }
    const long long n_max = static_cast<long long>(u_values.size());
    if (n_max < 2) {
        diags.push_back(make_diag("u", "needs at least two values"));
        return out;
    }
    const FeketeResult res = fekete_limit([&](long long n) { return u_values[static_cast<std::size_t>(n - 1)]; },
                                          n_max);
    out.table.columns = {"n", "u", "ratio"};
    for (long long n = 1; n <= n_max; ++n) {
        const double u = u_values[static_cast<std::size_t>(n - 1)];
        out.table.add({Cell::integer(n), Cell::real(u), Cell::real(u / static_cast<double>(n))});
    }
    out.summary.push_back("inf u(n)/n = " + fmt_g(res.inf_ratio) + " at n = " + std::to_string(res.argmin_n) +
                          "; tail u(n_max)/n_max = " + fmt_g(res.tail_ratio));
    out.summary.push_back(std::string("subadditive: ") + (res.subadditive ? "yes" : "no") +
                          (res.subadditive
                               ? ""
                               : " (first violation at i = " + std::to_string(res.violation_i) +
                                     ", j = " + std::to_string(res.violation_j) + ")"));
    out.summary.push_back(res.controlled
                              ? "controlled: finite from n = " + std::to_string(res.controlled_from)
                              : "controlled: no (infinite values persist)");
    if (exact) {
        if (res.subadditive) ++out.checks_passed; else ++out.checks_failed;
    } else if (!res.subadditive) {
        ++out.flags;
        out.summary.push_back("note: subadditivity violated on noisy estimates; informational only");
    }
    return out;
}

CommandOutput run_largest_term(const ModelPtr& model, const ExperimentConfig& config, long long N,
                               std::uint64_t seed, std::vector<Diagnostic>& diags) {
    CommandOutput out;
    const long long n_max = integer_or(config, "n_max", 24);
    const double radius = number_or(config, "radius", 0.1);
    const auto centers = config.get_list("centers");
    if (model->dimension() != 1 || model->state_dim() != 1) {
        diags.push_back(make_diag("model", "this demo needs a one-dimensional scalar model"));
        return out;
    }
    if (!centers || centers->empty()) {
        diags.push_back(make_diag("centers", "required, one center per term"));
        return out;
    }
    const ConvexBody body = ConvexBody::ball(1, radius);
    std::vector<std::vector<double>> log_terms(centers->size());
    for (std::size_t i = 0; i < centers->size(); ++i) {
        for (long long n = 1; n <= n_max; ++n) {
            const auto est =
                box_probability(*model, n, body, {(*centers)[i]}, N, derive_seed(seed, 0x1a57ULL));
            log_terms[i].push_back(est.value > 0.0 ? std::log(est.value) / static_cast<double>(n)
                                                   : -std::numeric_limits<double>::infinity());
        }
    }
    const LargestTermResult res = largest_term(log_terms);
    out.table.columns = {"n"};
    for (std::size_t i = 0; i < centers->size(); ++i) {
        out.table.columns.push_back("a" + std::to_string(i) + "(center=" + fmt_g((*centers)[i]) + ")");
    }
    out.table.columns.push_back("max_term");
    out.table.columns.push_back("combined");
    out.table.columns.push_back("gap_bound");
    for (long long n = 1; n <= n_max; ++n) {
        std::vector<Cell> row{Cell::integer(n)};
        for (std::size_t i = 0; i < centers->size(); ++i) {
            row.push_back(Cell::real(log_terms[i][static_cast<std::size_t>(n - 1)]));
        }
        row.push_back(Cell::real(res.max_term[static_cast<std::size_t>(n - 1)]));
        row.push_back(Cell::real(res.combined[static_cast<std::size_t>(n - 1)]));
        row.push_back(Cell::real(res.gap_bound_at(n)));
        out.table.add(std::move(row));
    }
    if (res.identity_ok) ++out.checks_passed; else ++out.checks_failed;
    out.summary.push_back("terms: " + std::to_string(res.term_count) + ", n up to " + std::to_string(n_max));
    out.summary.push_back("combined rate within [max, max + log(r)/n] everywhere: " +
                          std::string(res.identity_ok ? "PASS" : "FAIL") +
                          " (worst excess " + fmt_g(res.worst_excess) + ")");
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// config access
// ---------------------------------------------------------------------------

bool ExperimentConfig::has(const std::string& key) const {
    for (const auto& [k, v] : entries) {
        if (k == key) return true;
    }
    return false;
}

std::optional<std::string> ExperimentConfig::get_string(const std::string& key) const {
    for (const auto& [k, v] : entries) {
        if (k == key) return v.str;
    }
    return std::nullopt;
}

std::optional<double> ExperimentConfig::get_number(const std::string& key) const {
    for (const auto& [k, v] : entries) {
        if (k != key) continue;
        if (v.type == ConfigValue::Type::number) return v.num;
        if (v.type == ConfigValue::Type::list && v.list.size() == 1) return v.list[0];
        return std::nullopt;
    }
    return std::nullopt;
}

std::optional<std::vector<double>> ExperimentConfig::get_list(const std::string& key) const {
    for (const auto& [k, v] : entries) {
        if (k != key) continue;
        if (v.type == ConfigValue::Type::list) return v.list;
        if (v.type == ConfigValue::Type::number) return std::vector<double>{v.num};
        return std::nullopt;
    }
    return std::nullopt;
}

std::string ExperimentConfig::command() const { return get_string("command").value_or(""); }

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const std::size_t eq = body.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected 'key = value'");
        }
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty() || key.find_first_of(" \t") != std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": malformed key");
        }
        if (value.empty()) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty value for '" +
                                        key + "'");
        }
        if (config.has(key)) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": duplicate key '" +
                                        key + "'");
        }
        // type the value: all-numeric tokens become a number or list
        std::istringstream tokens(value);
        std::vector<double> numbers;
        std::string tok;
        bool all_numeric = true;
        while (tokens >> tok) {
            double parsed = 0.0;
            if (!parse_full_double(tok, parsed)) {
                all_numeric = false;
                break;
            }
            numbers.push_back(parsed);
        }
        ConfigValue cv;
        cv.str = value;
        if (all_numeric && numbers.size() == 1) {
            cv.type = ConfigValue::Type::number;
            cv.num = numbers[0];
        } else if (all_numeric && numbers.size() > 1) {
            cv.type = ConfigValue::Type::list;
            cv.list = std::move(numbers);
        } else {
            cv.type = ConfigValue::Type::string;
        }
        config.entries.emplace_back(key, std::move(cv));
    }
    return config;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::string Diagnostic::render() const {
    std::string msg = "config error: '" + field + "': " + constraint;
    if (!offending.empty()) msg += " (got '" + offending + "')";
    return msg;
}

std::vector<Diagnostic> validate(const ExperimentConfig& config) {
    std::vector<Diagnostic> diags;
    const std::string cmd = config.command();
    if (cmd.empty()) {
        diags.push_back(make_diag("command", "required"));
        return diags;
    }
    if (!kCommands.count(cmd)) {
        diags.push_back(make_diag("command", "unknown command", cmd));
        return diags;
    }
    static const std::map<std::string, std::vector<std::string>> kRequired = {
        {"pressure", {"model", "lambda"}},
        {"entropy", {"model", "x"}},
        {"conjugate", {}},
        {"check-duality", {"model", "n_ladder", "x_grid", "lambda_grid"}},
        {"check-decoupling", {"model", "m", "a_body", "a_center", "b_body", "b_center"}},
        {"check-subadditive", {"model", "x", "body", "m", "n"}},
        {"check-local-control", {"model", "body"}},
        {"fekete-demo", {}},
        {"largest-term-demo", {"model", "centers", "n_max"}},
    };
    for (const auto& key : kRequired.at(cmd)) {
        if (!config.has(key)) diags.push_back(make_diag(key, "required for " + cmd));
    }
    if (cmd == "conjugate" && !config.has("input") &&
        !(config.has("model") && config.has("lambda_grid") && config.has("x_grid"))) {
        diags.push_back(make_diag("input", "conjugate needs 'input' or model + lambda_grid + x_grid"));
    }
    if (cmd == "fekete-demo" && !config.has("u") &&
        !(config.has("model") && config.has("body") && config.has("center"))) {
        diags.push_back(make_diag("u", "fekete-demo needs 'u' or model + body + center"));
    }
    for (const char* key : {"n", "m", "n_max", "replicas", "states", "burn_in", "thinning", "dim"}) {
        require_positive_integer(config, key, diags);
    }
    for (const char* key : {"eps", "radius", "a_radius", "b_radius", "var"}) {
        require_positive(config, key, diags);
    }
    if (config.has("seed")) {
        const auto v = config.get_number("seed");
        if (!v || std::floor(*v) != *v || *v < 0) {
            diags.push_back(make_diag("seed", "must be a nonnegative integer",
                                      v ? fmt_g(*v) : config.get_string("seed").value_or("")));
        }
    }
    if (config.has("m") && config.has("n")) {
        const auto m = get_integer(config, "m", nullptr);
        const auto n = get_integer(config, "n", nullptr);
        if (m && n && cmd == "check-subadditive" && *m > *n) {
            diags.push_back(make_diag("m", "must satisfy m <= n"));
        }
    }
    return diags;
}

ModelPtr model_from_config(const ExperimentConfig& config, std::vector<Diagnostic>& diags) {
    const auto name = config.get_string("model");
    if (!name) {
        diags.push_back(make_diag("model", "required"));
        return nullptr;
    }
    const int dim = static_cast<int>(integer_or(config, "dim", 1));
    try {
        if (*name == "bernoulli") return iid_model(BernoulliDist{number_or(config, "p", 0.5)}, dim);
        if (*name == "spin") return iid_model(SpinDist{number_or(config, "p", 0.5)}, dim);
        if (*name == "gaussian") {
            return iid_model(GaussianDist{number_or(config, "mean", 0.0), number_or(config, "var", 1.0)}, dim);
        }
        if (*name == "uniform") {
            return iid_model(UniformDist{number_or(config, "a", 0.0), number_or(config, "b", 1.0)}, dim);
        }
        if (*name == "ising1d") {
            return ising1d_model(number_or(config, "beta", 0.5), number_or(config, "h", 0.0));
        }
        if (*name == "ising2d") {
            return ising2d_model(number_or(config, "beta", 0.3),
                                 static_cast<int>(integer_or(config, "burn_in", 200)),
                                 static_cast<int>(integer_or(config, "thinning", 10)));
        }
        if (*name == "markov") {
            const auto k = get_integer(config, "states", &diags);
            const auto flat_t = config.get_list("transition");
            const auto flat_f = config.get_list("observable");
            const long long obs_dim = integer_or(config, "obs_dim", 1);
            if (!k || *k < 1) {
                diags.push_back(make_diag("states", "required positive integer for the markov model"));
                return nullptr;
            }
            if (!flat_t || static_cast<long long>(flat_t->size()) != *k * *k) {
                diags.push_back(make_diag("transition", "needs states^2 numbers, row-major"));
                return nullptr;
            }
            if (!flat_f || static_cast<long long>(flat_f->size()) != *k * obs_dim) {
                diags.push_back(make_diag("observable", "needs states * obs_dim numbers, row-major"));
                return nullptr;
            }
            std::vector<std::vector<double>> transition, observable;
            for (long long i = 0; i < *k; ++i) {
                transition.emplace_back(flat_t->begin() + i * *k, flat_t->begin() + (i + 1) * *k);
                observable.emplace_back(flat_f->begin() + i * obs_dim, flat_f->begin() + (i + 1) * obs_dim);
            }
            return markov_model(transition, observable);
        }
    } catch (const std::invalid_argument& e) {
        diags.push_back(make_diag("model", e.what()));
        return nullptr;
    }
    diags.push_back(make_diag("model", "unknown model", *name));
    return nullptr;
}

RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    RunOutcome outcome;
    outcome.diagnostics = validate(config);
    if (!outcome.diagnostics.empty()) {
        outcome.exit_code = 2;
        return outcome;
    }
    if (options.format != "csv" && options.format != "json") {
        outcome.diagnostics.push_back(make_diag("format", "must be csv or json", options.format));
        outcome.exit_code = 2;
        return outcome;
    }
    set_thread_count(options.threads);

    const std::string cmd = config.command();
    const std::uint64_t seed =
        options.seed_override.value_or(static_cast<std::uint64_t>(integer_or(config, "seed", 1)));
    const long long replicas = integer_or(config, "replicas", 10000);

    ModelPtr model;
    const bool needs_model =
        cmd != "conjugate" || config.has("model");
    const bool fekete_explicit = cmd == "fekete-demo" && config.has("u");
    if (needs_model && !(cmd == "conjugate" && config.has("input")) && !fekete_explicit) {
        model = model_from_config(config, outcome.diagnostics);
        if (!model) {
            outcome.exit_code = 2;
            return outcome;
        }
    }

    CommandOutput result;
    try {
        if (cmd == "pressure") {
            result = run_pressure(model, config, replicas, seed);
        } else if (cmd == "entropy") {
            result = run_entropy(model, config, replicas, seed);
        } else if (cmd == "conjugate") {
            result = run_conjugate(model, config, replicas, seed, outcome.diagnostics);
        } else if (cmd == "check-duality") {
            result = run_check_duality(model, config, replicas, seed);
        } else if (cmd == "check-decoupling") {
            result = run_check_decoupling(model, config, replicas, seed, outcome.diagnostics);
        } else if (cmd == "check-subadditive") {
            result = run_check_subadditive(model, config, replicas, seed, outcome.diagnostics);
        } else if (cmd == "check-local-control") {
            result = run_check_local_control(model, config, replicas, seed, outcome.diagnostics);
        } else if (cmd == "fekete-demo") {
            result = run_fekete(model, config, replicas, seed, outcome.diagnostics);
        } else if (cmd == "largest-term-demo") {
            result = run_largest_term(model, config, replicas, seed, outcome.diagnostics);
        }
    } catch (const std::invalid_argument& e) {
        outcome.diagnostics.push_back(make_diag(cmd, e.what()));
    } catch (const std::runtime_error& e) {
        outcome.error = e.what();
        outcome.exit_code = 3;
        return outcome;
    }
    if (!outcome.diagnostics.empty()) {
        outcome.exit_code = 2;
        return outcome;
    }
    outcome.checks_passed = result.checks_passed;
    outcome.checks_failed = result.checks_failed;
    outcome.flags = result.flags;

    // artifacts
    namespace fs = std::filesystem;
    try {
        fs::create_directories(options.out_dir);
        const std::string results_name = options.format == "csv" ? "results.csv" : "results.json";
        const fs::path results_path = fs::path(options.out_dir) / results_name;
        {
            std::ofstream out(results_path);
            if (!out) throw std::runtime_error("cannot write " + results_path.string());
            if (options.format == "csv") {
                write_table_csv(result.table, out);
            } else {
                write_table_json(result.table, out);
            }
        }
        outcome.files.push_back(results_path.string());

        const fs::path summary_path = fs::path(options.out_dir) / "summary.txt";
        {
            std::ofstream out(summary_path);
            if (!out) throw std::runtime_error("cannot write " + summary_path.string());
            out << "command: " << cmd << "\n";
            if (model) out << "model: " << model->name() << "\n";
            out << "seed: " << seed << "\n";
            for (const auto& line : result.summary) out << line << "\n";
            if (result.checks_passed + result.checks_failed > 0) {
                out << "checks: " << result.checks_passed << " passed, " << result.checks_failed
                    << " failed\n";
                out << "result: " << (result.checks_failed == 0 ? "PASS" : "FAIL") << "\n";
            }
        }
        outcome.files.push_back(summary_path.string());

        OrderedJson manifest = OrderedJson::object();
        manifest["version"] = kVersion;
        manifest["command"] = cmd;
        manifest["config"] = config_echo(config);
        manifest["options"] = {{"out_dir", options.out_dir},
                               {"format", options.format},
                               {"seed", seed},
                               {"threads", options.threads}};
        if (model) manifest["model"] = model->name();
        manifest["checks"] = {{"passed", result.checks_passed},
                              {"failed", result.checks_failed},
                              {"flags", result.flags}};
        manifest["files"] = outcome.files;
        manifest["generated_at"] = iso_timestamp();
        const fs::path manifest_path = fs::path(options.out_dir) / "manifest.json";
        {
            std::ofstream out(manifest_path);
            if (!out) throw std::runtime_error("cannot write " + manifest_path.string());
            out << manifest.dump(2) << "\n";
        }
        outcome.files.push_back(manifest_path.string());
    } catch (const std::exception& e) {
        outcome.error = e.what();
        outcome.exit_code = 3;
        return outcome;
    }

    outcome.exit_code = outcome.checks_failed > 0 ? 1 : 0;
    return outcome;
}

}  // namespace ldlab
