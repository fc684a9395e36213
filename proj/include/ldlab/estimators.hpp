#pragma once
// Monte Carlo estimators for event probabilities, the entropy-type and
// pressure-type finite-box functionals, and empirical checks of the
// decoupling, local-control, subadditivity, and duality inequalities.
// Every estimate is a pure function of (inputs, seed); replica loops are
// parallelized over a fixed per-replica stream derivation so results are
// byte-identical for any thread count.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ldlab/convex.hpp"
#include "ldlab/fields.hpp"
#include "ldlab/lattice.hpp"

namespace ldlab {

// Global worker count for replica loops (default 1); never changes results.
void set_thread_count(int threads);
int thread_count();

struct EmpiricalEstimate {
    double value = 0.0;        // estimate; log-scale estimates are -inf on zero hits
    double std_error = 0.0;    // NaN when not defined (e.g. zero hits)
    long long samples = 0;
    long long hit_count = 0;   // for probability-type estimates
    bool exact = false;        // produced by a closed-form oracle
    bool zero_hits = false;
    bool ess_warning = false;          // a single replica dominates the sum
    double max_weight_fraction = 0.0;  // largest replica weight / total
};

// Mean of the configuration over `box` (compensated summation); box must lie
// inside the configuration's box.
std::vector<double> empirical_mean(const Configuration& config, const LatticeBox& box);
std::vector<double> empirical_mean(const Configuration& config);

// P(empirical mean of the side-n box lies in center + body). Uses the model's
// exact oracle when present (unless use_oracle = false); otherwise hit
// frequency over N replicas with a Wilson-interval standard error.
EmpiricalEstimate box_probability(const FieldModel& model, long long n, const ConvexBody& body,
                                  const std::vector<double>& center, long long N, std::uint64_t seed,
                                  bool use_oracle = true);

// (1/n^d) log P(mean in x + eps*ball), always Monte Carlo; zero hits yield
// value -inf with the flag set. Standard error (1/n^d) sqrt((1-p)/(p N)).
EmpiricalEstimate entropy_estimate(const FieldModel& model, long long n, const std::vector<double>& x,
                                   double eps, long long N, std::uint64_t seed);

// (1/n^d)(log sum_i exp(n^d <lambda, m_i>) - log N) with a jackknife standard
// error; flags a reliability warning when one replica weight exceeds 10% of
// the total. Replica streams depend on (seed, n, replica) only, so estimates
// at different lambda share samples (common random numbers).
EmpiricalEstimate pressure_estimate(const FieldModel& model, long long n, const std::vector<double>& lambda,
                                    long long N, std::uint64_t seed);

// Pressure estimates over a lambda grid from one shared sample set.
std::vector<EmpiricalEstimate> pressure_curve(const FieldModel& model, long long n,
                                              const std::vector<std::vector<double>>& lambdas, long long N,
                                              std::uint64_t seed);

// Product-bound defect for events on two side-m boxes separated by gap+1
// sites along the first axis: Delta = log P(A and B) - log P(A) - log P(B),
// estimated from common samples with an influence-function standard error.
// Pass criterion: Delta >= -c(m) - 3 sigma against the model's declared c.
struct DecouplingResult {
    double delta = 0.0;
    double sigma = 0.0;
    double p_a = 0.0, p_b = 0.0, p_ab = 0.0;
    long long hits_a = 0, hits_b = 0, hits_ab = 0;
    long long samples = 0;
    long long m = 0, gap = 0;
    double c_declared = 0.0;
    bool degenerate = false;  // some event had no hits
    bool pass = false;
};

DecouplingResult decoupling_check(const FieldModel& model, long long m, long long gap,
                                  const ConvexBody& body_a, const std::vector<double>& center_a,
                                  const ConvexBody& body_b, const std::vector<double>& center_b,
                                  long long N, std::uint64_t seed);

// Conditional frequencies of {site value in t*C} binned by the model's
// conditioning statistic, compared against the declared alpha.
struct LocalControlBin {
    long long key = 0;
    std::string label;
    long long count = 0;
    long long hits = 0;
    double freq = 0.0;
    double sigma = 0.0;
    std::optional<double> exact;  // model's exact conditional for this bin
    bool pass = true;
};

struct LocalControlResult {
    double t = 1.0;
    double alpha = 0.5;
    bool declared = false;  // false -> informational only, no pass criterion
    std::vector<LocalControlBin> bins;
    double min_freq = 0.0;
    long long empty_bins = 0;  // observed bins with too few samples to test
    bool pass = true;
};

LocalControlResult local_control_check(const FieldModel& model, const ConvexBody& body, long long N,
                                       std::uint64_t seed);

// Two-sided check of the gapped-tiling lower bound at (m, n):
//   (1/n^d) log P_n(x + (1+eps)C)
//     >= (1/m^d) log P_m(x + C) - c(m)/m^d + rho_{m,n} log alpha(B),
// with B = C and the local-control pair taken for the field shifted by x.
// Requires eps / rho_{m,n} >= t(B) (reported as threshold_ok); estimates use
// exact oracles when the model has them.
struct SubadditivityResult {
    EmpiricalEstimate lhs;        // (1/n^d) log P_n(x + (1+eps)C)
    EmpiricalEstimate inner;      // (1/m^d) log P_m(x + C)
    double c_term = 0.0;          // c(m)/m^d
    double alpha_term = 0.0;      // rho * log alpha
    double rhs = 0.0;
    double margin = 0.0;          // lhs - rhs
    double sigma = 0.0;           // combined statistical error
    Rational rho;
    double t = 1.0, alpha = 1.0;
    bool control_declared = false;
    bool threshold_ok = true;     // eps / rho >= t
    bool skipped = false;         // inner probability had no hits
    bool exact = false;           // both sides from oracles
    bool pass = false;
    long long m = 0, n = 0;
    double eps = 0.0;
};

SubadditivityResult subadditivity_check(const FieldModel& model, const std::vector<double>& x,
                                        const ConvexBody& body, double eps, long long m, long long n,
                                        long long N, std::uint64_t seed);

// Duality report: pressure and entropy ladders, the pointwise inequality
// p(lambda) - s(x) >= <lambda,x> (with the eps-window slack |lambda| eps), and
// the conjugate route -(p-hat)* compared against entropy estimates and oracles.
struct DualityRow {
    long long n = 0;
    double x = 0.0, lambda = 0.0;
    double pressure = 0.0, pressure_sigma = 0.0;
    double entropy = 0.0, entropy_sigma = 0.0;
    double margin = 0.0;  // pressure - entropy - lambda*x
    double slack = 0.0;   // |lambda| * eps
    double tolerance = 0.0;
    bool entropy_zero_hits = false;
    bool pass = true;
};

struct DualityConjugateGap {
    long long n = 0;
    double sup_gap_vs_entropy = 0.0;     // sup_x |(-p-hat*)(x) - s-hat(x)| over usable x
    double sup_gap_vs_oracle = -1.0;     // vs entropy oracle; -1 when unavailable
    long long usable_points = 0;
};

struct DualityReport {
    std::string model;
    std::vector<long long> n_ladder;
    std::vector<double> x_grid, lambda_grid;
    double eps = 0.05;
    std::uint64_t seed = 0;
    std::vector<DualityRow> rows;
    std::vector<DualityConjugateGap> conjugate_gaps;
    // Oracle-route check (exact pressure conjugated on the lambda grid vs the
    // exact entropy), when both oracles exist.
    bool oracle_route_available = false;
    double oracle_route_gap = 0.0;
    double oracle_route_tolerance = 2e-3;
    bool oracle_route_pass = true;
    long long failed_rows = 0;
    bool pass = true;
};

DualityReport duality_check(const FieldModel& model, const std::vector<double>& x_grid,
                            const std::vector<double>& lambda_grid, const std::vector<long long>& n_ladder,
                            double eps, long long N, std::uint64_t seed);

}  // namespace ldlab
