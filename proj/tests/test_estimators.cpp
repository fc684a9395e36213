// Monte Carlo estimators: exact mean computation, agreement with closed-form
// oracles at pinned seeds, shared-sample structure across estimates, thread
// invariance, and the four inequality checks.
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ldlab/estimators.hpp"

using namespace ldlab;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ConvexBody spin_up_body() { return ConvexBody::translate({1.0}, ConvexBody::ball(1, 1.25)); }

struct ThreadGuard {
    ~ThreadGuard() { set_thread_count(1); }
};

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("empirical mean is exact on integer data, full box and window") {
    Configuration c;
    c.box = make_box(2, 3, {10, 20});
    c.state_dim = 1;
    c.values = {1, 2, 3, 4, 5, 6, 7, 8, 9};  // row-major, rows are axis 0
    CHECK(empirical_mean(c) == std::vector<double>{5.0});
    // window rows {11,12} x cols {21,22}: sites 5, 6, 8, 9
    const LatticeBox window = make_box(2, 2, {11, 21});
    CHECK(empirical_mean(c, window) == std::vector<double>{7.0});
    const LatticeBox corner = make_box(2, 2, {10, 20});
    CHECK(empirical_mean(c, corner) == std::vector<double>{3.0});
    CHECK_THROWS_AS(empirical_mean(c, make_box(2, 2, {12, 20})), std::invalid_argument);
    CHECK_THROWS_AS(empirical_mean(c, make_box(2, 4, {10, 20})), std::invalid_argument);

    // vector observable: per-component means
    Configuration v;
    v.box = make_box(1, 3);
    v.state_dim = 2;
    v.values = {1, 10, 2, 20, 3, 30};
    CHECK(empirical_mean(v) == std::vector<double>{2.0, 20.0});
}

TEST_CASE("event probability uses the exact oracle when present") {
    const ModelPtr bern = iid_model(BernoulliDist{0.5}, 1);
    const ConvexBody body = ConvexBody::ball(1, 0.1);
    const EmpiricalEstimate exact = box_probability(*bern, 10, body, {0.5}, 1000, 1);
    CHECK(exact.exact);
    CHECK(exact.std_error == 0.0);
    CHECK(exact.value == doctest::Approx(672.0 / 1024.0).epsilon(1e-14));

    const EmpiricalEstimate mc = box_probability(*bern, 10, body, {0.5}, 50000, 1, false);
    CHECK_FALSE(mc.exact);
    CHECK(mc.samples == 50000);
    CHECK(mc.hit_count > 0);
    CHECK(std::abs(mc.value - exact.value) < 4.0 * mc.std_error);

    CHECK_THROWS_AS(box_probability(*bern, 10, ConvexBody::ball(2, 0.1), {0.5, 0.5}, 10, 1),
                    std::invalid_argument);
}

TEST_CASE("entropy estimate tracks the exact binomial value") {
    const ModelPtr bern = iid_model(BernoulliDist{0.5}, 1);
    const EmpiricalEstimate est = entropy_estimate(*bern, 25, {0.6}, 0.05, 100000, 1);
    const double exact = std::log(*bern->box_probability_oracle(25, ConvexBody::ball(1, 0.05), {0.6})) / 25.0;
    CHECK_FALSE(est.zero_hits);
    CHECK(std::abs(est.value - exact) < 4.0 * est.std_error);

    // empty window: -inf value, flagged, NaN error
    const EmpiricalEstimate none = entropy_estimate(*bern, 30, {0.999}, 0.001, 200, 1);
    CHECK(none.zero_hits);
    CHECK(none.value == -kInf);
    CHECK(std::isnan(none.std_error));

    CHECK_THROWS_AS(entropy_estimate(*bern, 10, {0.5}, 0.0, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(entropy_estimate(*bern, 10, {0.5, 0.5}, 0.1, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(entropy_estimate(*bern, 1LL << 41, {0.5}, 0.1, 10, 1), std::invalid_argument);
}

TEST_CASE("pressure estimate: zero lambda is exactly zero, oracle within 3 sigma") {
    const ModelPtr gauss = iid_model(GaussianDist{0.0, 1.0}, 1);
    const EmpiricalEstimate zero = pressure_estimate(*gauss, 8, {0.0}, 5000, 1);
    CHECK(zero.value == 0.0);
    CHECK(zero.std_error == 0.0);
    CHECK_FALSE(zero.ess_warning);

    const EmpiricalEstimate est = pressure_estimate(*gauss, 4, {0.5}, 50000, 1);
    CHECK(std::abs(est.value - 0.125) <= 3.0 * est.std_error);

    // heavy-tailed weights at large volume get flagged
    const EmpiricalEstimate heavy = pressure_estimate(*gauss, 64, {1.0}, 200, 1);
    CHECK(heavy.max_weight_fraction > 0.1);
    CHECK(heavy.ess_warning);

    CHECK_THROWS_AS(pressure_estimate(*gauss, 8, {0.1, 0.2}, 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(pressure_estimate(*gauss, 8, {0.1}, 0, 1), std::invalid_argument);
}

TEST_CASE("pressure curve shares samples: exact convexity and consistency") {
    const ModelPtr bern = iid_model(BernoulliDist{0.3}, 1);
    std::vector<std::vector<double>> grid;
    for (int i = 0; i <= 8; ++i) grid.push_back({-2.0 + 0.5 * i});
    const auto curve = pressure_curve(*bern, 16, grid, 20000, 7);
    REQUIRE(curve.size() == grid.size());
    // log-sum-exp of shared linear weights is convex in lambda up to rounding
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        CHECK(curve[i - 1].value + curve[i + 1].value >= 2.0 * curve[i].value - 1e-12);
    }
    // single-lambda estimate reproduces the curve entry bit for bit
    const EmpiricalEstimate single = pressure_estimate(*bern, 16, grid[3], 20000, 7);
    CHECK(single.value == curve[3].value);
    CHECK(single.std_error == curve[3].std_error);
    // unflagged estimates stay near the oracle; the strongest tilt is
    // dominated by few replicas, which is exactly what ess_warning reports
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (curve[i].ess_warning) continue;
        const double oracle = *bern->pressure_oracle(grid[i]);
        CHECK(std::abs(curve[i].value - oracle) <= 4.0 * curve[i].std_error + 1e-12);
    }
    CHECK(curve.back().ess_warning);  // lambda = 2 at n = 16: top weight > 10%
}

TEST_CASE("estimates sharing (seed, n) see the same replicas") {
    const ModelPtr gauss = iid_model(GaussianDist{0.0, 1.0}, 1);
    const EmpiricalEstimate ent = entropy_estimate(*gauss, 9, {0.0}, 0.2, 5000, 3);
    const EmpiricalEstimate prob = box_probability(*gauss, 9, ConvexBody::ball(1, 0.2), {0.0}, 5000, 3, false);
    CHECK(ent.hit_count == prob.hit_count);  // same means, same window
}

TEST_CASE("results are byte-identical for any thread count") {
    ThreadGuard guard;
    const ModelPtr model = ising1d_model(0.4, 0.1);
    set_thread_count(1);
    const auto curve1 = pressure_curve(*model, 32, {{-0.3}, {0.3}}, 4000, 5);
    const EmpiricalEstimate ent1 = entropy_estimate(*model, 16, {0.2}, 0.1, 4000, 5);
    set_thread_count(4);
    const auto curve4 = pressure_curve(*model, 32, {{-0.3}, {0.3}}, 4000, 5);
    const EmpiricalEstimate ent4 = entropy_estimate(*model, 16, {0.2}, 0.1, 4000, 5);
    set_thread_count(1);
    REQUIRE(curve1.size() == curve4.size());
    for (std::size_t i = 0; i < curve1.size(); ++i) {
        CHECK(curve1[i].value == curve4[i].value);
        CHECK(curve1[i].std_error == curve4[i].std_error);
        CHECK(curve1[i].max_weight_fraction == curve4[i].max_weight_fraction);
    }
    CHECK(ent1.value == ent4.value);
    CHECK(ent1.std_error == ent4.std_error);
    CHECK(thread_count() == 1);
}

TEST_CASE("decoupling defect vanishes for independent sites") {
    const ModelPtr bern = iid_model(BernoulliDist{0.5}, 1);
    const ConvexBody body = ConvexBody::ball(1, 0.15);
    const DecouplingResult res = decoupling_check(*bern, 8, 4, body, {0.5}, body, {0.5}, 20000, 1);
    CHECK(res.samples == 20000);
    CHECK(res.c_declared == 0.0);
    CHECK_FALSE(res.degenerate);
    CHECK(std::abs(res.delta) <= 4.0 * res.sigma);
    CHECK(res.pass);
    // marginal hit rates track the binomial value P(k in {3,4,5}) = 182/256
    const double expect = 182.0 / 256.0;
    CHECK(std::abs(res.p_a - expect) < 4.0 * std::sqrt(expect * (1.0 - expect) / 20000.0));
    CHECK(std::abs(res.p_b - expect) < 4.0 * std::sqrt(expect * (1.0 - expect) / 20000.0));
    CHECK(res.hits_ab <= res.hits_a);
    CHECK(res.hits_ab <= res.hits_b);

    // impossible event on one side degenerates the estimate
    const DecouplingResult deg = decoupling_check(*bern, 4, 0, body, {0.5}, body, {5.0}, 100, 1);
    CHECK(deg.degenerate);
    CHECK(deg.delta == -kInf);
    CHECK_FALSE(deg.pass);

    CHECK_THROWS_AS(decoupling_check(*bern, 0, 0, body, {0.5}, body, {0.5}, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(decoupling_check(*bern, 4, -1, body, {0.5}, body, {0.5}, 10, 1), std::invalid_argument);
}

TEST_CASE("local-control frequencies match the chain conditionals") {
    const ModelPtr chain = ising1d_model(0.4, 0.1);
    const LocalControlResult res = local_control_check(*chain, spin_up_body(), 20000, 1);
    CHECK(res.declared);
    CHECK(res.t == 1.0);
    CHECK(res.alpha > 0.0);
    REQUIRE(res.bins.size() == 3);
    CHECK(res.empty_bins == 0);
    const long long keys[] = {-2, 0, 2};
    for (std::size_t i = 0; i < 3; ++i) {
        const LocalControlBin& bin = res.bins[i];
        CHECK(bin.key == keys[i]);
        REQUIRE(bin.exact.has_value());
        CHECK(std::abs(bin.freq - *bin.exact) <= 3.0 * bin.sigma);
        CHECK(bin.freq >= res.alpha - 3.0 * bin.sigma);
        CHECK(bin.pass);
    }
    CHECK(res.pass);
    CHECK(res.min_freq >= res.alpha - 0.05);

    // too few observations: bins are reported but not tested
    const LocalControlResult tiny = local_control_check(*chain, spin_up_body(), 20, 1);
    CHECK(tiny.empty_bins == static_cast<long long>(tiny.bins.size()));
    CHECK(tiny.pass);
    CHECK(tiny.min_freq == 0.0);

    const ModelPtr vec = markov_model({{0.9, 0.1}, {0.2, 0.8}}, {{1.0, 0.0}, {0.0, 1.0}});
    CHECK_THROWS_AS(local_control_check(*vec, spin_up_body(), 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(local_control_check(*chain, ConvexBody::ball(2, 1.0), 100, 1), std::invalid_argument);
}

TEST_CASE("gapped-tiling bound: exact oracle route at (10, 40)") {
    const ModelPtr bern = iid_model(BernoulliDist{0.5}, 1);
    const SubadditivityResult res =
        subadditivity_check(*bern, {0.5}, ConvexBody::ball(1, 0.1), 0.5, 10, 40, 1000, 1);
    CHECK(res.exact);
    CHECK(res.rho == Rational(0));
    CHECK(res.threshold_ok);
    CHECK_FALSE(res.skipped);
    // inner window at n=10 accepts k in {4,5,6}: (1/10) log(672/1024)
    CHECK(res.inner.value == doctest::Approx(std::log(672.0 / 1024.0) / 10.0).epsilon(1e-14));
    CHECK(res.c_term == 0.0);
    CHECK(res.alpha_term == 0.0);
    CHECK(res.rhs == res.inner.value);
    CHECK(res.margin == doctest::Approx(res.lhs.value - res.inner.value).epsilon(1e-14));
    CHECK(res.margin > 0.0);
    CHECK(res.sigma == 0.0);
    CHECK(res.pass);
}

TEST_CASE("gapped-tiling bound: marginal sites and the scale threshold") {
    const ModelPtr bern = iid_model(BernoulliDist{0.5}, 1);
    const ConvexBody body = ConvexBody::ball(1, 0.1);
    // n = 45 leaves r = 5, rho = 1/9; the event needs scale t = 8 to capture
    // a site value, so eps = 0.5 fails the threshold and eps = 1.0 passes it
    const SubadditivityResult tight =
        subadditivity_check(*bern, {0.5}, body, 0.5, 10, 45, 1000, 1);
    CHECK(tight.rho == Rational(1, 9));
    CHECK(tight.t == 8.0);
    CHECK_FALSE(tight.threshold_ok);
    CHECK_FALSE(tight.pass);

    const SubadditivityResult wide =
        subadditivity_check(*bern, {0.5}, body, 1.0, 10, 45, 1000, 1);
    CHECK(wide.threshold_ok);
    CHECK(wide.exact);
    CHECK(wide.alpha_term ==
          doctest::Approx((1.0 / 9.0) * std::log(0.5)).epsilon(1e-14));
    CHECK(wide.pass);

    // empty inner window: the bound is vacuous and reported as skipped
    const SubadditivityResult skip =
        subadditivity_check(*bern, {0.95}, ConvexBody::ball(1, 0.02), 0.5, 10, 40, 1000, 1);
    CHECK(skip.skipped);
    CHECK(skip.inner.zero_hits);
    CHECK(skip.margin == kInf);
    CHECK(skip.pass == skip.threshold_ok);

    CHECK_THROWS_AS(subadditivity_check(*bern, {0.5}, body, 0.0, 10, 40, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(subadditivity_check(*bern, {0.5}, body, 0.5, 10, 5, 10, 1), std::invalid_argument);
}

TEST_CASE("duality report on a dense grid") {
    const ModelPtr bern = iid_model(BernoulliDist{0.3}, 1);
    std::vector<double> lambda_grid;
    for (int i = 0; i <= 40; ++i) lambda_grid.push_back(-2.0 + 0.1 * i);
    const std::vector<double> x_grid = {0.2, 0.3, 0.4};
    const DualityReport rep = duality_check(*bern, x_grid, lambda_grid, {8, 16}, 0.1, 20000, 1);
    CHECK(rep.rows.size() == 2 * x_grid.size() * lambda_grid.size());
    CHECK(rep.failed_rows == 0);
    REQUIRE(rep.conjugate_gaps.size() == 2);
    for (const DualityConjugateGap& gap : rep.conjugate_gaps) CHECK(gap.usable_points > 0);
    CHECK(rep.oracle_route_available);
    CHECK(rep.oracle_route_gap <= rep.oracle_route_tolerance);
    CHECK(rep.pass);
    // row bookkeeping: margin and slack fields are consistent
    for (const DualityRow& row : rep.rows) {
        CHECK(row.slack == std::abs(row.lambda) * 0.1);
        if (!row.entropy_zero_hits) {
            CHECK(row.margin ==
                  doctest::Approx(row.pressure - row.entropy - row.lambda * row.x).epsilon(1e-14));
        }
    }

    CHECK_THROWS_AS(duality_check(*bern, {}, lambda_grid, {8}, 0.1, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(duality_check(*bern, x_grid, {0.0}, {8}, 0.1, 10, 1), std::invalid_argument);
    const ModelPtr vec = markov_model({{0.9, 0.1}, {0.2, 0.8}}, {{1.0, 0.0}, {0.0, 1.0}});
    CHECK_THROWS_AS(duality_check(*vec, x_grid, lambda_grid, {8}, 0.1, 10, 1), std::invalid_argument);
}

}  // TEST_SUITE
