#include "ldlab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>

#include "ldlab/rng.hpp"

namespace ldlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

// Open interval {u : gauge(u) < t} of a one-dimensional body, via homogeneity.
struct Interval {
    double lo, hi;
};

Interval body_interval(const ConvexBody& body, double t) {
    const double gp = body.gauge({1.0});
    const double gm = body.gauge({-1.0});
    return {gm > 0.0 ? -t / gm : -kInf, gp > 0.0 ? t / gp : kInf};
}

// Smallest power of two t >= 1 whose scaled body has mass(t) >= 1/2;
// mass(t) must be nondecreasing in t. Returns nullopt if 2^60 is not enough.
std::optional<double> power_of_two_scale(const std::function<double(double)>& mass, double target) {
    double t = 1.0;
    for (int k = 0; k <= 60; ++k) {
        if (mass(t) >= target) return t;
        t *= 2.0;
    }
    return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------
// Base model
// ---------------------------------------------------------------------------

Configuration FieldModel::sample(const LatticeBox& box, std::uint64_t seed) const {
    if (box.dim != dim_) {
        throw std::invalid_argument("fields: box dimension does not match model '" + name_ + "'");
    }
    Configuration config = sample_impl(box, seed);
    if (static_cast<long long>(config.values.size()) != box.volume() * state_dim_) {
        throw std::logic_error("fields: sampler produced wrong value count");
    }
    return config;
}

std::optional<LocalControlDecl> FieldModel::local_control(const ConvexBody&,
                                                          const std::vector<double>&) const {
    return std::nullopt;
}

std::optional<ConvexBody> FieldModel::truncation(double) const { return std::nullopt; }

std::optional<double> FieldModel::pressure_oracle(const std::vector<double>&) const { return std::nullopt; }
std::optional<double> FieldModel::entropy_oracle(const std::vector<double>&) const { return std::nullopt; }
std::optional<double> FieldModel::finite_pressure_oracle(long long, const std::vector<double>&) const {
    return std::nullopt;
}
std::optional<double> FieldModel::box_probability_oracle(long long, const ConvexBody&,
                                                         const std::vector<double>&) const {
    return std::nullopt;
}

std::vector<ConditionalObs> FieldModel::conditional_observations(long long count, std::uint64_t seed) const {
    // Generic route: sample a 3^d block per observation and read the center
    // site against the sum of its 2d lattice neighbors.
    std::vector<ConditionalObs> obs;
    obs.reserve(static_cast<std::size_t>(count));
    const LatticeBox block = make_box(dim_, 3);
    // center of the block and its axis neighbors, as flat indices
    long long center = 0;
    for (int a = 0; a < dim_; ++a) center = center * 3 + 1;
    std::vector<long long> strides(dim_);
    long long s = 1;
    for (int a = dim_ - 1; a >= 0; --a) {
        strides[a] = s;
        s *= 3;
    }
    for (long long i = 0; i < count; ++i) {
        const Configuration c = sample(block, derive_seed(seed, 0x0b5e7ULL, static_cast<std::uint64_t>(i)));
        double nsum = 0.0;
        for (int a = 0; a < dim_; ++a) {
            nsum += c.scalar_at(center - strides[a]) + c.scalar_at(center + strides[a]);
        }
        ConditionalObs o;
        o.bin = finite_state() ? std::llround(nsum) : 0;
        o.value = c.scalar_at(center);
        obs.push_back(o);
    }
    return obs;
}

std::string FieldModel::bin_label(long long bin) const {
    if (!finite_state()) return "all";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s=%+lld", bin);
    return buf;
}

std::optional<double> FieldModel::conditional_oracle(long long, const ConvexBody&, double,
                                                     const std::vector<double>&) const {
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// i.i.d. models
// ---------------------------------------------------------------------------

namespace {

enum class IidKind { bernoulli, spin, gaussian, uniform };

class IidModel final : public FieldModel {
  public:
    IidModel(std::string name, IidKind kind, int dim, double p, double mean, double var, double a, double b)
        : FieldModel(std::move(name), dim, 1), kind_(kind), p_(p), mean_(mean), var_(var), a_(a), b_(b) {}

    DecouplingDecl decoupling(long long) const override { return {0, 0.0, true}; }

    bool finite_state() const override { return kind_ == IidKind::bernoulli || kind_ == IidKind::spin; }

    std::optional<LocalControlDecl> local_control(const ConvexBody& body,
                                                  const std::vector<double>& shift) const override {
        if (body.dimension() != 1 || shift.size() != 1) return std::nullopt;
        const double sh = shift[0];
        auto mass = [&](double t) { return site_mass(body, t, sh); };
        const auto t = power_of_two_scale(mass, 0.5);
        if (!t) return std::nullopt;
        // alpha is declared at the 1/2 floor guaranteed by the scale rule;
        // the actually captured mass is reported alongside.
        return LocalControlDecl{*t, 0.5, mass(*t)};
    }

    std::optional<ConvexBody> truncation(double gamma) const override {
        if (!(gamma > 0.0 && gamma < 1.0)) return std::nullopt;
        double lo = 0.0, hi = 0.0;
        switch (kind_) {
            case IidKind::bernoulli: lo = 0.0; hi = 1.0; break;
            case IidKind::spin: lo = -1.0; hi = 1.0; break;
            case IidKind::uniform: lo = a_; hi = b_; break;
            case IidKind::gaussian: {
                // centered quantile ball: mass exactly 1-gamma, then enlarged
                // if needed to keep the origin interior
                const double r = std::sqrt(2.0 * var_) * boost::math::erfc_inv(gamma);
                const double radius = std::max(r, 1.1 * std::abs(mean_) + 0.1 * std::sqrt(var_));
                return interval_body(mean_ - radius, mean_ + radius);
            }
        }
        // bounded state space: any padded interval around the values has mass 1
        const double w = hi - lo;
        return interval_body(std::min(lo, 0.0) - 0.1 * (w + 1.0), std::max(hi, 0.0) + 0.1 * (w + 1.0));
    }

    std::optional<double> pressure_oracle(const std::vector<double>& lambda) const override {
        if (lambda.size() != 1) return std::nullopt;
        const double l = lambda[0];
        switch (kind_) {
            case IidKind::bernoulli: return std::log1p(p_ * std::expm1(l));
            case IidKind::spin: return std::log(p_ * std::exp(l) + (1.0 - p_) * std::exp(-l));
            case IidKind::gaussian: return mean_ * l + 0.5 * var_ * l * l;
            case IidKind::uniform: {
                const double t = l * (b_ - a_);
                if (t == 0.0) return l * a_;
                return l * a_ + std::log(std::expm1(t) / t);
            }
        }
        return std::nullopt;
    }

    std::optional<double> entropy_oracle(const std::vector<double>& x) const override {
        if (x.size() != 1) return std::nullopt;
        const double v = x[0];
        switch (kind_) {
            case IidKind::bernoulli: return 0.0 - bernoulli_rate(v, p_);
            case IidKind::spin: return 0.0 - bernoulli_rate(0.5 * (1.0 + v), p_);
            case IidKind::gaussian: return 0.0 - (v - mean_) * (v - mean_) / (2.0 * var_);
            case IidKind::uniform: return std::nullopt;  // no elementary closed form
        }
        return std::nullopt;
    }

    std::optional<double> finite_pressure_oracle(long long, const std::vector<double>& lambda) const override {
        return pressure_oracle(lambda);  // the exponential moment factorizes over sites
    }

    std::optional<double> box_probability_oracle(long long n, const ConvexBody& body,
                                                 const std::vector<double>& center) const override {
        if (body.dimension() != 1 || center.size() != 1) return std::nullopt;
        long long sites = 1;
        for (int i = 0; i < dim_; ++i) sites *= n;
        if (kind_ == IidKind::bernoulli || kind_ == IidKind::spin) {
            if (sites > 2'000'000) return std::nullopt;
            // sum the binomial masses of the mean values the event accepts,
            // using the same double-precision membership predicate as the
            // Monte Carlo path
            double total = 0.0;
            const double logp = std::log(p_), logq = std::log1p(-p_);
            const double lgn = std::lgamma(static_cast<double>(sites) + 1.0);
            for (long long k = 0; k <= sites; ++k) {
                const double mean = (kind_ == IidKind::bernoulli)
                                        ? static_cast<double>(k) / static_cast<double>(sites)
                                        : static_cast<double>(2 * k - sites) / static_cast<double>(sites);
                if (body.gauge({mean - center[0]}) < 1.0) {
                    const double lt = lgn - std::lgamma(static_cast<double>(k) + 1.0) -
                                      std::lgamma(static_cast<double>(sites - k) + 1.0) +
                                      static_cast<double>(k) * logp + static_cast<double>(sites - k) * logq;
                    total += std::exp(lt);
                }
            }
            return std::min(total, 1.0);
        }
        if (kind_ == IidKind::gaussian) {
            const Interval iv = body_interval(body, 1.0);
            const double sd = std::sqrt(var_ / static_cast<double>(sites));
            const double hi = std::isinf(iv.hi) ? 1.0 : normal_cdf((center[0] + iv.hi - mean_) / sd);
            const double lo = std::isinf(iv.lo) ? 0.0 : normal_cdf((center[0] + iv.lo - mean_) / sd);
            return std::max(0.0, hi - lo);
        }
        return std::nullopt;
    }

    std::optional<double> conditional_oracle(long long, const ConvexBody& body, double t,
                                             const std::vector<double>& shift) const override {
        if (body.dimension() != 1 || shift.size() != 1) return std::nullopt;
        return site_mass(body, t, shift[0]);  // sites are independent of their neighborhood
    }

  protected:
    Configuration sample_impl(const LatticeBox& box, std::uint64_t seed) const override {
        Configuration config{box, 1, {}};
        const long long vol = box.volume();
        config.values.resize(static_cast<std::size_t>(vol));
        RngStream rng(seed);
        for (long long i = 0; i < vol; ++i) config.values[static_cast<std::size_t>(i)] = draw(rng);
        return config;
    }

  private:
    double draw(RngStream& rng) const {
        switch (kind_) {
            case IidKind::bernoulli: return rng.bernoulli(p_) ? 1.0 : 0.0;
            case IidKind::spin: return rng.bernoulli(p_) ? 1.0 : -1.0;
            case IidKind::gaussian: return mean_ + std::sqrt(var_) * rng.normal();
            case IidKind::uniform: return a_ + (b_ - a_) * rng.uniform();
        }
        return 0.0;
    }

    // P(X - shift in t*body), exact
    double site_mass(const ConvexBody& body, double t, double shift) const {
        switch (kind_) {
            case IidKind::bernoulli:
                return (body.gauge({0.0 - shift}) < t ? 1.0 - p_ : 0.0) +
                       (body.gauge({1.0 - shift}) < t ? p_ : 0.0);
            case IidKind::spin:
                return (body.gauge({-1.0 - shift}) < t ? 1.0 - p_ : 0.0) +
                       (body.gauge({1.0 - shift}) < t ? p_ : 0.0);
            case IidKind::gaussian: {
                const Interval iv = body_interval(body, t);
                const double sd = std::sqrt(var_);
                const double hi = std::isinf(iv.hi) ? 1.0 : normal_cdf((shift + iv.hi - mean_) / sd);
                const double lo = std::isinf(iv.lo) ? 0.0 : normal_cdf((shift + iv.lo - mean_) / sd);
                return std::max(0.0, hi - lo);
            }
            case IidKind::uniform: {
                const Interval iv = body_interval(body, t);
                const double lo = std::max(a_, shift + iv.lo), hi = std::min(b_, shift + iv.hi);
                return std::max(0.0, (hi - lo) / (b_ - a_));
            }
        }
        return 0.0;
    }

    static double bernoulli_rate(double q, double p) {
        if (q < 0.0 || q > 1.0) return kInf;
        double rate = 0.0;
        if (q > 0.0) rate += q * std::log(q / p);
        if (q < 1.0) rate += (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
        return rate;
    }

    static ConvexBody interval_body(double lo, double hi) {
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        if (mid == 0.0) return ConvexBody::ball(1, half);
        return ConvexBody::translate({mid}, ConvexBody::ball(1, half));
    }

    IidKind kind_;
    double p_ = 0.5, mean_ = 0.0, var_ = 1.0, a_ = 0.0, b_ = 1.0;
};

}  // namespace

ModelPtr iid_model(BernoulliDist dist, int dim) {
    if (!(dist.p > 0.0 && dist.p < 1.0)) throw std::invalid_argument("fields: bernoulli needs 0 < p < 1");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "bernoulli(p=%g,d=%d)", dist.p, dim);
    return std::make_shared<IidModel>(buf, IidKind::bernoulli, dim, dist.p, 0, 0, 0, 0);
}

ModelPtr iid_model(SpinDist dist, int dim) {
    if (!(dist.p > 0.0 && dist.p < 1.0)) throw std::invalid_argument("fields: spin needs 0 < p < 1");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "spin(p=%g,d=%d)", dist.p, dim);
    return std::make_shared<IidModel>(buf, IidKind::spin, dim, dist.p, 0, 0, 0, 0);
}

ModelPtr iid_model(GaussianDist dist, int dim) {
    if (!(dist.var > 0.0)) throw std::invalid_argument("fields: gaussian needs var > 0");
    char buf[80];
    std::snprintf(buf, sizeof(buf), "gaussian(mean=%g,var=%g,d=%d)", dist.mean, dist.var, dim);
    return std::make_shared<IidModel>(buf, IidKind::gaussian, dim, 0, dist.mean, dist.var, 0, 0);
}

ModelPtr iid_model(UniformDist dist, int dim) {
    if (!(dist.a < dist.b)) throw std::invalid_argument("fields: uniform needs a < b");
    char buf[80];
    std::snprintf(buf, sizeof(buf), "uniform(a=%g,b=%g,d=%d)", dist.a, dist.b, dim);
    return std::make_shared<IidModel>(buf, IidKind::uniform, dim, 0, 0, 0, dist.a, dist.b);
}

// ---------------------------------------------------------------------------
// 1D Ising chain, exact stationary sampling
// ---------------------------------------------------------------------------

namespace {

class Ising1dModel final : public FieldModel {
  public:
    Ising1dModel(double beta, double h)
        : FieldModel(make_name(beta, h), 1, 1), beta_(beta), h_(h) {
        // transfer matrix over states (+1, -1)
        t_[0][0] = std::exp(beta + h);
        t_[0][1] = std::exp(-beta);
        t_[1][0] = std::exp(-beta);
        t_[1][1] = std::exp(beta - h);
        lmax_ = leading_eigenvalue(beta, h);
        double phi[2] = {t_[0][1], lmax_ - t_[0][0]};  // positive eigenvector
        const double nrm = phi[0] * phi[0] + phi[1] * phi[1];
        pi_[0] = phi[0] * phi[0] / nrm;
        pi_[1] = phi[1] * phi[1] / nrm;
        for (int i = 0; i < 2; ++i) {
            double row = 0.0;
            for (int j = 0; j < 2; ++j) {
                p_[i][j] = t_[i][j] * phi[j] / (lmax_ * phi[i]);
                row += p_[i][j];
            }
            for (int j = 0; j < 2; ++j) p_[i][j] /= row;  // exact row normalization
        }
    }

    static double leading_eigenvalue(double beta, double h) {
        return std::exp(beta) * std::cosh(h) +
               std::sqrt(std::exp(2.0 * beta) * std::sinh(h) * std::sinh(h) + std::exp(-2.0 * beta));
    }

    bool finite_state() const override { return true; }

    DecouplingDecl decoupling(long long) const override {
        // engineering estimate from the one-step minorization P(t|s) >= r pi(t)
        double worst = kInf;
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) worst = std::min(worst, p_[i][j] / pi_[j]);
        }
        return {0, std::max(0.0, -std::log(worst)), false};
    }

    std::optional<LocalControlDecl> local_control(const ConvexBody& body,
                                                  const std::vector<double>& shift) const override {
        if (body.dimension() != 1 || shift.size() != 1) return std::nullopt;
        const auto t = power_of_two_scale(
            [&](double tt) { return captured_states(body, tt, shift[0]) > 0 ? 1.0 : 0.0; }, 0.5);
        if (!t) return std::nullopt;
        double alpha = kInf;
        for (long long s : {-2LL, 0LL, 2LL}) {
            alpha = std::min(alpha, *conditional_oracle(s, body, *t, shift));
        }
        return LocalControlDecl{*t, alpha, alpha};
    }

    std::optional<ConvexBody> truncation(double gamma) const override {
        if (!(gamma > 0.0 && gamma < 1.0)) return std::nullopt;
        return ConvexBody::ball(1, 1.5);  // spins, mass 1 for every gamma
    }

    std::optional<double> pressure_oracle(const std::vector<double>& lambda) const override {
        if (lambda.size() != 1) return std::nullopt;
        return std::log(leading_eigenvalue(beta_, h_ + lambda[0])) - std::log(lmax_);
    }

    std::optional<double> finite_pressure_oracle(long long n, const std::vector<double>& lambda) const override {
        if (lambda.size() != 1 || n < 1) return std::nullopt;
        const double l = lambda[0];
        const double val[2] = {1.0, -1.0};
        double v[2] = {pi_[0] * std::exp(l * val[0]), pi_[1] * std::exp(l * val[1])};
        double logscale = 0.0;
        for (long long step = 1; step < n; ++step) {
            double w[2] = {0.0, 0.0};
            for (int j = 0; j < 2; ++j) {
                for (int i = 0; i < 2; ++i) w[j] += v[i] * p_[i][j] * std::exp(l * val[j]);
            }
            const double mx = std::max(w[0], w[1]);
            v[0] = w[0] / mx;
            v[1] = w[1] / mx;
            logscale += std::log(mx);
        }
        return (logscale + std::log(v[0] + v[1])) / static_cast<double>(n);
    }

    std::optional<double> box_probability_oracle(long long n, const ConvexBody& body,
                                                 const std::vector<double>& center) const override {
        if (body.dimension() != 1 || center.size() != 1 || n < 1 || n > 4096) return std::nullopt;
        // exact law of the spin sum by dynamic programming over (site, state, #up)
        const std::size_t nn = static_cast<std::size_t>(n);
        std::vector<double> cur(2 * (nn + 1), 0.0);  // [state * (n+1) + ups]
        cur[0 * (nn + 1) + 1] = pi_[0];
        cur[1 * (nn + 1) + 0] = pi_[1];
        std::vector<double> nxt(cur.size());
        for (std::size_t site = 1; site < nn; ++site) {
            std::fill(nxt.begin(), nxt.end(), 0.0);
            for (int s = 0; s < 2; ++s) {
                for (std::size_t ups = 0; ups <= site; ++ups) {
                    const double w = cur[static_cast<std::size_t>(s) * (nn + 1) + ups];
                    if (w == 0.0) continue;
                    nxt[0 * (nn + 1) + ups + 1] += w * p_[s][0];
                    nxt[1 * (nn + 1) + ups] += w * p_[s][1];
                }
            }
            cur.swap(nxt);
        }
        double total = 0.0;
        for (std::size_t ups = 0; ups <= nn; ++ups) {
            const double mass = cur[0 * (nn + 1) + ups] + cur[1 * (nn + 1) + ups];
            if (mass == 0.0) continue;
            const double mean = static_cast<double>(2.0 * static_cast<double>(ups) - static_cast<double>(n)) /
                                static_cast<double>(n);
            if (body.gauge({mean - center[0]}) < 1.0) total += mass;
        }
        return std::min(total, 1.0);
    }

    std::optional<double> conditional_oracle(long long bin, const ConvexBody& body, double t,
                                             const std::vector<double>& shift) const override {
        if (body.dimension() != 1 || shift.size() != 1) return std::nullopt;
        // P(sigma = +1 | neighbor sum s) = 1 / (1 + e^{-2(beta s + h)})
        const double pplus = 1.0 / (1.0 + std::exp(-2.0 * (beta_ * static_cast<double>(bin) + h_)));
        double mass = 0.0;
        if (body.gauge({1.0 - shift[0]}) < t) mass += pplus;
        if (body.gauge({-1.0 - shift[0]}) < t) mass += 1.0 - pplus;
        return mass;
    }

  protected:
    Configuration sample_impl(const LatticeBox& box, std::uint64_t seed) const override {
        Configuration config{box, 1, {}};
        const long long n = box.volume();
        config.values.resize(static_cast<std::size_t>(n));
        RngStream rng(seed);
        int state = rng.bernoulli(pi_[0]) ? 0 : 1;
        config.values[0] = state == 0 ? 1.0 : -1.0;
        for (long long i = 1; i < n; ++i) {
            state = rng.bernoulli(p_[state][0]) ? 0 : 1;
            config.values[static_cast<std::size_t>(i)] = state == 0 ? 1.0 : -1.0;
        }
        return config;
    }

  private:
    static std::string make_name(double beta, double h) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "ising1d(beta=%g,h=%g)", beta, h);
        return buf;
    }

    int captured_states(const ConvexBody& body, double t, double shift) const {
        int captured = 0;
        if (body.gauge({1.0 - shift}) < t) ++captured;
        if (body.gauge({-1.0 - shift}) < t) ++captured;
        return captured;
    }

    double beta_, h_;
    double t_[2][2];
    double p_[2][2];
    double pi_[2];
    double lmax_;
};

}  // namespace

ModelPtr ising1d_model(double beta, double h) {
    if (!(beta >= 0.0)) throw std::invalid_argument("fields: ising1d needs beta >= 0");
    return std::make_shared<Ising1dModel>(beta, h);
}

// ---------------------------------------------------------------------------
// 2D Ising via sequential heat-bath updates on a torus
// ---------------------------------------------------------------------------

namespace {

class Ising2dModel final : public FieldModel {
  public:
    static constexpr int kPadding = 8;             // torus side = box side + padding
    static constexpr int kObservationSide = 32;    // torus used for conditional observations

    Ising2dModel(double beta, int burn_in, int thinning)
        : FieldModel(make_name(beta, burn_in, thinning), 2, 1),
          beta_(beta), burn_in_(burn_in), thinning_(thinning) {
        for (int i = 0; i < 5; ++i) {
            const int s = 2 * i - 4;  // neighbor sums -4..4
            p_plus_[i] = 1.0 / (1.0 + std::exp(-2.0 * beta_ * static_cast<double>(s)));
        }
    }

    // Exact single-site heat-bath conditional P(sigma = +1 | neighbor sum s).
    double conditional_plus(int neighbor_sum) const {
        return 1.0 / (1.0 + std::exp(-2.0 * beta_ * static_cast<double>(neighbor_sum)));
    }

    bool finite_state() const override { return true; }

    DecouplingDecl decoupling(long long m) const override {
        // declared engineering estimate: interface energy of a side-m square
        return {0, 8.0 * beta_ * static_cast<double>(m), false};
    }

    std::optional<LocalControlDecl> local_control(const ConvexBody& body,
                                                  const std::vector<double>& shift) const override {
        if (body.dimension() != 1 || shift.size() != 1) return std::nullopt;
        const auto t = power_of_two_scale(
            [&](double tt) {
                return (body.gauge({1.0 - shift[0]}) < tt || body.gauge({-1.0 - shift[0]}) < tt) ? 1.0 : 0.0;
            },
            0.5);
        if (!t) return std::nullopt;
        double alpha = kInf;
        for (long long s = -4; s <= 4; s += 2) {
            alpha = std::min(alpha, *conditional_oracle(s, body, *t, shift));
        }
        return LocalControlDecl{*t, alpha, alpha};
    }

    std::optional<ConvexBody> truncation(double gamma) const override {
        if (!(gamma > 0.0 && gamma < 1.0)) return std::nullopt;
        return ConvexBody::ball(1, 1.5);
    }

    std::optional<double> conditional_oracle(long long bin, const ConvexBody& body, double t,
                                             const std::vector<double>& shift) const override {
        if (body.dimension() != 1 || shift.size() != 1) return std::nullopt;
        const double pplus = conditional_plus(static_cast<int>(bin));
        double mass = 0.0;
        if (body.gauge({1.0 - shift[0]}) < t) mass += pplus;
        if (body.gauge({-1.0 - shift[0]}) < t) mass += 1.0 - pplus;
        return mass;
    }

    std::vector<ConditionalObs> conditional_observations(long long count, std::uint64_t seed) const override {
        // One chain on the observation torus: burn in, then record every
        // thinning-th update (the drawn spin against its current neighbor sum).
        // Given its bin each recorded draw uses fresh randomness, so within a
        // bin the hits are independent Bernoulli trials.
        const int L = kObservationSide;
        std::vector<std::int8_t> spin(static_cast<std::size_t>(L) * L);
        RngStream rng(derive_seed(seed, 0x2d0b5ULL));
        for (auto& s : spin) s = rng.bernoulli(0.5) ? 1 : -1;
        std::vector<ConditionalObs> obs;
        obs.reserve(static_cast<std::size_t>(count));
        const long long burn_updates = static_cast<long long>(burn_in_) * L * L;
        long long recorded = 0, step = 0;
        while (recorded < count) {
            const int idx = static_cast<int>(step % (static_cast<long long>(L) * L));
            ++step;
            const int r = idx / L, c = idx % L;
            const int s = spin[static_cast<std::size_t>(((r + 1) % L) * L + c)] +
                          spin[static_cast<std::size_t>(((r + L - 1) % L) * L + c)] +
                          spin[static_cast<std::size_t>(r * L + (c + 1) % L)] +
                          spin[static_cast<std::size_t>(r * L + (c + L - 1) % L)];
            const std::int8_t drawn = rng.bernoulli(conditional_plus(s)) ? 1 : -1;
            spin[static_cast<std::size_t>(idx)] = drawn;
            if (step > burn_updates && (step - burn_updates) % thinning_ == 0) {
                obs.push_back(ConditionalObs{s, static_cast<double>(drawn)});
                ++recorded;
            }
        }
        return obs;
    }

  protected:
    Configuration sample_impl(const LatticeBox& box, std::uint64_t seed) const override {
        const int n = static_cast<int>(box.side);
        const int L = n + kPadding;
        std::vector<std::int8_t> spin(static_cast<std::size_t>(L) * L);
        RngStream rng(seed);
        for (auto& s : spin) s = rng.bernoulli(0.5) ? 1 : -1;
        for (int sweep = 0; sweep < burn_in_; ++sweep) {
            for (int r = 0; r < L; ++r) {
                for (int c = 0; c < L; ++c) {
                    const int s = spin[static_cast<std::size_t>(((r + 1) % L) * L + c)] +
                                  spin[static_cast<std::size_t>(((r + L - 1) % L) * L + c)] +
                                  spin[static_cast<std::size_t>(r * L + (c + 1) % L)] +
                                  spin[static_cast<std::size_t>(r * L + (c + L - 1) % L)];
                    spin[static_cast<std::size_t>(r * L + c)] = rng.bernoulli(p_plus_[(s + 4) / 2]) ? 1 : -1;
                }
            }
        }
        Configuration config{box, 1, {}};
        config.values.resize(static_cast<std::size_t>(n) * n);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                config.values[static_cast<std::size_t>(r) * n + c] =
                    static_cast<double>(spin[static_cast<std::size_t>(r) * L + c]);
            }
        }
        return config;
    }

  private:
    static std::string make_name(double beta, int burn_in, int thinning) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "ising2d(beta=%g,burn_in=%d,thinning=%d)", beta, burn_in, thinning);
        return buf;
    }

    double beta_;
    int burn_in_, thinning_;
    double p_plus_[5];
};

}  // namespace

ModelPtr ising2d_model(double beta, int burn_in, int thinning) {
    if (!(beta >= 0.0)) throw std::invalid_argument("fields: ising2d needs beta >= 0");
    if (burn_in < 1 || thinning < 1) throw std::invalid_argument("fields: ising2d needs burn_in, thinning >= 1");
    return std::make_shared<Ising2dModel>(beta, burn_in, thinning);
}

// ---------------------------------------------------------------------------
// Stationary finite-state chain with a vector observable
// ---------------------------------------------------------------------------

namespace {

class MarkovModel final : public FieldModel {
  public:
    MarkovModel(std::vector<std::vector<double>> transition, std::vector<std::vector<double>> observable)
        : FieldModel("", 1, static_cast<int>(observable.front().size())),
          t_(std::move(transition)), f_(std::move(observable)) {
        k_ = static_cast<int>(t_.size());
        char buf[48];
        std::snprintf(buf, sizeof(buf), "markov(%d states)", k_);
        name_ = buf;
        validate();
        compute_stationary();
        for (const auto& row : t_) {
            std::vector<double> cum(row.size());
            std::partial_sum(row.begin(), row.end(), cum.begin());
            cum.back() = 1.0;
            cum_.push_back(std::move(cum));
        }
        std::vector<double> pic(pi_.begin(), pi_.end());
        std::partial_sum(pic.begin(), pic.end(), pic.begin());
        pic.back() = 1.0;
        cum_pi_ = std::move(pic);
    }

    bool finite_state() const override { return true; }

    DecouplingDecl decoupling(long long) const override {
        // declared estimate from the one-step minorization T(i,j) >= r pi(j)
        double worst = kInf;
        for (int i = 0; i < k_; ++i) {
            for (int j = 0; j < k_; ++j) {
                if (t_[i][j] > 0.0 && pi_[j] > 0.0) worst = std::min(worst, t_[i][j] / pi_[j]);
            }
        }
        return {0, std::max(0.0, -std::log(worst)), false};
    }

    std::optional<LocalControlDecl> local_control(const ConvexBody& body,
                                                  const std::vector<double>& shift) const override {
        if (body.dimension() != state_dim_ || static_cast<int>(shift.size()) != state_dim_) {
            return std::nullopt;
        }
        const auto t = power_of_two_scale(
            [&](double tt) {
                for (int s = 0; s < k_; ++s) {
                    if (member(s, body, tt, shift)) return 1.0;
                }
                return 0.0;
            },
            0.5);
        if (!t) return std::nullopt;
        double alpha = kInf;
        for (int a = 0; a < k_; ++a) {
            for (int b = 0; b < k_; ++b) {
                const auto v = conditional_oracle(static_cast<long long>(a) * k_ + b, body, *t, shift);
                if (v) alpha = std::min(alpha, *v);
            }
        }
        if (alpha == kInf) return std::nullopt;
        return LocalControlDecl{*t, alpha, alpha};
    }

    std::optional<ConvexBody> truncation(double gamma) const override {
        if (!(gamma > 0.0 && gamma < 1.0)) return std::nullopt;
        // padded box around the observable values, enlarged to keep 0 interior
        std::vector<double> lo(static_cast<std::size_t>(state_dim_), 0.0), hi = lo;
        for (int a = 0; a < state_dim_; ++a) {
            for (int s = 0; s < k_; ++s) {
                lo[static_cast<std::size_t>(a)] = std::min(lo[static_cast<std::size_t>(a)], f_[s][a]);
                hi[static_cast<std::size_t>(a)] = std::max(hi[static_cast<std::size_t>(a)], f_[s][a]);
            }
        }
        std::vector<double> mid(lo.size()), half(lo.size());
        for (std::size_t a = 0; a < lo.size(); ++a) {
            const double w = hi[a] - lo[a] + 1.0;
            mid[a] = 0.5 * (lo[a] + hi[a]);
            half[a] = 0.5 * (hi[a] - lo[a]) + 0.2 * w;
        }
        bool centered = true;
        for (double m : mid) {
            if (m != 0.0) centered = false;
        }
        ConvexBody base = ConvexBody::box(half);
        if (centered) return base;
        return ConvexBody::translate(mid, std::move(base));
    }

    std::optional<double> pressure_oracle(const std::vector<double>& lambda) const override {
        if (static_cast<int>(lambda.size()) != state_dim_) return std::nullopt;
        return std::log(perron_root(lambda));
    }

    std::optional<double> finite_pressure_oracle(long long n, const std::vector<double>& lambda) const override {
        if (static_cast<int>(lambda.size()) != state_dim_ || n < 1) return std::nullopt;
        std::vector<double> tilt(static_cast<std::size_t>(k_));
        for (int s = 0; s < k_; ++s) {
            double dot = 0.0;
            for (int a = 0; a < state_dim_; ++a) dot += lambda[static_cast<std::size_t>(a)] * f_[s][a];
            tilt[static_cast<std::size_t>(s)] = std::exp(dot);
        }
        std::vector<double> v(static_cast<std::size_t>(k_));
        for (int s = 0; s < k_; ++s) v[static_cast<std::size_t>(s)] = pi_[s] * tilt[static_cast<std::size_t>(s)];
        double logscale = 0.0;
        for (long long step = 1; step < n; ++step) {
            std::vector<double> w(static_cast<std::size_t>(k_), 0.0);
            for (int j = 0; j < k_; ++j) {
                double acc = 0.0;
                for (int i = 0; i < k_; ++i) acc += v[static_cast<std::size_t>(i)] * t_[i][j];
                w[static_cast<std::size_t>(j)] = acc * tilt[static_cast<std::size_t>(j)];
            }
            const double mx = *std::max_element(w.begin(), w.end());
            for (auto& x : w) x /= mx;
            logscale += std::log(mx);
            v.swap(w);
        }
        double total = 0.0;
        for (double x : v) total += x;
        return (logscale + std::log(total)) / static_cast<double>(n);
    }

    std::optional<double> conditional_oracle(long long bin, const ConvexBody& body, double t,
                                             const std::vector<double>& shift) const override {
        if (body.dimension() != state_dim_ || static_cast<int>(shift.size()) != state_dim_) {
            return std::nullopt;
        }
        const int a = static_cast<int>(bin / k_), b = static_cast<int>(bin % k_);
        if (a < 0 || a >= k_ || b < 0 || b >= k_) return std::nullopt;
        double norm = 0.0, mass = 0.0;
        for (int s = 0; s < k_; ++s) {
            const double w = t_[a][s] * t_[s][b];
            norm += w;
            if (member(s, body, t, shift)) mass += w;
        }
        if (norm == 0.0) return std::nullopt;  // unreachable conditioning pair
        return mass / norm;
    }

    std::vector<ConditionalObs> conditional_observations(long long count, std::uint64_t seed) const override {
        std::vector<ConditionalObs> obs;
        obs.reserve(static_cast<std::size_t>(count));
        for (long long i = 0; i < count; ++i) {
            RngStream rng(derive_seed(seed, 0x3a7c0ULL, static_cast<std::uint64_t>(i)));
            const int s1 = draw_index(cum_pi_, rng);
            const int s2 = draw_index(cum_[static_cast<std::size_t>(s1)], rng);
            const int s3 = draw_index(cum_[static_cast<std::size_t>(s2)], rng);
            obs.push_back(ConditionalObs{static_cast<long long>(s1) * k_ + s3, f_[s2][0]});
        }
        return obs;
    }

    std::string bin_label(long long bin) const override {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "(%lld,%lld)", bin / k_, bin % k_);
        return buf;
    }

    const std::vector<double>& stationary() const { return pi_; }

  protected:
    Configuration sample_impl(const LatticeBox& box, std::uint64_t seed) const override {
        Configuration config{box, state_dim_, {}};
        const long long n = box.volume();
        config.values.resize(static_cast<std::size_t>(n * state_dim_));
        RngStream rng(seed);
        int state = draw_index(cum_pi_, rng);
        for (long long i = 0; i < n; ++i) {
            if (i > 0) state = draw_index(cum_[static_cast<std::size_t>(state)], rng);
            for (int a = 0; a < state_dim_; ++a) {
                config.values[static_cast<std::size_t>(i * state_dim_ + a)] = f_[state][a];
            }
        }
        return config;
    }

  private:
    void validate() const {
        if (t_.empty()) throw std::invalid_argument("fields: markov needs at least one state");
        for (const auto& row : t_) {
            if (row.size() != t_.size()) throw std::invalid_argument("fields: markov matrix must be square");
            double sum = 0.0;
            for (double v : row) {
                if (v < 0.0) throw std::invalid_argument("fields: markov entries must be nonnegative");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-9) {
                throw std::invalid_argument("fields: markov rows must sum to 1");
            }
        }
        if (static_cast<int>(f_.size()) != k_) {
            throw std::invalid_argument("fields: markov observable needs one vector per state");
        }
        for (const auto& v : f_) {
            if (static_cast<int>(v.size()) != state_dim_) {
                throw std::invalid_argument("fields: markov observable vectors must share a dimension");
            }
        }
        // strong connectivity over positive entries
        auto reachable = [&](bool reversed) {
            std::vector<char> seen(static_cast<std::size_t>(k_), 0);
            std::vector<int> stack{0};
            seen[0] = 1;
            while (!stack.empty()) {
                const int u = stack.back();
                stack.pop_back();
                for (int v = 0; v < k_; ++v) {
                    const double w = reversed ? t_[v][u] : t_[u][v];
                    if (w > 0.0 && !seen[static_cast<std::size_t>(v)]) {
                        seen[static_cast<std::size_t>(v)] = 1;
                        stack.push_back(v);
                    }
                }
            }
            return std::count(seen.begin(), seen.end(), 1) == k_;
        };
        if (!reachable(false) || !reachable(true)) {
            throw std::invalid_argument("fields: markov matrix must be irreducible");
        }
        // period via BFS levels: gcd over edges of level(u) + 1 - level(v)
        std::vector<long long> level(static_cast<std::size_t>(k_), -1);
        std::vector<int> queue{0};
        level[0] = 0;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const int u = queue[head];
            for (int v = 0; v < k_; ++v) {
                if (t_[u][v] > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
                    level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
                    queue.push_back(v);
                }
            }
        }
        long long period = 0;
        for (int u = 0; u < k_; ++u) {
            for (int v = 0; v < k_; ++v) {
                if (t_[u][v] > 0.0) {
                    period = std::gcd(period, level[static_cast<std::size_t>(u)] + 1 -
                                                  level[static_cast<std::size_t>(v)]);
                }
            }
        }
        if (period != 1) {
            throw std::invalid_argument("fields: markov matrix must be aperiodic");
        }
    }

    void compute_stationary() {
        pi_.assign(static_cast<std::size_t>(k_), 0.0);
        if (k_ == 1) {
            pi_[0] = 1.0;
            return;
        }
        Eigen::MatrixXd a(k_, k_);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(k_);
        for (int r = 0; r < k_ - 1; ++r) {
            for (int c = 0; c < k_; ++c) a(r, c) = t_[c][r] - (r == c ? 1.0 : 0.0);
        }
        for (int c = 0; c < k_; ++c) a(k_ - 1, c) = 1.0;
        b(k_ - 1) = 1.0;
        const Eigen::VectorXd x = a.fullPivLu().solve(b);
        double sum = 0.0;
        for (int i = 0; i < k_; ++i) {
            pi_[static_cast<std::size_t>(i)] = std::max(0.0, x(i));
            sum += pi_[static_cast<std::size_t>(i)];
        }
        for (auto& v : pi_) v /= sum;
    }

    double perron_root(const std::vector<double>& lambda) const {
        std::vector<double> tilt(static_cast<std::size_t>(k_));
        for (int s = 0; s < k_; ++s) {
            double dot = 0.0;
            for (int a = 0; a < state_dim_; ++a) dot += lambda[static_cast<std::size_t>(a)] * f_[s][a];
            tilt[static_cast<std::size_t>(s)] = std::exp(dot);
        }
        std::vector<double> v(static_cast<std::size_t>(k_), 1.0 / k_);
        double rho = 1.0;
        for (int iter = 0; iter < 200000; ++iter) {
            std::vector<double> w(static_cast<std::size_t>(k_), 0.0);
            for (int i = 0; i < k_; ++i) {
                for (int j = 0; j < k_; ++j) {
                    w[static_cast<std::size_t>(j)] += v[static_cast<std::size_t>(i)] * t_[i][j] *
                                                      tilt[static_cast<std::size_t>(j)];
                }
            }
            double norm = 0.0;
            for (double x : w) norm += x;
            const double rho_new = norm;  // since v sums to 1
            for (auto& x : w) x /= norm;
            v.swap(w);
            if (std::abs(rho_new - rho) <= 1e-15 * std::max(1.0, std::abs(rho_new)) && iter > 3) {
                return rho_new;
            }
            rho = rho_new;
        }
        return rho;
    }

    bool member(int s, const ConvexBody& body, double t, const std::vector<double>& shift) const {
        std::vector<double> y(static_cast<std::size_t>(state_dim_));
        for (int a = 0; a < state_dim_; ++a) y[static_cast<std::size_t>(a)] = f_[s][a] - shift[static_cast<std::size_t>(a)];
        return body.gauge(y) < t;
    }

    static int draw_index(const std::vector<double>& cum, RngStream& rng) {
        const double u = rng.uniform();
        return static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u,
                                                 [](double c, double uu) { return c <= uu; }) -
                                cum.begin());
    }

    std::vector<std::vector<double>> t_, f_;
    std::vector<std::vector<double>> cum_;
    std::vector<double> cum_pi_;
    std::vector<double> pi_;
    int k_ = 0;
};

}  // namespace

ModelPtr markov_model(const std::vector<std::vector<double>>& transition,
                      const std::vector<std::vector<double>>& observable) {
    if (observable.empty() || observable.front().empty()) {
        throw std::invalid_argument("fields: markov observable must be nonempty");
    }
    return std::make_shared<MarkovModel>(transition, observable);
}

}  // namespace ldlab
