#include "ldlab/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "ldlab/rng.hpp"

namespace ldlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::atomic<int> g_threads{1};

// Runs work(i) for i in [0, N). Each call must write only to its own slots,
// so the thread layout cannot affect results; reductions stay sequential.
void parallel_replicas(long long N, const std::function<void(long long)>& work) {
    const int threads = static_cast<int>(std::min<long long>(g_threads.load(), std::max<long long>(N, 1)));
    if (threads <= 1) {
        for (long long i = 0; i < N; ++i) work(i);
        return;
    }
    std::atomic<long long> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&]() {
        constexpr long long kChunk = 64;
        for (;;) {
            const long long start = next.fetch_add(kChunk);
            if (start >= N) return;
            const long long stop = std::min(N, start + kChunk);
            try {
                for (long long i = start; i < stop; ++i) work(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct Kahan {
    double sum = 0.0, comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

long long checked_volume(const FieldModel& model, long long n) {
    if (n < 1) throw std::invalid_argument("estimators: box side must be >= 1");
    long long vol = 1;
    for (int i = 0; i < model.dimension(); ++i) {
        if (vol > (1LL << 40) / n) throw std::invalid_argument("estimators: box volume too large");
        vol *= n;
    }
    return vol;
}

// Smoothed binomial standard error (stays positive at 0 or N hits).
double wilson_sigma(long long hits, long long N) {
    const double nt = static_cast<double>(N) + 1.0;
    const double pt = (static_cast<double>(hits) + 0.5) / nt;
    return std::sqrt(pt * (1.0 - pt) / nt);
}

// All replica means of side-n boxes, flattened [replica * state_dim + a].
// Stream for replica i depends on (seed, n, i) only, so every estimator that
// shares (seed, n) sees the same samples (common random numbers).
std::vector<double> replica_means(const FieldModel& model, long long n, long long N, std::uint64_t seed) {
    checked_volume(model, n);
    const int sd = model.state_dim();
    const LatticeBox box = make_box(model.dimension(), n);
    std::vector<double> means(static_cast<std::size_t>(N) * sd);
    parallel_replicas(N, [&](long long i) {
        const Configuration c =
            model.sample(box, derive_seed(seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(i)));
        const std::vector<double> m = empirical_mean(c);
        std::memcpy(means.data() + static_cast<std::size_t>(i) * sd, m.data(), sizeof(double) * m.size());
    });
    return means;
}

bool mean_in_event(const ConvexBody& body, const double* mean, const std::vector<double>& center) {
    std::vector<double> y(center.size());
    for (std::size_t a = 0; a < center.size(); ++a) y[a] = mean[a] - center[a];
    return body.gauge(y) < 1.0;
}

EmpiricalEstimate pressure_from_weights(const std::vector<double>& w, double volume, long long N) {
    EmpiricalEstimate est;
    est.samples = N;
    double mx = -kInf;
    for (double x : w) mx = std::max(mx, x);
    if (!(mx > -kInf)) {
        est.value = -kInf;
        est.std_error = kNaN;
        est.zero_hits = true;
        return est;
    }
    long double total = 0.0L;
    for (double x : w) total += std::exp(static_cast<long double>(x - mx));
    const double lse = mx + static_cast<double>(std::log(total));
    est.value = (lse - std::log(static_cast<double>(N))) / volume;
    est.max_weight_fraction = std::exp(mx - lse);
    est.ess_warning = est.max_weight_fraction > 0.1;
    if (N < 2) {
        est.std_error = kNaN;
        return est;
    }
    // delete-one jackknife over the log-sum
    std::vector<double> theta(w.size());
    bool degenerate = false;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const long double rest = total - std::exp(static_cast<long double>(w[i] - mx));
        if (!(rest > 0.0L)) {
            degenerate = true;
            break;
        }
        theta[i] = (mx + static_cast<double>(std::log(rest)) - std::log(static_cast<double>(N - 1))) / volume;
    }
    if (degenerate) {
        est.std_error = kInf;
        est.ess_warning = true;
        return est;
    }
    Kahan mean_acc;
    for (double t : theta) mean_acc.add(t);
    const double tbar = mean_acc.sum / static_cast<double>(N);
    Kahan var_acc;
    for (double t : theta) var_acc.add((t - tbar) * (t - tbar));
    est.std_error = std::sqrt(var_acc.sum * static_cast<double>(N - 1) / static_cast<double>(N));
    return est;
}

// log of a probability estimate, rescaled by 1/volume (delta-method error).
EmpiricalEstimate log_scale(const EmpiricalEstimate& prob, double volume) {
    EmpiricalEstimate est = prob;
    if (prob.zero_hits || prob.value <= 0.0) {
        est.value = -kInf;
        est.std_error = kNaN;
        est.zero_hits = true;
        return est;
    }
    est.value = std::log(prob.value) / volume;
    est.std_error = prob.exact ? 0.0 : prob.std_error / prob.value / volume;
    return est;
}

}  // namespace

void set_thread_count(int threads) { g_threads.store(std::max(1, threads)); }
int thread_count() { return g_threads.load(); }

std::vector<double> empirical_mean(const Configuration& config, const LatticeBox& box) {
    if (!config.box.contains_box(box)) {
        throw std::invalid_argument("estimators: mean window must lie inside the sampled box");
    }
    const int sd = config.state_dim;
    const int d = box.dim;
    std::vector<long long> wstride(static_cast<std::size_t>(d)), cstride(static_cast<std::size_t>(d)),
        offset(static_cast<std::size_t>(d));
    long long ws = 1, cs = 1;
    for (int a = d - 1; a >= 0; --a) {
        wstride[static_cast<std::size_t>(a)] = ws;
        cstride[static_cast<std::size_t>(a)] = cs;
        ws *= box.side;
        cs *= config.box.side;
        offset[static_cast<std::size_t>(a)] =
            box.origin[static_cast<std::size_t>(a)] - config.box.origin[static_cast<std::size_t>(a)];
    }
    std::vector<Kahan> acc(static_cast<std::size_t>(sd));
    const long long vol = box.volume();
    for (long long i = 0; i < vol; ++i) {
        // odometer over the window, mapped to the sampled box's flat index
        long long rem = i, flat = 0;
        for (int a = 0; a < d; ++a) {
            const long long c = rem / wstride[static_cast<std::size_t>(a)];
            rem %= wstride[static_cast<std::size_t>(a)];
            flat += (offset[static_cast<std::size_t>(a)] + c) * cstride[static_cast<std::size_t>(a)];
        }
        const double* site = config.at(flat);
        for (int a = 0; a < sd; ++a) acc[static_cast<std::size_t>(a)].add(site[a]);
    }
    std::vector<double> mean(static_cast<std::size_t>(sd));
    for (int a = 0; a < sd; ++a) mean[static_cast<std::size_t>(a)] = acc[static_cast<std::size_t>(a)].sum / static_cast<double>(vol);
    return mean;
}

std::vector<double> empirical_mean(const Configuration& config) {
    const int sd = config.state_dim;
    std::vector<Kahan> acc(static_cast<std::size_t>(sd));
    const long long vol = config.box.volume();
    for (long long i = 0; i < vol; ++i) {
        const double* site = config.at(i);
        for (int a = 0; a < sd; ++a) acc[static_cast<std::size_t>(a)].add(site[a]);
    }
    std::vector<double> mean(static_cast<std::size_t>(sd));
    for (int a = 0; a < sd; ++a) mean[static_cast<std::size_t>(a)] = acc[static_cast<std::size_t>(a)].sum / static_cast<double>(vol);
    return mean;
}

EmpiricalEstimate box_probability(const FieldModel& model, long long n, const ConvexBody& body,
                                  const std::vector<double>& center, long long N, std::uint64_t seed,
                                  bool use_oracle) {
    if (body.dimension() != model.state_dim() || static_cast<int>(center.size()) != model.state_dim()) {
        throw std::invalid_argument("estimators: event dimension must match the model's state dimension");
    }
    if (use_oracle) {
        if (const auto exact = model.box_probability_oracle(n, body, center)) {
            EmpiricalEstimate est;
            est.value = *exact;
            est.std_error = 0.0;
            est.exact = true;
            est.zero_hits = *exact <= 0.0;
            return est;
        }
    }
    if (N < 1) throw std::invalid_argument("estimators: need at least one replica");
    const std::vector<double> means = replica_means(model, n, N, seed);
    const int sd = model.state_dim();
    long long hits = 0;
    for (long long i = 0; i < N; ++i) {
        if (mean_in_event(body, means.data() + static_cast<std::size_t>(i) * sd, center)) ++hits;
    }
    EmpiricalEstimate est;
    est.samples = N;
    est.hit_count = hits;
    est.value = static_cast<double>(hits) / static_cast<double>(N);
    est.std_error = wilson_sigma(hits, N);
    est.zero_hits = hits == 0;
    return est;
}

EmpiricalEstimate entropy_estimate(const FieldModel& model, long long n, const std::vector<double>& x,
                                   double eps, long long N, std::uint64_t seed) {
    if (static_cast<int>(x.size()) != model.state_dim()) {
        throw std::invalid_argument("estimators: target mean has wrong dimension");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("estimators: window eps must be positive");
    if (N < 1) throw std::invalid_argument("estimators: need at least one replica");
    const double volume = static_cast<double>(checked_volume(model, n));
    const ConvexBody window = ConvexBody::ball(model.state_dim(), eps);
    const std::vector<double> means = replica_means(model, n, N, seed);
    const int sd = model.state_dim();
    long long hits = 0;
    for (long long i = 0; i < N; ++i) {
        if (mean_in_event(window, means.data() + static_cast<std::size_t>(i) * sd, x)) ++hits;
    }
    EmpiricalEstimate est;
    est.samples = N;
    est.hit_count = hits;
    if (hits == 0) {
        est.value = -kInf;
        est.std_error = kNaN;
        est.zero_hits = true;
        return est;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(N);
    est.value = std::log(p) / volume;
    est.std_error = std::sqrt((1.0 - p) / (p * static_cast<double>(N))) / volume;
    return est;
}

std::vector<EmpiricalEstimate> pressure_curve(const FieldModel& model, long long n,
                                              const std::vector<std::vector<double>>& lambdas, long long N,
                                              std::uint64_t seed) {
    if (N < 1) throw std::invalid_argument("estimators: need at least one replica");
    const double volume = static_cast<double>(checked_volume(model, n));
    const int sd = model.state_dim();
    for (const auto& l : lambdas) {
        if (static_cast<int>(l.size()) != sd) {
            throw std::invalid_argument("estimators: lambda has wrong dimension");
        }
    }
    const std::vector<double> means = replica_means(model, n, N, seed);
    std::vector<EmpiricalEstimate> out;
    out.reserve(lambdas.size());
    std::vector<double> w(static_cast<std::size_t>(N));
    for (const auto& lambda : lambdas) {
        for (long long i = 0; i < N; ++i) {
            double dot = 0.0;
            for (int a = 0; a < sd; ++a) dot += lambda[static_cast<std::size_t>(a)] * means[static_cast<std::size_t>(i) * sd + a];
            w[static_cast<std::size_t>(i)] = volume * dot;
        }
        out.push_back(pressure_from_weights(w, volume, N));
    }
    return out;
}

EmpiricalEstimate pressure_estimate(const FieldModel& model, long long n, const std::vector<double>& lambda,
                                    long long N, std::uint64_t seed) {
    return pressure_curve(model, n, {lambda}, N, seed).front();
}

DecouplingResult decoupling_check(const FieldModel& model, long long m, long long gap,
                                  const ConvexBody& body_a, const std::vector<double>& center_a,
                                  const ConvexBody& body_b, const std::vector<double>& center_b,
                                  long long N, std::uint64_t seed) {
    if (m < 1 || gap < 0) throw std::invalid_argument("estimators: decoupling needs m >= 1, gap >= 0");
    if (N < 1) throw std::invalid_argument("estimators: need at least one replica");
    const int d = model.dimension();
    const long long outer_side = 2 * m + gap;
    checked_volume(model, outer_side);
    const LatticeBox outer = make_box(d, outer_side);
    std::vector<long long> origin_b(static_cast<std::size_t>(d), 0);
    origin_b[0] = m + gap;
    const LatticeBox box_a_lat = make_box(d, m);
    const LatticeBox box_b_lat = make_box(d, m, origin_b);

    std::vector<std::uint8_t> ia(static_cast<std::size_t>(N)), ib(static_cast<std::size_t>(N));
    parallel_replicas(N, [&](long long i) {
        const Configuration c = model.sample(
            outer, derive_seed(seed, static_cast<std::uint64_t>(outer_side), static_cast<std::uint64_t>(i)));
        const std::vector<double> mean_a = empirical_mean(c, box_a_lat);
        const std::vector<double> mean_b = empirical_mean(c, box_b_lat);
        ia[static_cast<std::size_t>(i)] = mean_in_event(body_a, mean_a.data(), center_a) ? 1 : 0;
        ib[static_cast<std::size_t>(i)] = mean_in_event(body_b, mean_b.data(), center_b) ? 1 : 0;
    });

    DecouplingResult res;
    res.samples = N;
    res.m = m;
    res.gap = gap;
    const DecouplingDecl decl = model.decoupling(m);
    res.c_declared = decl.c;
    for (long long i = 0; i < N; ++i) {
        res.hits_a += ia[static_cast<std::size_t>(i)];
        res.hits_b += ib[static_cast<std::size_t>(i)];
        res.hits_ab += ia[static_cast<std::size_t>(i)] & ib[static_cast<std::size_t>(i)];
    }
    res.p_a = static_cast<double>(res.hits_a) / static_cast<double>(N);
    res.p_b = static_cast<double>(res.hits_b) / static_cast<double>(N);
    res.p_ab = static_cast<double>(res.hits_ab) / static_cast<double>(N);
    if (res.hits_a == 0 || res.hits_b == 0 || res.hits_ab == 0) {
        res.degenerate = true;
        res.delta = res.hits_ab == 0 ? -kInf : kNaN;
        res.sigma = kNaN;
        res.pass = false;
        return res;
    }
    res.delta = std::log(res.p_ab) - std::log(res.p_a) - std::log(res.p_b);
    // influence function of log p_ab - log p_a - log p_b
    Kahan acc, acc2;
    for (long long i = 0; i < N; ++i) {
        const double h = static_cast<double>(ia[static_cast<std::size_t>(i)] & ib[static_cast<std::size_t>(i)]) / res.p_ab -
                         static_cast<double>(ia[static_cast<std::size_t>(i)]) / res.p_a -
                         static_cast<double>(ib[static_cast<std::size_t>(i)]) / res.p_b;
        acc.add(h);
    }
    const double hbar = acc.sum / static_cast<double>(N);
    for (long long i = 0; i < N; ++i) {
        const double h = static_cast<double>(ia[static_cast<std::size_t>(i)] & ib[static_cast<std::size_t>(i)]) / res.p_ab -
                         static_cast<double>(ia[static_cast<std::size_t>(i)]) / res.p_a -
                         static_cast<double>(ib[static_cast<std::size_t>(i)]) / res.p_b;
        acc2.add((h - hbar) * (h - hbar));
    }
    res.sigma = std::sqrt(acc2.sum / static_cast<double>(N - 1) / static_cast<double>(N));
    res.pass = res.delta >= -res.c_declared - 3.0 * res.sigma;
    return res;
}

LocalControlResult local_control_check(const FieldModel& model, const ConvexBody& body, long long N,
                                       std::uint64_t seed) {
    if (model.state_dim() != 1 || body.dimension() != 1) {
        throw std::invalid_argument("estimators: the local-control check needs a scalar site observable");
    }
    if (N < 1) throw std::invalid_argument("estimators: need at least one replica");
    LocalControlResult res;
    const std::vector<double> zero_shift{0.0};
    const auto decl = model.local_control(body, zero_shift);
    res.declared = decl.has_value();
    res.t = decl ? decl->t : 1.0;
    res.alpha = decl ? decl->alpha : 0.0;

    const auto obs = model.conditional_observations(N, derive_seed(seed, 0x10caULL));
    std::map<long long, std::pair<long long, long long>> bins;  // key -> (count, hits)
    for (const auto& o : obs) {
        auto& slot = bins[o.bin];
        ++slot.first;
        if (body.gauge({o.value}) < res.t) ++slot.second;
    }
    constexpr long long kMinBinCount = 30;
    res.min_freq = kInf;
    bool all_pass = true;
    for (const auto& [key, slot] : bins) {
        LocalControlBin bin;
        bin.key = key;
        bin.label = model.bin_label(key);
        bin.count = slot.first;
        bin.hits = slot.second;
        bin.freq = static_cast<double>(bin.hits) / static_cast<double>(bin.count);
        bin.sigma = wilson_sigma(bin.hits, bin.count);
        bin.exact = model.conditional_oracle(key, body, res.t, zero_shift);
        if (bin.count < kMinBinCount) {
            ++res.empty_bins;
            bin.pass = true;  // not enough data to test this bin
        } else {
            res.min_freq = std::min(res.min_freq, bin.freq);
            bool ok = true;
            if (res.declared) ok = bin.freq >= res.alpha - 3.0 * bin.sigma;
            if (bin.exact) ok = ok && std::abs(bin.freq - *bin.exact) <= 3.0 * bin.sigma;
            bin.pass = ok;
            all_pass = all_pass && ok;
        }
        res.bins.push_back(std::move(bin));
    }
    if (res.min_freq == kInf) res.min_freq = 0.0;
    res.pass = all_pass;
    return res;
}

SubadditivityResult subadditivity_check(const FieldModel& model, const std::vector<double>& x,
                                        const ConvexBody& body, double eps, long long m, long long n,
                                        long long N, std::uint64_t seed) {
    if (static_cast<int>(x.size()) != model.state_dim() || body.dimension() != model.state_dim()) {
        throw std::invalid_argument("estimators: event dimension must match the model's state dimension");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("estimators: window eps must be positive");
    if (m < 1 || n < m) throw std::invalid_argument("estimators: need 1 <= m <= n");
    SubadditivityResult res;
    res.m = m;
    res.n = n;
    res.eps = eps;

    const DecouplingDecl dec = model.decoupling(m);
    const BoxPartition part = adapted_partition(n, m, dec.g, model.dimension());
    res.rho = part.rho;
    const double rho = boost::rational_cast<double>(part.rho);
    res.c_term = dec.c / std::pow(static_cast<double>(m), model.dimension());

    const auto control = model.local_control(body, x);
    res.control_declared = control.has_value();
    if (control) {
        res.t = control->t;
        res.alpha = control->alpha;
    }
    res.threshold_ok = rho == 0.0 || (res.control_declared && eps / rho >= res.t);
    res.alpha_term = (rho == 0.0 || !res.control_declared) ? 0.0 : rho * std::log(res.alpha);

    const double vol_m = std::pow(static_cast<double>(m), model.dimension());
    const double vol_n = std::pow(static_cast<double>(n), model.dimension());
    res.inner = log_scale(box_probability(model, m, body, x, N, seed), vol_m);
    res.lhs = log_scale(box_probability(model, n, body.scaled(1.0 + eps), x, N, seed), vol_n);
    res.exact = res.inner.exact && res.lhs.exact;

    if (res.inner.zero_hits) {
        res.skipped = true;
        res.rhs = -kInf;
        res.margin = kInf;
        res.sigma = kNaN;
        res.pass = res.threshold_ok;  // the bound is vacuous without inner hits
        return res;
    }
    res.rhs = res.inner.value - res.c_term + res.alpha_term;
    res.margin = res.lhs.value - res.rhs;
    const double s_lhs = std::isfinite(res.lhs.std_error) ? res.lhs.std_error : 0.0;
    const double s_inner = std::isfinite(res.inner.std_error) ? res.inner.std_error : 0.0;
    res.sigma = std::sqrt(s_lhs * s_lhs + s_inner * s_inner);
    res.pass = res.threshold_ok && res.margin >= -3.0 * res.sigma - 1e-9;
    return res;
}

DualityReport duality_check(const FieldModel& model, const std::vector<double>& x_grid,
                            const std::vector<double>& lambda_grid, const std::vector<long long>& n_ladder,
                            double eps, long long N, std::uint64_t seed) {
    if (model.state_dim() != 1) {
        throw std::invalid_argument("estimators: the duality report needs a scalar site observable");
    }
    if (x_grid.empty() || lambda_grid.size() < 2 || n_ladder.empty()) {
        throw std::invalid_argument("estimators: duality needs nonempty grids (>= 2 lambda nodes)");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("estimators: window eps must be positive");
    if (N < 1) throw std::invalid_argument("estimators: need at least one replica");
    DualityReport rep;
    rep.model = model.name();
    rep.n_ladder = n_ladder;
    rep.x_grid = x_grid;
    rep.lambda_grid = lambda_grid;
    rep.eps = eps;
    rep.seed = seed;

    const ConvexBody window = ConvexBody::ball(1, eps);
    for (const long long n : n_ladder) {
        const double volume = static_cast<double>(checked_volume(model, n));
        const std::vector<double> means = replica_means(model, n, N, seed);

        std::vector<EmpiricalEstimate> pressures;
        pressures.reserve(lambda_grid.size());
        std::vector<double> w(static_cast<std::size_t>(N));
        for (const double lambda : lambda_grid) {
            for (long long i = 0; i < N; ++i) w[static_cast<std::size_t>(i)] = volume * lambda * means[static_cast<std::size_t>(i)];
            pressures.push_back(pressure_from_weights(w, volume, N));
        }
        std::vector<EmpiricalEstimate> entropies;
        entropies.reserve(x_grid.size());
        for (const double x : x_grid) {
            long long hits = 0;
            for (long long i = 0; i < N; ++i) {
                if (window.gauge({means[static_cast<std::size_t>(i)] - x}) < 1.0) ++hits;
            }
            EmpiricalEstimate est;
            est.samples = N;
            est.hit_count = hits;
            if (hits == 0) {
                est.value = -kInf;
                est.std_error = kNaN;
                est.zero_hits = true;
            } else {
                const double p = static_cast<double>(hits) / static_cast<double>(N);
                est.value = std::log(p) / volume;
                est.std_error = std::sqrt((1.0 - p) / (p * static_cast<double>(N))) / volume;
            }
            entropies.push_back(est);
        }

        for (std::size_t xi = 0; xi < x_grid.size(); ++xi) {
            for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
                DualityRow row;
                row.n = n;
                row.x = x_grid[xi];
                row.lambda = lambda_grid[li];
                row.pressure = pressures[li].value;
                row.pressure_sigma = pressures[li].std_error;
                row.entropy = entropies[xi].value;
                row.entropy_sigma = entropies[xi].std_error;
                row.entropy_zero_hits = entropies[xi].zero_hits;
                row.slack = std::abs(row.lambda) * eps;
                if (row.entropy_zero_hits) {
                    row.margin = kInf;
                    row.tolerance = row.slack;
                    row.pass = true;  // no finite lower bound to violate
                } else {
                    row.margin = row.pressure - row.entropy - row.lambda * row.x;
                    const double sp = std::isfinite(row.pressure_sigma) ? row.pressure_sigma : 0.0;
                    const double se = std::isfinite(row.entropy_sigma) ? row.entropy_sigma : 0.0;
                    row.tolerance = row.slack + 3.0 * std::sqrt(sp * sp + se * se);
                    row.pass = row.margin >= -row.tolerance;
                }
                if (!row.pass) ++rep.failed_rows;
                rep.rows.push_back(row);
            }
        }

        // conjugate route: -(p-hat)* on the x grid against the entropy ladder
        GridFunction phat;
        phat.axes = {lambda_grid};
        phat.values.reserve(lambda_grid.size());
        for (const auto& p : pressures) phat.values.push_back(p.value);
        const GridFunction conj = legendre_transform(phat, {x_grid});
        DualityConjugateGap gap;
        gap.n = n;
        for (std::size_t xi = 0; xi < x_grid.size(); ++xi) {
            const double s_conj = -conj.values[xi];
            if (!entropies[xi].zero_hits) {
                ++gap.usable_points;
                gap.sup_gap_vs_entropy = std::max(gap.sup_gap_vs_entropy, std::abs(s_conj - entropies[xi].value));
            }
            if (const auto s_star = model.entropy_oracle({x_grid[xi]})) {
                if (std::isfinite(*s_star)) {
                    if (gap.sup_gap_vs_oracle < 0.0) gap.sup_gap_vs_oracle = 0.0;
                    gap.sup_gap_vs_oracle = std::max(gap.sup_gap_vs_oracle, std::abs(s_conj - *s_star));
                }
            }
        }
        rep.conjugate_gaps.push_back(gap);
    }

    // oracle route: conjugate the exact pressure on the lambda grid and
    // compare with the exact entropy on the x grid
    bool have_oracles = model.pressure_oracle({lambda_grid.front()}).has_value();
    for (const double x : x_grid) {
        if (!model.entropy_oracle({x})) have_oracles = false;
    }
    if (have_oracles) {
        GridFunction pgrid;
        pgrid.axes = {lambda_grid};
        pgrid.values.reserve(lambda_grid.size());
        for (const double lambda : lambda_grid) {
            const auto p = model.pressure_oracle({lambda});
            if (!p) {
                have_oracles = false;
                break;
            }
            pgrid.values.push_back(*p);
        }
        if (have_oracles) {
            rep.oracle_route_available = true;
            const GridFunction conj = legendre_transform(pgrid, {x_grid});
            for (std::size_t xi = 0; xi < x_grid.size(); ++xi) {
                const double s_exact = *model.entropy_oracle({x_grid[xi]});
                if (!std::isfinite(s_exact)) continue;
                rep.oracle_route_gap = std::max(rep.oracle_route_gap, std::abs(-conj.values[xi] - s_exact));
            }
            rep.oracle_route_pass = rep.oracle_route_gap <= rep.oracle_route_tolerance;
        }
    }
    rep.pass = rep.failed_rows == 0 && (!rep.oracle_route_available || rep.oracle_route_pass);
    return rep;
}

}  // namespace ldlab
