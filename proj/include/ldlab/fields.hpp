#pragma once
// Translation-invariant lattice field samplers. Each model declares its
// decoupling parameters (g, c), a local-control pair (t, alpha) where it can
// compute one, optional convex truncation sets, and exact oracles (pressure,
// entropy, event probability) where closed forms exist.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ldlab/convex.hpp"
#include "ldlab/lattice.hpp"

namespace ldlab {

// One sampled field on a box; values are stored site-major in the box's
// enumeration order, state_dim reals per site.
struct Configuration {
    LatticeBox box;
    int state_dim = 1;
    std::vector<double> values;  // size volume * state_dim

    const double* at(long long flat_index) const { return values.data() + flat_index * state_dim; }
    double scalar_at(long long flat_index) const { return values[flat_index * state_dim]; }
};

struct DecouplingDecl {
    long long g = 0;    // separation beyond which the product bound is declared
    double c = 0.0;     // log-defect constant c(m)
    bool exact = true;  // true when (g,c)=(0,0) holds exactly (i.i.d. models)
};

struct LocalControlDecl {
    double t = 1.0;            // scale factor applied to the body
    double alpha = 0.5;        // uniform conditional lower bound for {site value in t*C}
    double captured_mass = 1.0;  // actual worst-case conditional mass of t*C
};

// One conditional observation of a single site: the realized value together
// with a finite bin key describing its conditioning neighborhood.
struct ConditionalObs {
    long long bin = 0;
    double value = 0.0;
};

class FieldModel {
  public:
    virtual ~FieldModel() = default;

    const std::string& name() const { return name_; }
    int dimension() const { return dim_; }
    int state_dim() const { return state_dim_; }

    // One configuration on `box`; bit-reproducible from (model params, box, seed).
    Configuration sample(const LatticeBox& box, std::uint64_t seed) const;

    // True when a single site takes finitely many values; such models bin
    // conditional observations by an integer neighborhood statistic.
    virtual bool finite_state() const { return false; }

    // Declared decoupling parameters at inner side m.
    virtual DecouplingDecl decoupling(long long m) const = 0;

    // Declared (t, alpha) for the event {site value - shift in t*C}, or nullopt
    // when the model cannot certify one. t is the smallest power of two whose
    // scaled body captures conditional mass >= 1/2; alpha is the worst-case
    // conditional mass actually captured (>= 1/2 by construction).
    virtual std::optional<LocalControlDecl>
    local_control(const ConvexBody& body, const std::vector<double>& shift) const;

    std::optional<LocalControlDecl> local_control(const ConvexBody& body) const {
        return local_control(body, std::vector<double>(state_dim_, 0.0));
    }

    // Convex set carrying conditional mass >= 1-gamma at a single site, or
    // nullopt. Exact (mass 1) for bounded-state models; for the Gaussian model
    // a centered quantile ball is used.
    virtual std::optional<ConvexBody> truncation(double gamma) const;

    // Exact oracles; nullopt when no closed form is available.
    virtual std::optional<double> pressure_oracle(const std::vector<double>& lambda) const;
    virtual std::optional<double> entropy_oracle(const std::vector<double>& x) const;
    // (1/n^d) log E exp(n^d <lambda, mean>) at finite n, exact.
    virtual std::optional<double> finite_pressure_oracle(long long n, const std::vector<double>& lambda) const;
    // P(empirical mean of the side-n box lies in center + body), exact.
    virtual std::optional<double>
    box_probability_oracle(long long n, const ConvexBody& body, const std::vector<double>& center) const;

    // N single-site conditional observations binned by a finite conditioning
    // statistic (neighbor sum for spin models, neighbor state pair for chains,
    // bin 0 for i.i.d. models). Used by the local-control check.
    virtual std::vector<ConditionalObs> conditional_observations(long long count, std::uint64_t seed) const;

    // Human-readable label for a conditioning bin key.
    virtual std::string bin_label(long long bin) const;

    // Exact conditional P(site value in t*C - shift | bin), where the model
    // can compute it (finite-state models); used to cross-check the bins.
    virtual std::optional<double> conditional_oracle(long long bin, const ConvexBody& body, double t,
                                                     const std::vector<double>& shift) const;

  protected:
    FieldModel(std::string name, int dim, int state_dim)
        : name_(std::move(name)), dim_(dim), state_dim_(state_dim) {}

    virtual Configuration sample_impl(const LatticeBox& box, std::uint64_t seed) const = 0;

    std::string name_;
    int dim_ = 1;
    int state_dim_ = 1;
};

using ModelPtr = std::shared_ptr<const FieldModel>;

// i.i.d. site distributions.
struct BernoulliDist { double p; };            // values {0,1}
struct SpinDist { double p; };                 // values {-1,+1}, P(+1)=p
struct GaussianDist { double mean, var; };
struct UniformDist { double a, b; };

ModelPtr iid_model(BernoulliDist dist, int dim);
ModelPtr iid_model(SpinDist dist, int dim);
ModelPtr iid_model(GaussianDist dist, int dim);
ModelPtr iid_model(UniformDist dist, int dim);

// 1D Ising chain (spins +-1, inverse temperature beta, external field h),
// sampled exactly as the stationary two-state Markov chain induced by the
// transfer matrix; oracles use the leading transfer-matrix eigenvalue.
ModelPtr ising1d_model(double beta, double h);

// 2D Ising on a torus of side n + padding via sequential-scan heat-bath
// updates, restricted to the requested box. The only approximate sampler in
// the collection (finite burn-in), which its documentation flags.
ModelPtr ising2d_model(double beta, int burn_in = 200, int thinning = 10);

// Stationary finite-state chain in one dimension with a vector observable;
// rejects reducible or periodic transition matrices.
ModelPtr markov_model(const std::vector<std::vector<double>>& transition,
                      const std::vector<std::vector<double>>& observable);

}  // namespace ldlab
