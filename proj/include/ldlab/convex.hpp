#pragma once
// Convex bodies given by their Minkowski gauge, tabulated functions on
// rectangular grids, the discrete Legendre-Fenchel transform with
// biconjugation, and deterministic limit utilities for subadditive sequences
// and largest-term sums.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ldlab {

// A bounded convex set C with 0 in its (closed) interior, represented by its
// gauge M_C(x) = inf{t >= 0 : x in tC}. Membership in the open body is
// gauge(x) < 1. Kinds: ball (Euclidean, radius may be +inf), axis box given
// by halfwidths, polytope as a vertex list, and a translate of another body.
class ConvexBody {
  public:
    enum class Kind { ball, box, polytope, translate };

    static ConvexBody ball(int dim, double radius);
    static ConvexBody box(std::vector<double> halfwidths);
    static ConvexBody polytope(int dim, std::vector<std::vector<double>> vertices);
    // Shifted body shift + base; requires that 0 stays in the interior
    // (gauge_base(-shift) < 1), otherwise the gauge would not define the set.
    static ConvexBody translate(std::vector<double> shift, ConvexBody base);

    int dimension() const { return dim_; }
    Kind kind() const { return kind_; }
    std::string describe() const;

    // The body scaled by factor > 0 about the origin (gauge divided by factor).
    ConvexBody scaled(double factor) const;

    // Exact for ball/box; bisection on membership for polytope/translate
    // (absolute tolerance 1e-10).
    double gauge(const std::vector<double>& x) const;
    bool contains(const std::vector<double>& x) const { return gauge(x) < 1.0; }

  private:
    ConvexBody() = default;
    bool member_closed(const std::vector<double>& x, double t) const;

    Kind kind_ = Kind::ball;
    int dim_ = 1;
    double radius_ = 1.0;                            // ball
    std::vector<double> halfwidths_;                 // box
    std::vector<std::vector<double>> vertices_;      // polytope
    std::vector<double> shift_;                      // translate
    std::vector<ConvexBody> base_;                   // translate (single element)
};

// Real function tabulated on a rectangular grid; values may be +inf (point
// excluded from suprema) or -inf (makes the conjugate identically +inf).
struct GridFunction {
    std::vector<std::vector<double>> axes;  // strictly increasing, >= 2 nodes each
    std::vector<double> values;             // row-major, last axis fastest

    int dimension() const { return static_cast<int>(axes.size()); }
    std::size_t node_count() const;
    std::vector<double> node(std::size_t flat) const;
    void validate() const;  // throws std::invalid_argument on malformed grids

    static std::vector<double> uniform_axis(double lo, double hi, std::size_t count);
};

// CSV interchange: header "x0,...,x{D-1},value", one node per row in storage
// order; +-inf serialized as "inf"/"-inf".
void write_grid_csv(const GridFunction& f, std::ostream& out);
void write_grid_csv(const GridFunction& f, const std::string& path);
GridFunction read_grid_csv(std::istream& in);
GridFunction read_grid_csv_file(const std::string& path);

// f*(l) = max over grid nodes x of <l,x> - f(x), tabulated on dual_axes.
// 1D uses monotone-argmax divide and conquer and agrees exactly with the
// direct scan; higher dimensions use the direct scan.
GridFunction legendre_transform(const GridFunction& f, const std::vector<std::vector<double>>& dual_axes);

// f** on the grid of f, with the dual grid chosen automatically from the
// discrete slope range (padded 10%; in 1D the exact hull slopes are included
// so piecewise-linear convex functions are recovered exactly at the nodes).
GridFunction biconjugate(const GridFunction& f);

// Automatic dual axes used by biconjugate; exposed for reporting.
std::vector<std::vector<double>> auto_dual_axes(const GridFunction& f);

struct FeketeResult {
    double inf_ratio;        // min over n <= n_max of u(n)/n (the limit value)
    long long argmin_n;
    double tail_ratio;       // u(n_max)/n_max
    bool subadditive;        // exhaustive check of u(i+j) <= u(i)+u(j)
    long long violation_i = 0, violation_j = 0;  // first violation when not subadditive
    bool controlled;         // u(n) finite for all n >= controlled_from
    long long controlled_from = 0;
};

// Checks subadditivity exhaustively for i + j <= n_max and reports the
// Fekete limit inf u(n)/n together with the tail value.
FeketeResult fekete_limit(const std::function<double(long long)>& u, long long n_max);

struct LargestTermResult {
    std::vector<std::vector<double>> per_term;  // a_i(n), echoed
    std::vector<double> combined;               // (1/n) log sum_i exp(n a_i(n))
    std::vector<double> max_term;               // max_i a_i(n)
    double gap_bound_at(long long n) const;     // log(r)/n
    std::size_t term_count = 0;
    bool identity_ok = true;   // combined in [max, max + log(r)/n] within 1e-9 at every n
    double worst_excess = 0.0; // largest violation of the bracket, for reporting
};

// Exponential growth rate of a finite sum via log-sum-exp; terms may be -inf.
LargestTermResult largest_term(const std::vector<std::vector<double>>& log_terms);

}  // namespace ldlab
