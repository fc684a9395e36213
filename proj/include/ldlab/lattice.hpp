#pragma once
// Exact integer geometry of cubic boxes in Z^d and the gapped tiling of a box
// into sub-boxes plus marginal sites, with the marginal fraction kept as an
// exact rational.

#include <cstdint>
#include <vector>

#include <boost/rational.hpp>

namespace ldlab {

using Rational = boost::rational<long long>;

// Cubic region origin + [0, side)^d of Z^d. Sites are enumerated row-major
// (last coordinate fastest), which fixes the layout of sampled configurations.
struct LatticeBox {
    int dim = 1;
    long long side = 1;
    std::vector<long long> origin;  // size dim

    long long volume() const;                           // side^dim
    std::vector<long long> site(long long index) const; // index -> coordinates
    long long index_of(const std::vector<long long>& site) const;
    bool contains(const std::vector<long long>& site) const;
    bool contains_box(const LatticeBox& other) const;
    LatticeBox translated(const std::vector<long long>& shift) const;
};

// Box with the given side and dimension; origin defaults to 0.
LatticeBox make_box(int dim, long long side, std::vector<long long> origin = {});

// Minimal sup-norm distance between the site sets; 0 if the boxes intersect.
long long box_distance(const LatticeBox& a, const LatticeBox& b);

// Decomposition of a box of side n into q^d sub-boxes of side m placed at the
// corners of the (m+g)-tiling, plus the remaining marginal sites.
struct BoxPartition {
    long long m = 1;      // inner side
    long long gap = 0;    // g(m)
    long long n = 1;      // outer side
    int dim = 1;
    long long q = 0;      // n = q*(m+gap) + r
    long long r = 0;
    LatticeBox outer;
    std::vector<LatticeBox> sub_boxes;        // row-major over tile coordinates
    std::vector<long long> marginal_indices;  // flat indices into `outer`, sorted
    Rational rho;                             // |marginal| / n^d, exact

    long long marginal_count() const { return static_cast<long long>(marginal_indices.size()); }
};

BoxPartition adapted_partition(long long n, long long m, long long g_of_m, int dim,
                               std::vector<long long> origin = {});

// rho by the closed formula 1 - (1 - r/n)^d (1 - g/(m+g))^d, exact rational.
Rational marginal_fraction(long long n, long long m, long long g_of_m, int dim);

}  // namespace ldlab
