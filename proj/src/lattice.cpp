#include "ldlab/lattice.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ldlab {

namespace {

long long checked_pow(long long base, int exp) {
    long long out = 1;
    for (int i = 0; i < exp; ++i) {
        if (base != 0 && out > (1LL << 62) / std::max<long long>(base, 1)) {
            throw std::overflow_error("lattice: box volume exceeds 64-bit range");
        }
        out *= base;
    }
    return out;
}

}  // namespace

long long LatticeBox::volume() const { return checked_pow(side, dim); }

std::vector<long long> LatticeBox::site(long long index) const {
    std::vector<long long> coords(dim);
    for (int axis = dim - 1; axis >= 0; --axis) {
        coords[axis] = origin[axis] + index % side;
        index /= side;
    }
    return coords;
}

long long LatticeBox::index_of(const std::vector<long long>& s) const {
    long long index = 0;
    for (int axis = 0; axis < dim; ++axis) {
        index = index * side + (s[axis] - origin[axis]);
    }
    return index;
}

bool LatticeBox::contains(const std::vector<long long>& s) const {
    if (static_cast<int>(s.size()) != dim) return false;
    for (int axis = 0; axis < dim; ++axis) {
        if (s[axis] < origin[axis] || s[axis] >= origin[axis] + side) return false;
    }
    return true;
}

bool LatticeBox::contains_box(const LatticeBox& other) const {
    if (other.dim != dim) return false;
    for (int axis = 0; axis < dim; ++axis) {
        if (other.origin[axis] < origin[axis]) return false;
        if (other.origin[axis] + other.side > origin[axis] + side) return false;
    }
    return true;
}

LatticeBox LatticeBox::translated(const std::vector<long long>& shift) const {
    if (static_cast<int>(shift.size()) != dim) {
        throw std::invalid_argument("lattice: translation vector has wrong dimension");
    }
    LatticeBox out = *this;
    for (int axis = 0; axis < dim; ++axis) out.origin[axis] += shift[axis];
    return out;
}

LatticeBox make_box(int dim, long long side, std::vector<long long> origin) {
    if (dim < 1) throw std::invalid_argument("lattice: dimension must be >= 1, got " + std::to_string(dim));
    if (side < 1) throw std::invalid_argument("lattice: side must be >= 1, got " + std::to_string(side));
    if (origin.empty()) origin.assign(dim, 0);
    if (static_cast<int>(origin.size()) != dim) {
        throw std::invalid_argument("lattice: origin has wrong dimension");
    }
    LatticeBox box;
    box.dim = dim;
    box.side = side;
    box.origin = std::move(origin);
    box.volume();  // overflow guard
    return box;
}

long long box_distance(const LatticeBox& a, const LatticeBox& b) {
    if (a.dim != b.dim) throw std::invalid_argument("lattice: box dimensions differ");
    // For products of intervals the sup-norm distance is the max over axes of
    // the one-dimensional interval distances.
    long long dist = 0;
    for (int axis = 0; axis < a.dim; ++axis) {
        const long long a_lo = a.origin[axis], a_hi = a.origin[axis] + a.side - 1;
        const long long b_lo = b.origin[axis], b_hi = b.origin[axis] + b.side - 1;
        long long axis_gap = 0;
        if (b_lo > a_hi) axis_gap = b_lo - a_hi;
        else if (a_lo > b_hi) axis_gap = a_lo - b_hi;
        dist = std::max(dist, axis_gap);
    }
    return dist;
}

Rational marginal_fraction(long long n, long long m, long long g_of_m, int dim) {
    if (dim < 1) throw std::invalid_argument("lattice: dimension must be >= 1");
    if (m < 1 || m > n) throw std::invalid_argument("lattice: need 1 <= m <= n");
    if (g_of_m < 0) throw std::invalid_argument("lattice: gap must be >= 0");
    const long long tile = m + g_of_m;
    const long long r = n % tile;
    Rational covered(n - r, n);         // 1 - r/n
    covered *= Rational(m, tile);       // * (1 - g/(m+g))
    Rational frac = covered;
    for (int i = 1; i < dim; ++i) frac *= covered;
    return Rational(1) - frac;
}

BoxPartition adapted_partition(long long n, long long m, long long g_of_m, int dim,
                               std::vector<long long> origin) {
    if (dim < 1) throw std::invalid_argument("lattice: dimension must be >= 1");
    if (m < 1) throw std::invalid_argument("lattice: inner side must be >= 1");
    if (m > n) throw std::invalid_argument("lattice: inner side m exceeds outer side n");
    if (g_of_m < 0) throw std::invalid_argument("lattice: gap must be >= 0");

    BoxPartition part;
    part.m = m;
    part.gap = g_of_m;
    part.n = n;
    part.dim = dim;
    const long long tile = m + g_of_m;
    part.q = n / tile;
    part.r = n % tile;
    part.outer = make_box(dim, n, std::move(origin));

    // Sub-box k sits at the minimal corner of the k-th tile, row-major over
    // tile coordinates.
    const long long q = part.q;
    long long count = 1;
    for (int i = 0; i < dim; ++i) count *= q;
    part.sub_boxes.reserve(count);
    std::vector<long long> tile_coord(dim, 0);
    for (long long k = 0; k < count; ++k) {
        std::vector<long long> corner(dim);
        long long rem = k;
        for (int axis = dim - 1; axis >= 0; --axis) {
            corner[axis] = part.outer.origin[axis] + (rem % q) * tile;
            rem /= q;
        }
        part.sub_boxes.push_back(make_box(dim, m, std::move(corner)));
    }

    // Marginal sites: everything not covered by a sub-box. A site is covered
    // iff every coordinate lands in the first m cells of its tile and its tile
    // index is < q.
    const long long vol = part.outer.volume();
    for (long long idx = 0; idx < vol; ++idx) {
        long long rem = idx;
        bool covered = true;
        for (int axis = dim - 1; axis >= 0; --axis) {
            const long long c = rem % n;
            rem /= n;
            if (c / tile >= q || c % tile >= m) {
                covered = false;
                break;
            }
        }
        if (!covered) part.marginal_indices.push_back(idx);
    }

    part.rho = Rational(part.marginal_count(), vol);
    return part;
}

}  // namespace ldlab
