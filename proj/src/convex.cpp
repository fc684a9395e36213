#include "ldlab/convex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ldlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGaugeTol = 1e-10;   // bisection tolerance on the gauge
constexpr double kGaugeCap = 1e15;    // scales beyond this count as +inf
constexpr double kLpTol = 1e-11;      // simplex feasibility tolerance

double norm2(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

// Phase-I simplex: is p a convex combination of the given vertices?
// Solves for w >= 0 with sum w = 1 and V^T w = p by minimizing artificials.
bool in_convex_hull(const std::vector<std::vector<double>>& verts, const std::vector<double>& p) {
    const int dim = static_cast<int>(p.size());
    const int rows = dim + 1;
    const int nv = static_cast<int>(verts.size());
    const int cols = nv + rows;  // vertex weights + one artificial per row

    // tableau[r] = [coefficients..., rhs]; rhs made nonnegative row by row
    std::vector<std::vector<double>> tab(rows, std::vector<double>(cols + 1, 0.0));
    for (int r = 0; r < rows; ++r) {
        double rhs = (r < dim) ? p[r] : 1.0;
        for (int j = 0; j < nv; ++j) tab[r][j] = (r < dim) ? verts[j][r] : 1.0;
        if (rhs < 0.0) {
            for (int j = 0; j < nv; ++j) tab[r][j] = -tab[r][j];
            rhs = -rhs;
        }
        tab[r][nv + r] = 1.0;
        tab[r][cols] = rhs;
    }

    // reduced costs for objective = sum of artificials
    std::vector<double> cost(cols + 1, 0.0);
    for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < nv; ++j) cost[j] -= tab[r][j];
        cost[cols] -= tab[r][cols];
    }
    std::vector<int> basis(rows);
    for (int r = 0; r < rows; ++r) basis[r] = nv + r;

    for (int iter = 0; iter < 10000; ++iter) {
        int enter = -1;  // Bland's rule: first improving column
        for (int j = 0; j < cols; ++j) {
            if (cost[j] < -kLpTol) { enter = j; break; }
        }
        if (enter < 0) break;
        int leave = -1;
        double best = kInf;
        for (int r = 0; r < rows; ++r) {
            if (tab[r][enter] > kLpTol) {
                const double ratio = tab[r][cols] / tab[r][enter];
                if (ratio < best - kLpTol || (ratio < best + kLpTol && (leave < 0 || basis[r] < basis[leave]))) {
                    best = ratio;
                    leave = r;
                }
            }
        }
        if (leave < 0) break;  // unbounded cannot happen in Phase I
        const double piv = tab[leave][enter];
        for (int j = 0; j <= cols; ++j) tab[leave][j] /= piv;
        for (int r = 0; r < rows; ++r) {
            if (r == leave || std::abs(tab[r][enter]) < 1e-300) continue;
            const double f = tab[r][enter];
            for (int j = 0; j <= cols; ++j) tab[r][j] -= f * tab[leave][j];
        }
        const double fc = cost[enter];
        for (int j = 0; j <= cols; ++j) cost[j] -= fc * tab[leave][j];
        basis[leave] = enter;
    }
    return -cost[cols] < 1e-9;  // objective value ~ 0 <=> feasible
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ConvexBody ConvexBody::ball(int dim, double radius) {
    if (dim < 1) throw std::invalid_argument("convex: ball dimension must be >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("convex: ball radius must be positive");
    ConvexBody b;
    b.kind_ = Kind::ball;
    b.dim_ = dim;
    b.radius_ = radius;
    return b;
}

ConvexBody ConvexBody::box(std::vector<double> halfwidths) {
    if (halfwidths.empty()) throw std::invalid_argument("convex: box needs at least one halfwidth");
    for (double w : halfwidths) {
        if (!(w > 0.0)) throw std::invalid_argument("convex: box halfwidths must be positive");
    }
    ConvexBody b;
    b.kind_ = Kind::box;
    b.dim_ = static_cast<int>(halfwidths.size());
    b.halfwidths_ = std::move(halfwidths);
    return b;
}

ConvexBody ConvexBody::polytope(int dim, std::vector<std::vector<double>> vertices) {
    if (dim < 1) throw std::invalid_argument("convex: polytope dimension must be >= 1");
    if (vertices.empty()) throw std::invalid_argument("convex: polytope needs vertices");
    for (const auto& v : vertices) {
        if (static_cast<int>(v.size()) != dim) {
            throw std::invalid_argument("convex: polytope vertex has wrong dimension");
        }
    }
    ConvexBody b;
    b.kind_ = Kind::polytope;
    b.dim_ = dim;
    b.vertices_ = std::move(vertices);
    if (!b.member_closed(std::vector<double>(dim, 0.0), 1.0)) {
        throw std::invalid_argument("convex: polytope must contain the origin");
    }
    return b;
}

ConvexBody ConvexBody::translate(std::vector<double> shift, ConvexBody base) {
    if (static_cast<int>(shift.size()) != base.dim_) {
        throw std::invalid_argument("convex: translation vector has wrong dimension");
    }
    std::vector<double> neg(shift.size());
    for (std::size_t i = 0; i < shift.size(); ++i) neg[i] = -shift[i];
    if (!(base.gauge(neg) < 1.0)) {
        throw std::invalid_argument("convex: translate would move the origin out of the body");
    }
    ConvexBody b;
    b.kind_ = Kind::translate;
    b.dim_ = base.dim_;
    b.shift_ = std::move(shift);
    b.base_.push_back(std::move(base));
    return b;
}

ConvexBody ConvexBody::scaled(double factor) const {
    if (!(factor > 0.0)) throw std::invalid_argument("convex: scale factor must be positive");
    switch (kind_) {
        case Kind::ball: return ball(dim_, radius_ * factor);
        case Kind::box: {
            std::vector<double> w = halfwidths_;
            for (double& v : w) v *= factor;
            return box(std::move(w));
        }
        case Kind::polytope: {
            std::vector<std::vector<double>> verts = vertices_;
            for (auto& v : verts) {
                for (double& c : v) c *= factor;
            }
            return polytope(dim_, std::move(verts));
        }
        case Kind::translate: {
            std::vector<double> s = shift_;
            for (double& c : s) c *= factor;
            return translate(std::move(s), base_[0].scaled(factor));
        }
    }
    throw std::logic_error("convex: unknown body kind");
}

std::string ConvexBody::describe() const {
    std::ostringstream out;
    switch (kind_) {
        case Kind::ball: out << "ball(r=" << format_double(radius_) << ")"; break;
        case Kind::box: {
            out << "box(";
            for (std::size_t i = 0; i < halfwidths_.size(); ++i) {
                out << (i ? "," : "") << format_double(halfwidths_[i]);
            }
            out << ")";
            break;
        }
        case Kind::polytope: out << "polytope(" << vertices_.size() << " vertices)"; break;
        case Kind::translate: {
            out << "translate(";
            for (std::size_t i = 0; i < shift_.size(); ++i) out << (i ? "," : "") << format_double(shift_[i]);
            out << ";" << base_[0].describe() << ")";
            break;
        }
    }
    return out.str();
}

bool ConvexBody::member_closed(const std::vector<double>& x, double t) const {
    switch (kind_) {
        case Kind::ball:
            return norm2(x) <= t * radius_;
        case Kind::box: {
            for (int i = 0; i < dim_; ++i) {
                if (std::abs(x[i]) > t * halfwidths_[i]) return false;
            }
            return true;
        }
        case Kind::polytope: {
            if (t <= 0.0) {
                for (double v : x) {
                    if (v != 0.0) return false;
                }
                return in_convex_hull(vertices_, std::vector<double>(dim_, 0.0));
            }
            std::vector<double> scaled(dim_);
            for (int i = 0; i < dim_; ++i) scaled[i] = x[i] / t;
            return in_convex_hull(vertices_, scaled);
        }
        case Kind::translate: {
            // x in t(shift + B)  <=>  gauge_B(x - t shift) <= t
            std::vector<double> y(dim_);
            for (int i = 0; i < dim_; ++i) y[i] = x[i] - t * shift_[i];
            return base_[0].gauge(y) <= t;
        }
    }
    return false;
}

double ConvexBody::gauge(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != dim_) {
        throw std::invalid_argument("convex: gauge argument has wrong dimension");
    }
    switch (kind_) {
        case Kind::ball:
            return std::isinf(radius_) ? 0.0 : norm2(x) / radius_;
        case Kind::box: {
            double g = 0.0;
            for (int i = 0; i < dim_; ++i) g = std::max(g, std::abs(x[i]) / halfwidths_[i]);
            return g;
        }
        case Kind::polytope:
            if (dim_ == 1) {
                // closed form from the extreme vertices a <= 0 <= b
                double lo = vertices_[0][0], hi = vertices_[0][0];
                for (const auto& v : vertices_) {
                    lo = std::min(lo, v[0]);
                    hi = std::max(hi, v[0]);
                }
                const double v = x[0];
                if (v == 0.0) return 0.0;
                if (v > 0.0) return hi > 0.0 ? v / hi : kInf;
                return lo < 0.0 ? v / lo : kInf;
            }
            [[fallthrough]];
        case Kind::translate: {
            // membership in tC is monotone in t because 0 lies in the body
            bool zero = true;
            for (double v : x) {
                if (v != 0.0) { zero = false; break; }
            }
            if (zero) return 0.0;
            double hi = 1.0;
            while (!member_closed(x, hi)) {
                hi *= 2.0;
                if (hi > kGaugeCap) return kInf;
            }
            double lo = 0.0;
            while (hi - lo > kGaugeTol) {
                const double mid = 0.5 * (lo + hi);
                if (member_closed(x, mid)) hi = mid;
                else lo = mid;
            }
            return hi;
        }
    }
    return kInf;
}

std::size_t GridFunction::node_count() const {
    std::size_t count = 1;
    for (const auto& axis : axes) count *= axis.size();
    return count;
}

std::vector<double> GridFunction::node(std::size_t flat) const {
    const int dim = dimension();
    std::vector<double> coords(dim);
    for (int axis = dim - 1; axis >= 0; --axis) {
        const std::size_t sz = axes[axis].size();
        coords[axis] = axes[axis][flat % sz];
        flat /= sz;
    }
    return coords;
}

void GridFunction::validate() const {
    if (axes.empty()) throw std::invalid_argument("grid: needs at least one axis");
    for (const auto& axis : axes) {
        if (axis.size() < 2) throw std::invalid_argument("grid: each axis needs at least 2 nodes");
        for (std::size_t i = 1; i < axis.size(); ++i) {
            if (!(axis[i] > axis[i - 1])) {
                throw std::invalid_argument("grid: axis values must be strictly increasing");
            }
        }
    }
    if (values.size() != node_count()) throw std::invalid_argument("grid: value count does not match grid");
    for (double v : values) {
        if (std::isnan(v)) throw std::invalid_argument("grid: NaN value");
    }
}

std::vector<double> GridFunction::uniform_axis(double lo, double hi, std::size_t count) {
    if (count < 2 || !(hi > lo)) throw std::invalid_argument("grid: bad uniform axis");
    std::vector<double> axis(count);
    for (std::size_t i = 0; i < count; ++i) {
        axis[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    axis.back() = hi;
    return axis;
}

void write_grid_csv(const GridFunction& f, std::ostream& out) {
    const int dim = f.dimension();
    for (int a = 0; a < dim; ++a) out << "x" << a << ",";
    out << "value\n";
    const std::size_t count = f.node_count();
    for (std::size_t i = 0; i < count; ++i) {
        const auto coords = f.node(i);
        for (double c : coords) out << format_double(c) << ",";
        out << format_double(f.values[i]) << "\n";
    }
}

void write_grid_csv(const GridFunction& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_grid_csv(f, out);
    if (!out.good()) throw std::runtime_error("write failed: " + path);
}

namespace {

double parse_cell(const std::string& cell) {
    if (cell == "inf" || cell == "+inf") return kInf;
    if (cell == "-inf") return -kInf;
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("grid csv: bad number '" + cell + "'");
    return v;
}

}  // namespace

GridFunction read_grid_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("grid csv: empty input");
    int dim = 0;
    {
        std::stringstream header(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(header, cell, ',')) cells.push_back(cell);
        if (cells.size() < 2 || cells.back() != "value") {
            throw std::invalid_argument("grid csv: header must end with 'value'");
        }
        dim = static_cast<int>(cells.size()) - 1;
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(parse_cell(cell));
        if (static_cast<int>(row.size()) != dim + 1) {
            throw std::invalid_argument("grid csv: row has wrong cell count");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("grid csv: no data rows");

    GridFunction f;
    f.axes.assign(dim, {});
    for (int a = 0; a < dim; ++a) {
        std::vector<double> vals;
        for (const auto& row : rows) vals.push_back(row[a]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        f.axes[a] = std::move(vals);
    }
    if (f.node_count() != rows.size()) {
        throw std::invalid_argument("grid csv: rows do not form a complete grid");
    }
    f.values.assign(rows.size(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        // rows must be in row-major storage order (as written by write_grid_csv)
        const auto expect = f.node(i);
        for (int a = 0; a < dim; ++a) {
            if (rows[i][a] != expect[a]) {
                throw std::invalid_argument("grid csv: rows not in row-major grid order");
            }
        }
        f.values[i] = rows[i][dim];
    }
    f.validate();
    return f;
}

GridFunction read_grid_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_grid_csv(in);
}

namespace {

// Divide-and-conquer maximization of <l_j, x_i> - f_i over i for every j,
// exploiting that the first argmax index is nondecreasing in the dual point
// (the candidate matrix satisfies the inverse Monge condition for any f).
void dnc_argmax(const std::vector<double>& xs, const std::vector<double>& fs,
                const std::vector<double>& ls, std::vector<double>& out, std::size_t jlo, std::size_t jhi,
                std::size_t ilo, std::size_t ihi) {
    if (jlo > jhi) return;
    const std::size_t jm = jlo + (jhi - jlo) / 2;
    const double l = ls[jm];
    double best = -kInf;
    std::size_t arg = ilo;
    for (std::size_t i = ilo; i <= ihi; ++i) {
        const double v = l * xs[i] - fs[i];
        if (v > best) {
            best = v;
            arg = i;
        }
    }
    out[jm] = best;
    if (jm > jlo) dnc_argmax(xs, fs, ls, out, jlo, jm - 1, ilo, arg);
    if (jm < jhi) dnc_argmax(xs, fs, ls, out, jm + 1, jhi, arg, ihi);
}

}  // namespace

GridFunction legendre_transform(const GridFunction& f, const std::vector<std::vector<double>>& dual_axes) {
    f.validate();
    GridFunction out;
    out.axes = dual_axes;
    out.values.clear();
    GridFunction probe;  // reuse validation on the dual grid
    probe.axes = dual_axes;
    probe.values.assign(probe.node_count(), 0.0);
    probe.validate();
    if (static_cast<int>(dual_axes.size()) != f.dimension()) {
        throw std::invalid_argument("legendre: dual grid dimension mismatch");
    }

    bool any_finite = false, any_bottom = false;
    for (double v : f.values) {
        if (v == -kInf) any_bottom = true;
        else if (!std::isinf(v)) any_finite = true;
    }
    if (any_bottom) {  // -inf anywhere forces the conjugate to +inf
        out.values.assign(probe.node_count(), kInf);
        return out;
    }
    if (!any_finite) throw std::invalid_argument("legendre: function has no finite values");

    const std::size_t dual_count = probe.node_count();
    out.values.assign(dual_count, -kInf);

    if (f.dimension() == 1) {
        std::vector<double> xs, fs;
        xs.reserve(f.values.size());
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            if (!std::isinf(f.values[i])) {
                xs.push_back(f.axes[0][i]);
                fs.push_back(f.values[i]);
            }
        }
        dnc_argmax(xs, fs, dual_axes[0], out.values, 0, dual_count - 1, 0, xs.size() - 1);
        return out;
    }

    const std::size_t n = f.node_count();
    for (std::size_t j = 0; j < dual_count; ++j) {
        const auto l = probe.node(j);
        double best = -kInf;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isinf(f.values[i])) continue;
            const auto x = f.node(i);
            double dot = 0.0;
            for (int a = 0; a < f.dimension(); ++a) dot += l[a] * x[a];
            best = std::max(best, dot - f.values[i]);
        }
        out.values[j] = best;
    }
    return out;
}

std::vector<std::vector<double>> auto_dual_axes(const GridFunction& f) {
    f.validate();
    const int dim = f.dimension();
    std::vector<std::vector<double>> dual(dim);

    if (dim == 1) {
        std::vector<double> xs, fs;
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            if (!std::isinf(f.values[i])) {
                xs.push_back(f.axes[0][i]);
                fs.push_back(f.values[i]);
            }
        }
        std::vector<double> slopes;
        if (xs.size() >= 2) {
            // slopes of the lower convex hull: exactly the subgradients needed
            // to recover the convex envelope at the nodes
            std::vector<std::size_t> hull;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                while (hull.size() >= 2) {
                    const std::size_t a = hull[hull.size() - 2], b = hull.back();
                    const long double lhs = (static_cast<long double>(fs[b]) - fs[a]) * (xs[i] - xs[b]);
                    const long double rhs = (static_cast<long double>(fs[i]) - fs[b]) * (xs[b] - xs[a]);
                    if (lhs >= rhs) hull.pop_back();  // b is not strictly below chord a-i
                    else break;
                }
                hull.push_back(i);
            }
            for (std::size_t i = 1; i < hull.size(); ++i) {
                slopes.push_back((fs[hull[i]] - fs[hull[i - 1]]) / (xs[hull[i]] - xs[hull[i - 1]]));
            }
        }
        double lo = slopes.empty() ? -1.0 : *std::min_element(slopes.begin(), slopes.end());
        double hi = slopes.empty() ? 1.0 : *std::max_element(slopes.begin(), slopes.end());
        const double span = hi - lo;
        const double pad = 0.1 * std::max({span, std::abs(lo), std::abs(hi), 1.0});
        lo -= pad;
        hi += pad;
        std::vector<double> axis = GridFunction::uniform_axis(lo, hi, 2 * xs.size() + 1);
        axis.insert(axis.end(), slopes.begin(), slopes.end());
        std::sort(axis.begin(), axis.end());
        axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
        dual[0] = std::move(axis);
        return dual;
    }

    for (int a = 0; a < dim; ++a) {
        // subgradient range along axis a from finite forward differences
        double lo = kInf, hi = -kInf;
        const std::size_t n = f.node_count();
        std::size_t stride = 1;
        for (int b = dim - 1; b > a; --b) stride *= f.axes[b].size();
        const std::size_t len = f.axes[a].size();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t pos = (i / stride) % len;
            if (pos + 1 >= len) continue;
            const double fa = f.values[i], fb = f.values[i + stride];
            if (std::isinf(fa) || std::isinf(fb)) continue;
            const double slope = (fb - fa) / (f.axes[a][pos + 1] - f.axes[a][pos]);
            lo = std::min(lo, slope);
            hi = std::max(hi, slope);
        }
        if (!(lo <= hi)) { lo = -1.0; hi = 1.0; }
        const double span = hi - lo;
        const double pad = 0.1 * std::max({span, std::abs(lo), std::abs(hi), 1.0});
        dual[a] = GridFunction::uniform_axis(lo - pad, hi + pad, 2 * f.axes[a].size() + 1);
    }
    return dual;
}

GridFunction biconjugate(const GridFunction& f) {
    const auto dual = auto_dual_axes(f);
    const GridFunction fstar = legendre_transform(f, dual);
    bool star_finite = false;
    for (double v : fstar.values) {
        if (!std::isinf(v)) { star_finite = true; break; }
    }
    if (!star_finite) {
        // f had a -inf value; f* is identically +inf and f** identically -inf
        GridFunction out;
        out.axes = f.axes;
        out.values.assign(f.node_count(), -kInf);
        return out;
    }
    return legendre_transform(fstar, f.axes);
}

FeketeResult fekete_limit(const std::function<double(long long)>& u, long long n_max) {
    if (n_max < 1) throw std::invalid_argument("fekete: n_max must be >= 1");
    std::vector<double> vals(static_cast<std::size_t>(n_max) + 1, 0.0);
    for (long long n = 1; n <= n_max; ++n) {
        const double v = u(n);
        if (std::isnan(v) || v < 0.0) {
            throw std::invalid_argument("fekete: sequence values must lie in [0, +inf]");
        }
        vals[static_cast<std::size_t>(n)] = v;
    }

    FeketeResult res{};
    res.inf_ratio = kInf;
    res.argmin_n = 1;
    for (long long n = 1; n <= n_max; ++n) {
        const double ratio = vals[static_cast<std::size_t>(n)] / static_cast<double>(n);
        if (ratio < res.inf_ratio) {
            res.inf_ratio = ratio;
            res.argmin_n = n;
        }
    }
    res.tail_ratio = vals[static_cast<std::size_t>(n_max)] / static_cast<double>(n_max);

    res.subadditive = true;
    for (long long i = 1; i <= n_max && res.subadditive; ++i) {
        const double ui = vals[static_cast<std::size_t>(i)];
        for (long long j = i; i + j <= n_max; ++j) {
            const double sum = ui + vals[static_cast<std::size_t>(j)];
            const double tol = 1e-12 * std::max(1.0, std::abs(sum));
            if (vals[static_cast<std::size_t>(i + j)] > sum + tol) {
                res.subadditive = false;
                res.violation_i = i;
                res.violation_j = j;
                break;
            }
        }
    }

    // controlled: finite from some index on
    long long first = n_max + 1;
    for (long long n = n_max; n >= 1; --n) {
        if (std::isinf(vals[static_cast<std::size_t>(n)])) break;
        first = n;
    }
    res.controlled = first <= n_max;
    res.controlled_from = res.controlled ? first : 0;
    return res;
}

LargestTermResult largest_term(const std::vector<std::vector<double>>& log_terms) {
    if (log_terms.empty()) throw std::invalid_argument("largest_term: empty sequence list");
    const std::size_t len = log_terms.front().size();
    if (len == 0) throw std::invalid_argument("largest_term: sequences must be nonempty");
    for (const auto& seq : log_terms) {
        if (seq.size() != len) throw std::invalid_argument("largest_term: sequences must have equal length");
        for (double v : seq) {
            if (std::isnan(v) || v == kInf) {
                throw std::invalid_argument("largest_term: values must lie in [-inf, +inf)");
            }
        }
    }

    LargestTermResult res{};
    res.per_term = log_terms;
    res.term_count = log_terms.size();
    res.combined.resize(len);
    res.max_term.resize(len);
    const double logr = std::log(static_cast<double>(log_terms.size()));
    for (std::size_t k = 0; k < len; ++k) {
        const double n = static_cast<double>(k + 1);
        double mx = -kInf;
        for (const auto& seq : log_terms) mx = std::max(mx, seq[k]);
        res.max_term[k] = mx;
        if (mx == -kInf) {
            res.combined[k] = -kInf;
            continue;
        }
        double acc = 0.0;
        for (const auto& seq : log_terms) {
            if (seq[k] != -kInf) acc += std::exp(n * (seq[k] - mx));
        }
        res.combined[k] = mx + std::log(acc) / n;
        const double excess = std::max(mx - res.combined[k], res.combined[k] - mx - logr / n);
        res.worst_excess = std::max(res.worst_excess, excess);
    }
    res.identity_ok = res.worst_excess <= 1e-9;
    return res;
}

double LargestTermResult::gap_bound_at(long long n) const {
    return std::log(static_cast<double>(term_count)) / static_cast<double>(n);
}

}  // namespace ldlab
