#pragma once

#include "spindisk/fft.hpp"
#include "spindisk/spinor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spindisk {

// Uniform polar grid r_j = (j + 1/2) dr, dr = 1/(n_r - 1/2), so the last ring
// sits on r = 1 and the pole is never a node. theta_i = 2 pi i / n_theta.
struct PolarGrid {
    int n_r = 0;
    int n_theta = 0;
    double dr = 0.0;
    double dtheta = 0.0;

    PolarGrid() = default;
    PolarGrid(int nr, int nt) : n_r(nr), n_theta(nt) {
        if (nt < 8 || nt % 2 != 0) throw std::invalid_argument("PolarGrid: n_theta must be even and >= 8");
        if (nr < 4) throw std::invalid_argument("PolarGrid: n_r must be >= 4");
        dr = 1.0 / (nr - 0.5);
        dtheta = 2.0 * pi / nt;
    }

    double r(int j) const { return j == n_r - 1 ? 1.0 : (j + 0.5) * dr; }
    double theta(int i) const { return dtheta * i; }
    cplx z(int j, int i) const { return std::polar(r(j), theta(i)); }
    std::size_t size() const { return static_cast<std::size_t>(n_r) * static_cast<std::size_t>(n_theta); }
    std::size_t index(int j, int i) const { return static_cast<std::size_t>(j) * n_theta + i; }
    // antipodal angle index, used by the parity ghosts u(-r, theta) = u(r, theta + pi)
    int antipode(int i) const { return (i + n_theta / 2) % n_theta; }
    double h() const { return dr; }

    bool operator==(const PolarGrid& o) const { return n_r == o.n_r && n_theta == o.n_theta; }
    bool operator!=(const PolarGrid& o) const { return !(*this == o); }
};

template <class T>
struct Field {
    PolarGrid grid;
    std::vector<T> v;

    Field() = default;
    explicit Field(const PolarGrid& g, T value = T{}) : grid(g), v(g.size(), value) {}

    template <class F>
    static Field from(const PolarGrid& g, F&& f) {
        Field out(g);
        for (int j = 0; j < g.n_r; ++j)
            for (int i = 0; i < g.n_theta; ++i) out(j, i) = f(g.z(j, i));
        return out;
    }

    T& operator()(int j, int i) { return v[grid.index(j, i)]; }
    const T& operator()(int j, int i) const { return v[grid.index(j, i)]; }
    T* ring(int j) { return v.data() + grid.index(j, 0); }
    const T* ring(int j) const { return v.data() + grid.index(j, 0); }
    std::size_t size() const { return v.size(); }

    template <class F>
    Field map(F&& f) const {
        Field out(grid);
        for (std::size_t k = 0; k < v.size(); ++k) out.v[k] = f(v[k]);
        return out;
    }

    Field& operator+=(const Field& o) { check(o); for (std::size_t k = 0; k < v.size(); ++k) v[k] += o.v[k]; return *this; }
    Field& operator-=(const Field& o) { check(o); for (std::size_t k = 0; k < v.size(); ++k) v[k] -= o.v[k]; return *this; }
    Field& operator*=(const Field& o) { check(o); for (std::size_t k = 0; k < v.size(); ++k) v[k] *= o.v[k]; return *this; }
    Field& operator*=(T s) { for (auto& x : v) x *= s; return *this; }

    double sup_norm() const {
        double m = 0.0;
        for (const auto& x : v) m = std::max(m, std::abs(x));
        return m;
    }

    void check(const Field& o) const {
        if (grid != o.grid) throw std::invalid_argument("Field: grid mismatch");
    }
};

template <class T> Field<T> operator+(Field<T> a, const Field<T>& b) { return a += b; }
template <class T> Field<T> operator-(Field<T> a, const Field<T>& b) { return a -= b; }
template <class T> Field<T> operator*(Field<T> a, const Field<T>& b) { return a *= b; }
template <class T> Field<T> operator*(T s, Field<T> a) { return a *= s; }

using ComplexField = Field<cplx>;
using RealField = Field<double>;

inline ComplexField to_complex(const RealField& f) {
    ComplexField out(f.grid);
    for (std::size_t k = 0; k < f.size(); ++k) out.v[k] = f.v[k];
    return out;
}

inline RealField real_part(const ComplexField& f) {
    RealField out(f.grid);
    for (std::size_t k = 0; k < f.size(); ++k) out.v[k] = f.v[k].real();
    return out;
}

inline ComplexField conj(const ComplexField& f) {
    return f.map([](cplx x) { return std::conj(x); });
}

// Uniformly sampled boundary values, theta_i = 2 pi i / n.
struct BoundaryTrace {
    std::vector<cplx> values;

    BoundaryTrace() = default;
    explicit BoundaryTrace(int n, cplx value = 0.0) : values(static_cast<std::size_t>(n), value) {}
    explicit BoundaryTrace(std::vector<cplx> v) : values(std::move(v)) {}

    template <class F>
    static BoundaryTrace from(int n, F&& f) {
        BoundaryTrace b(n);
        for (int i = 0; i < n; ++i) b.values[i] = f(std::polar(1.0, 2.0 * pi * i / n));
        return b;
    }

    int size() const { return static_cast<int>(values.size()); }
    double theta(int i) const { return 2.0 * pi * i / size(); }
    cplx z(int i) const { return std::polar(1.0, theta(i)); }
    cplx& operator[](int i) { return values[i]; }
    const cplx& operator[](int i) const { return values[i]; }
};

// Fornberg's recursion for finite-difference weights of derivative `order`
// at x0 over nodes x.
inline std::vector<double> fornberg_weights(double x0, const std::vector<double>& x, int order) {
    const int n = static_cast<int>(x.size());
    if (order >= n) throw std::invalid_argument("fornberg_weights: not enough nodes");
    std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
    double c1 = 1.0, c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][order];
    return w;
}

// Weights integrating the Lagrange interpolant through x over [a, b]
// (3-point Gauss, exact up to degree 5 so any window of <= 4 nodes is exact).
inline std::vector<double> interval_weights(const std::vector<double>& x, double a, double b) {
    static const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const int n = static_cast<int>(x.size());
    std::vector<double> w(n, 0.0);
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int g = 0; g < 3; ++g) {
        const double t = mid + half * gx[g];
        for (int m = 0; m < n; ++m) {
            double l = 1.0;
            for (int k = 0; k < n; ++k)
                if (k != m) l *= (t - x[k]) / (x[m] - x[k]);
            w[m] += half * gw[g] * l;
        }
    }
    return w;
}

// A stencil over "extended" radial indices: e >= 0 is ring e, e < 0 is the
// parity ghost of ring -e-1 (same radius, opposite angle, mirrored position).
struct RadialStencil {
    int start = 0;
    std::vector<double> w;
};

inline double extended_radius(const PolarGrid& g, int e) { return e >= 0 ? g.r(e) : -g.r(-e - 1); }

class RadialOperators {
public:
    explicit RadialOperators(const PolarGrid& g) : grid_(g) {
        const int n = g.n_r;
        d1_.resize(n);
        d2_.resize(n);
        for (int j = 0; j < n; ++j) {
            d1_[j] = make(j, std::min(j - 2, n - 5), 5, 1);
            if (j + 2 <= n - 1) d2_[j] = make(j, j - 2, 5, 2);
            else d2_[j] = make(j, n - 6, 6, 2);
        }
        build_quadrature();
    }

    const PolarGrid& grid() const { return grid_; }
    const RadialStencil& d1(int j) const { return d1_[j]; }
    const RadialStencil& d2(int j) const { return d2_[j]; }

    // Apply a radial stencil at ring j, angle i, of a physical field.
    template <class T>
    T apply(const RadialStencil& s, const Field<T>& u, int i) const {
        T acc{};
        for (std::size_t m = 0; m < s.w.size(); ++m) {
            const int e = s.start + static_cast<int>(m);
            acc += s.w[m] * (e >= 0 ? u(e, i) : u(-e - 1, grid_.antipode(i)));
        }
        return acc;
    }

    // Dense n_r x n_r matrix of a stencil family acting on Fourier mode k,
    // where the parity ghost contributes a factor (-1)^k.
    std::vector<double> mode_matrix(const std::vector<RadialStencil>& fam, int k) const {
        const int n = grid_.n_r;
        const double par = (k % 2 == 0) ? 1.0 : -1.0;
        std::vector<double> M(static_cast<std::size_t>(n) * n, 0.0);
        for (int j = 0; j < n; ++j) {
            const auto& s = fam[j];
            for (std::size_t m = 0; m < s.w.size(); ++m) {
                const int e = s.start + static_cast<int>(m);
                if (e >= 0) M[static_cast<std::size_t>(j) * n + e] += s.w[m];
                else M[static_cast<std::size_t>(j) * n + (-e - 1)] += par * s.w[m];
            }
        }
        return M;
    }
    const std::vector<RadialStencil>& d1_family() const { return d1_; }
    const std::vector<RadialStencil>& d2_family() const { return d2_; }

    // Integral over [0,1] of an odd radial profile sampled on the rings.
    const std::vector<double>& odd_weights() const { return inner_.back(); }
    // Weights over rings 0..j for int_0^{r_j} of an odd profile.
    const std::vector<double>& inner_weights(int j) const { return inner_[j]; }
    // Weights over rings j..n_r-1 for int_{r_j}^1 (index m-j).
    const std::vector<double>& outer_weights(int j) const { return outer_[j]; }
    // Weights on rings 0,1 for int_0^{r_0} of an odd profile, from the odd cubic
    // through +-r_0, +-r_1.
    const std::array<double, 2>& pole_weights() const { return pole_; }
    // Area weights: int_D u dx dy ~ sum_j area_weight(j) sum_i u(j,i).
    double area_weight(int j) const { return area_[j]; }

private:
    RadialStencil make(int j, int start, int len, int order) const {
        std::vector<double> x(len);
        for (int m = 0; m < len; ++m) x[m] = extended_radius(grid_, start + m);
        return {start, fornberg_weights(grid_.r(j), x, order)};
    }

    // Piecewise-cubic integration on intervals; each window uses up to four
    // available nodes, as centred as the range [lo, hi] allows.
    void add_interval(std::vector<double>& w, int lo, int hi, int left, double a, double b, bool fold_ghosts) const {
        const int avail = hi - lo + 1;
        const int len = std::min(4, avail);
        int start = std::clamp(left - 1, lo, hi - len + 1);
        std::vector<double> x(len);
        for (int m = 0; m < len; ++m) x[m] = extended_radius(grid_, start + m);
        const auto iw = interval_weights(x, a, b);
        for (int m = 0; m < len; ++m) {
            const int e = start + m;
            if (e >= 0) w[e] += iw[m];
            else if (fold_ghosts) w[-e - 1] -= iw[m]; // odd profile: F(-r) = -F(r)
        }
    }

    void build_quadrature() {
        const int n = grid_.n_r;
        inner_.assign(n, std::vector<double>(n, 0.0));
        outer_.assign(n, {});
        for (int j = 0; j < n; ++j) {
            auto& w = inner_[j];
            // ghosts available are mirrors of rings 0..j
            const int lo = -std::min(j + 1, 2);
            add_interval(w, lo, j, -1, 0.0, grid_.r(0), true);
            for (int m = 0; m < j; ++m) add_interval(w, lo, j, m, grid_.r(m), grid_.r(m + 1), true);
        }
        for (int j = 0; j < n; ++j) {
            std::vector<double> w(n, 0.0);
            for (int m = j; m < n - 1; ++m) add_interval(w, j, n - 1, m, grid_.r(m), grid_.r(m + 1), false);
            outer_[j].assign(w.begin() + j, w.end());
        }
        {
            const double r0 = grid_.r(0), r1 = grid_.r(1);
            const auto iw = interval_weights({-r1, -r0, r0, r1}, 0.0, r0);
            pole_ = {iw[2] - iw[1], iw[3] - iw[0]};
        }
        area_.resize(n);
        for (int j = 0; j < n; ++j) area_[j] = inner_.back()[j] * grid_.r(j) * grid_.dtheta;
    }

    PolarGrid grid_;
    std::vector<RadialStencil> d1_, d2_;
    std::vector<std::vector<double>> inner_, outer_;
    std::vector<double> area_;
    std::array<double, 2> pole_{};
};

} // namespace spindisk
