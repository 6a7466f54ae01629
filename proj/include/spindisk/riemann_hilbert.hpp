#pragma once

#include "spindisk/geometry.hpp"
#include "spindisk/maps.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace spindisk {

// Nonvanishing boundary samples.
struct BoundarySymbol {
    BoundaryTrace trace;

    explicit BoundarySymbol(BoundaryTrace t) : trace(std::move(t)) {
        for (const auto& v : trace.values)
            if (!(std::abs(v) > 0.0)) throw std::invalid_argument("BoundarySymbol: symbol vanishes on the boundary");
    }
    int size() const { return trace.size(); }
};

struct HolomorphicPair {
    ComplexField a_plus;
    ComplexField a_minus;
};

namespace detail {

// principal-branch increments of arg along the samples, closing the loop
inline std::vector<double> phase_increments(const BoundaryTrace& phi) {
    const int n = phi.size();
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) {
        const cplx a = phi[i], b = phi[(i + 1) % n];
        if (!(std::abs(a) > 0.0)) throw std::invalid_argument("winding_index: symbol vanishes");
        d[i] = std::arg(b / a);
        if (std::abs(d[i]) >= pi - 1e-12) throw std::runtime_error("winding_index: phase jump >= pi between samples (undersampled symbol)");
    }
    return d;
}

} // namespace detail

inline int winding_index(const BoundarySymbol& phi) {
    double total = 0.0;
    for (double d : detail::phase_increments(phi.trace)) total += d;
    return static_cast<int>(std::lround(total / (2.0 * pi)));
}

// log of a symbol with zero winding, taking the continuous branch that starts
// at the principal value of the first sample.
inline BoundaryTrace continuous_log(const BoundaryTrace& s) {
    const auto d = detail::phase_increments(s);
    double total = 0.0;
    for (double x : d) total += x;
    if (std::abs(total) > pi) throw std::runtime_error("continuous_log: symbol has nonzero winding");
    BoundaryTrace out(s.size());
    double ph = std::arg(s[0]);
    for (int i = 0; i < s.size(); ++i) {
        out[i] = cplx(std::log(std::abs(s[i])), ph);
        ph += d[i];
    }
    return out;
}

// Fourier coefficients c(k), |k| <= n/2, of the trigonometric interpolant; the
// Nyquist coefficient is split evenly between +n/2 and -n/2.
class SignedSpectrum {
public:
    explicit SignedSpectrum(const BoundaryTrace& f) : n_(f.size()), c_(fourier_coefficients(f.values)) {}
    explicit SignedSpectrum(int n, std::vector<cplx> wrapped) : n_(n), c_(std::move(wrapped)) {}

    int n() const { return n_; }
    cplx operator()(int k) const {
        if (k > n_ / 2 || k < -n_ / 2) return 0.0;
        const cplx v = c_[(k + n_) % n_];
        return (k == n_ / 2 || k == -n_ / 2) ? 0.5 * v : v;
    }

private:
    int n_;
    std::vector<cplx> c_;
};

// Evaluate sum_{k=0}^{n/2} a[k] z^k on the ring |z| = r at the n uniform angles.
inline std::vector<cplx> power_series_on_ring(const std::vector<cplx>& a, double r, int n) {
    std::vector<cplx> d(n, 0.0);
    double rk = 1.0;
    for (int k = 0; k < static_cast<int>(a.size()) && k <= n / 2; ++k) {
        d[k] = a[k] * rk;
        rk *= r;
    }
    return fourier_synthesis(d);
}

// Interior Cauchy integral of f on every grid ring (r = 1 gives the interior
// boundary limit, C+ f = sum_{k>=0} c_k zeta^k).
inline ComplexField cauchy_interior_on_grid(const BoundaryTrace& f, const PolarGrid& g) {
    if (f.size() != g.n_theta) throw std::invalid_argument("cauchy_interior_on_grid: trace/grid size mismatch");
    SignedSpectrum c(f);
    std::vector<cplx> a(g.n_theta / 2 + 1);
    for (int k = 0; k <= g.n_theta / 2; ++k) a[k] = c(k);
    ComplexField out(g);
    for (int j = 0; j < g.n_r; ++j) {
        auto ring = power_series_on_ring(a, g.r(j), g.n_theta);
        std::copy(ring.begin(), ring.end(), out.ring(j));
    }
    return out;
}

// Band-limited upsampling by an integer factor (zero padding in frequency).
inline BoundaryTrace fourier_upsample(const BoundaryTrace& f, int factor) {
    if (factor <= 1) return f;
    const int n = f.size(), m = n * factor;
    SignedSpectrum c(f);
    std::vector<cplx> d(m, 0.0);
    for (int k = -n / 2; k <= n / 2; ++k) d[(k + m) % m] += c(k);
    return BoundaryTrace(fourier_synthesis(d));
}

// (1/2 pi i) \oint f(zeta)/(zeta - z) dzeta by the trapezoid rule. Targets near
// the circle get the density upsampled so that n' * dist >= 37, i.e. the
// geometric quadrature error e^{-n' dist} is below 1e-16, capped at 64x.
inline std::vector<cplx> cauchy_integral(const BoundaryTrace& f, const std::vector<cplx>& targets) {
    const int n = f.size();
    std::map<int, BoundaryTrace> up;
    std::vector<cplx> out(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const cplx z = targets[t];
        const double dist = std::abs(1.0 - std::abs(z));
        if (dist < 1e-13) throw std::invalid_argument("cauchy_integral: target on the boundary circle");
        int factor = static_cast<int>(std::ceil(37.0 / (n * dist)));
        factor = std::clamp(factor, 1, 64);
        auto it = up.find(factor);
        if (it == up.end()) it = up.emplace(factor, fourier_upsample(f, factor)).first;
        const BoundaryTrace& F = it->second;
        const int m = F.size();
        cplx acc = 0.0;
        for (int i = 0; i < m; ++i) {
            const cplx zeta = F.z(i);
            acc += F[i] * zeta / (zeta - z);
        }
        out[t] = acc / static_cast<double>(m);
    }
    return out;
}

// Principal Schwarz integral: holomorphic, Re = harmonic extension of h, Im(0) = 0.
inline std::vector<cplx> schwarz_operator(const BoundaryTrace& h, const std::vector<cplx>& targets) {
    for (const auto& v : h.values)
        if (std::abs(v.imag()) > 1e-12 * (1.0 + std::abs(v.real()))) throw std::invalid_argument("schwarz_operator: density must be real");
    auto c = cauchy_integral(h, targets);
    cplx mean = 0.0;
    for (const auto& v : h.values) mean += v;
    mean /= static_cast<double>(h.size());
    for (auto& v : c) v = 2.0 * v - mean.real();
    return c;
}

inline ComplexField schwarz_on_grid(const BoundaryTrace& h, const PolarGrid& g) {
    if (h.size() != g.n_theta) throw std::invalid_argument("schwarz_on_grid: trace/grid size mismatch");
    SignedSpectrum c(h);
    std::vector<cplx> a(g.n_theta / 2 + 1);
    a[0] = c(0).real();
    for (int k = 1; k <= g.n_theta / 2; ++k) a[k] = 2.0 * c(k);
    ComplexField out(g);
    for (int j = 0; j < g.n_r; ++j) {
        auto ring = power_series_on_ring(a, g.r(j), g.n_theta);
        std::copy(ring.begin(), ring.end(), out.ring(j));
    }
    return out;
}

// -(1/2 pi) \int_D [ w/zeta (zeta+z)/(zeta-z) + conj(w)/conj(zeta) (1+z conj zeta)/(1-z conj zeta) ] dA
// at arbitrary targets by plain tensor quadrature, skipping a coincident node.
inline std::vector<cplx> area_cauchy_transform(const DiskGeometry& geo, const ComplexField& w, const std::vector<cplx>& targets) {
    const auto& g = geo.grid();
    std::vector<cplx> out(targets.size(), 0.0);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const cplx z = targets[t];
        cplx acc = 0.0;
        for (int j = 0; j < g.n_r; ++j) {
            const double a = geo.radial().area_weight(j);
            for (int i = 0; i < g.n_theta; ++i) {
                const cplx zeta = g.z(j, i);
                if (std::abs(zeta - z) < 1e-12) continue;
                const cplx wv = w(j, i);
                const cplx zb = std::conj(zeta);
                acc += a * (wv / zeta * (zeta + z) / (zeta - z) + std::conj(wv) / zb * (1.0 + z * zb) / (1.0 - z * zb));
            }
        }
        out[t] = -acc / (2.0 * pi);
    }
    return out;
}

// Same transform on the grid nodes, evaluated mode by mode in theta with the
// radial integrals split at the target radius. No singular node is ever hit,
// and the quadrature keeps the radial order of the cubic windows.
inline ComplexField area_cauchy_transform_on_grid(const DiskGeometry& geo, const ComplexField& w) {
    const auto& g = geo.grid();
    const auto& rad = geo.radial();
    const int n = g.n_theta, nr = g.n_r, h = n / 2;
    // W[m][k + h] = w_k(s_m), signed k in [-h, h]
    std::vector<std::vector<cplx>> W(nr, std::vector<cplx>(n + 1));
    for (int m = 0; m < nr; ++m) {
        SignedSpectrum s(n, fourier_coefficients(std::vector<cplx>(w.ring(m), w.ring(m) + n)));
        for (int k = -h; k <= h; ++k) W[m][k + h] = s(k);
    }
    const auto& q = rad.odd_weights();
    cplx A1 = 0.0; // \int w / zeta dA
    for (int m = 0; m < nr; ++m) A1 += q[m] * W[m][1 + h];
    A1 *= 2.0 * pi;
    // T3 coefficients: 4 pi \int s^{k+1} conj(w_{-k}(s)) ds, k >= 0
    std::vector<cplx> t3(h + 1, 0.0);
    for (int m = 0; m < nr; ++m) {
        double sp = g.r(m);
        for (int k = 0; k < h; ++k) {
            t3[k] += q[m] * sp * std::conj(W[m][-k + h]);
            sp *= g.r(m);
        }
    }
    for (auto& v : t3) v *= 4.0 * pi;

    ComplexField out(g);
    std::vector<cplx> d(n);
    for (int j = 0; j < nr; ++j) {
        const double r = g.r(j);
        std::fill(d.begin(), d.end(), cplx(0.0));
        const auto& wo = rad.outer_weights(j);
        const auto& wi = rad.inner_weights(j);
        // T1 = 2 pi [ sum_k I_out(k) e^{ik theta} - sum_k I_in(k) e^{-i(k+1) theta} ]
        if (j >= nr - 3 && j < nr - 1) {
            // Fewer than four rings lie in [r_j, 1]: interpolate w_{k+1} on the last
            // four rings (crossing r_j) and integrate the kernel (r/s)^k exactly.
            static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
            static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891};
            const int s0 = nr - 4;
            double x[4];
            for (int m = 0; m < 4; ++m) x[m] = g.r(s0 + m);
            for (int iv = j; iv < nr - 1; ++iv) {
                const double a = g.r(iv), b = g.r(iv + 1), half = 0.5 * (b - a), mid = 0.5 * (a + b);
                for (int q5 = 0; q5 < 5; ++q5) {
                    const double t = mid + half * gx[q5];
                    double L[4];
                    for (int m = 0; m < 4; ++m) {
                        L[m] = half * gw[q5];
                        for (int o = 0; o < 4; ++o)
                            if (o != m) L[m] *= (t - x[o]) / (x[m] - x[o]);
                    }
                    const double ratio = r / t;
                    double p = 1.0;
                    for (int k = 0; k + 1 <= h; ++k) {
                        cplx acc = 0.0;
                        for (int m = 0; m < 4; ++m) acc += L[m] * W[s0 + m][k + 1 + h];
                        d[k] += 2.0 * (2.0 * pi) * acc * p;
                        p *= ratio;
                    }
                }
            }
        } else {
            for (int m = j; m < nr; ++m) {
                const double ratio = r / g.r(m);
                double p = 1.0;
                const cplx wt = wo[m - j];
                for (int k = 0; k + 1 <= h; ++k) {
                    d[k] += 2.0 * (2.0 * pi) * wt * W[m][k + 1 + h] * p;
                    p *= ratio;
                }
            }
        }
        if (j == 0) {
            // Only one ring lies inside r_0. Mode -k of a smooth density behaves
            // like s^k at the pole, so the integrand is ~ s^{2k+1}; k = 0 uses the
            // odd cubic through the first two rings instead (its growth factor
            // r_1/r_0 = 3 is harmless).
            const auto& pw = rad.pole_weights();
            const double r1 = g.r(1);
            d[n - 1] -= 2.0 * (2.0 * pi) * (pw[0] * W[0][h] + pw[1] * W[1][h] * (r1 / r));
            for (int k = 1; k + 1 < h; ++k) d[n - (k + 1)] -= 2.0 * (2.0 * pi) * W[0][-k + h] * (r / (2.0 * k + 2.0));
        } else {
            for (int m = 0; m <= j; ++m) {
                const double ratio = g.r(m) / r;
                double p = ratio;
                const cplx wt = wi[m];
                for (int k = 0; k + 1 < h; ++k) {
                    d[n - (k + 1)] -= 2.0 * (2.0 * pi) * wt * W[m][-k + h] * p;
                    p *= ratio;
                }
            }
        }
        double rk = r;
        for (int k = 0; k + 1 < h; ++k) {
            d[k + 1] += t3[k] * rk;
            rk *= r;
        }
        d[0] += -A1 + std::conj(A1);
        auto ring = fourier_synthesis(d);
        for (int i = 0; i < n; ++i) out(j, i) = -ring[i] / (2.0 * pi);
    }
    return out;
}

// g_zbar = 1/4 (log lambda)_zbar + (log rho)_phi phi_zbar, Re g = log(lambda^{1/4} rho^{1/2}) on the
// circle, Im g(0) = 0.
inline ComplexField solve_g_problem(const DiskGeometry& geo, const ConformalDiskMetric& metric, const MapData& map) {
    const auto& g = geo.grid();
    for (double x : metric.lambda.v)
        if (!(x > 0.0)) throw std::invalid_argument("solve_g_problem: lambda must be positive");
    for (double x : map.rho_at_phi.v)
        if (!(x > 0.0)) throw std::invalid_argument("solve_g_problem: rho must be positive");
    const int jb = g.n_r - 1;
    BoundaryTrace h(g.n_theta);
    for (int i = 0; i < g.n_theta; ++i) h[i] = 0.5 * std::log(map.rho_at_phi(jb, i));
    ComplexField out = schwarz_on_grid(h, g);
    for (std::size_t k = 0; k < out.size(); ++k) out.v[k] += 0.25 * std::log(metric.lambda.v[k]);
    ComplexField w = map.coupling_zbar();
    bool any = false;
    for (const auto& x : w.v) any = any || std::abs(x) > 0.0;
    if (any) out += area_cauchy_transform_on_grid(geo, w);
    return out;
}

struct GProblemResidual {
    double interior_sup = 0.0;
    double boundary_sup = 0.0;
};

inline GProblemResidual g_problem_residual(const DiskGeometry& geo, const ConformalDiskMetric& metric, const MapData& map,
                                           const ComplexField& gfield) {
    const auto& g = geo.grid();
    GProblemResidual res;
    ComplexField rhs = map.coupling_zbar();
    for (std::size_t k = 0; k < rhs.size(); ++k) rhs.v[k] += 0.25 * metric.dlog_lambda_zbar.v[k];
    res.interior_sup = (geo.dbar(gfield) - rhs).sup_norm();
    const int jb = g.n_r - 1;
    for (int i = 0; i < g.n_theta; ++i) {
        const double target = 0.25 * std::log(metric.lambda(jb, i)) + 0.5 * std::log(map.rho_at_phi(jb, i));
        res.boundary_sup = std::max(res.boundary_sup, std::abs(gfield(jb, i).real() - target));
    }
    return res;
}

namespace detail {

struct RHData {
    SignedSpectrum L; // log(zeta phi)
    SignedSpectrum C; // f e^{-gamma+}
};

inline RHData rh_prepare(const BoundarySymbol& phi, const BoundaryTrace& f) {
    if (f.size() != phi.size()) throw std::invalid_argument("rh_solve: symbol and data lengths differ");
    const int kappa = winding_index(phi);
    if (kappa != -1) throw std::invalid_argument("rh_solve: symbol index is " + std::to_string(kappa) + ", need -1");
    const int n = f.size();
    BoundaryTrace zphi(n);
    for (int i = 0; i < n; ++i) zphi[i] = phi.trace.z(i) * phi.trace[i];
    const BoundaryTrace ell = continuous_log(zphi);
    SignedSpectrum L(ell);
    // interior boundary limit gamma+ = sum_{k>=0} L_k zeta^k
    std::vector<cplx> d(n, 0.0);
    for (int k = 0; k <= n / 2; ++k) d[k] = L(k);
    auto gplus = fourier_synthesis(d);
    BoundaryTrace F(n);
    for (int i = 0; i < n; ++i) F[i] = f[i] * std::exp(-gplus[i]);
    return {L, SignedSpectrum(F)};
}

} // namespace detail

// Index -1 problem A+ - phi conj(A-) = f on the circle. A+ = e^gamma psi inside;
// A-(z) = conj(w e^{gamma(w)} psi(w)) with w = 1/conj(z), which expands into a
// power series in z, so A-(0) = -conj(c_{-1}) is exact.
inline HolomorphicPair rh_solve_index_minus_one(const BoundarySymbol& phi, const BoundaryTrace& f, const PolarGrid& g) {
    if (f.size() != g.n_theta) throw std::invalid_argument("rh_solve: trace/grid size mismatch");
    const auto data = detail::rh_prepare(phi, f);
    const int n = g.n_theta, h = n / 2;
    std::vector<cplx> gam(h + 1), psi(h + 1), cgam_ext(h + 1, 0.0), wpsi_ext(h + 1, 0.0);
    for (int k = 0; k <= h; ++k) {
        gam[k] = data.L(k);
        psi[k] = data.C(k);
    }
    for (int k = 1; k <= h; ++k) cgam_ext[k] = -std::conj(data.L(-k));
    for (int k = 0; k < h; ++k) wpsi_ext[k] = -std::conj(data.C(-(k + 1)));
    HolomorphicPair out{ComplexField(g), ComplexField(g)};
    for (int j = 0; j < g.n_r; ++j) {
        const double r = g.r(j);
        auto G = power_series_on_ring(gam, r, n);
        auto P = power_series_on_ring(psi, r, n);
        auto Ge = power_series_on_ring(cgam_ext, r, n);
        auto Pe = power_series_on_ring(wpsi_ext, r, n);
        for (int i = 0; i < n; ++i) {
            out.a_plus(j, i) = std::exp(G[i]) * P[i];
            out.a_minus(j, i) = std::exp(Ge[i]) * Pe[i];
        }
    }
    return out;
}

// The same pair at arbitrary points strictly inside the disk, through the
// trapezoid Cauchy integrals at z and at the reflected point 1/conj(z).
inline std::vector<std::pair<cplx, cplx>> rh_evaluate(const BoundarySymbol& phi, const BoundaryTrace& f, const std::vector<cplx>& pts) {
    const int n = f.size();
    BoundaryTrace zphi(n);
    for (int i = 0; i < n; ++i) zphi[i] = phi.trace.z(i) * phi.trace[i];
    if (winding_index(phi) != -1) throw std::invalid_argument("rh_evaluate: symbol index must be -1");
    const BoundaryTrace ell = continuous_log(zphi);
    SignedSpectrum L(ell);
    std::vector<cplx> d(n, 0.0);
    for (int k = 0; k <= n / 2; ++k) d[k] = L(k);
    auto gplus = fourier_synthesis(d);
    BoundaryTrace F(n);
    for (int i = 0; i < n; ++i) F[i] = f[i] * std::exp(-gplus[i]);
    SignedSpectrum C(F);
    std::vector<std::pair<cplx, cplx>> out;
    for (const cplx z : pts) {
        if (std::abs(z) >= 1.0) throw std::invalid_argument("rh_evaluate: point outside the open disk");
        const cplx gi = cauchy_integral(ell, {z})[0];
        const cplx pi_ = cauchy_integral(F, {z})[0];
        cplx am;
        if (std::abs(z) < 1e-14) {
            am = -std::conj(C(-1));
        } else {
            const cplx w = 1.0 / std::conj(z);
            const cplx ge = cauchy_integral(ell, {w})[0];
            const cplx pe = cauchy_integral(F, {w})[0];
            am = std::conj(w * std::exp(ge) * pe);
        }
        out.emplace_back(std::exp(gi) * pi_, am);
    }
    return out;
}

inline double rh_boundary_residual(const HolomorphicPair& p, const BoundarySymbol& phi, const BoundaryTrace& f) {
    const auto& g = p.a_plus.grid;
    const int jb = g.n_r - 1;
    double m = 0.0;
    for (int i = 0; i < g.n_theta; ++i)
        m = std::max(m, std::abs(p.a_plus(jb, i) - phi.trace[i] * std::conj(p.a_minus(jb, i)) - f[i]));
    return m;
}

} // namespace spindisk
