#pragma once

#include "spindisk/dirac.hpp"
#include "spindisk/elliptic.hpp"

#include <json.hpp>

#include <array>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace spindisk {

// One evaluated identity or inequality. defect is |lhs - rhs| for identities
// and the violation max(0, lhs - rhs) for inequalities.
struct IdentityDefect {
    std::string name;
    cplx lhs{};
    cplx rhs{};
    double defect = 0.0;
    int n_r = 0;
    int n_theta = 0;
    std::vector<std::pair<std::string, double>> extra;

    double get(const std::string& key) const {
        for (const auto& [k, v] : extra)
            if (k == key) return v;
        throw std::out_of_range("IdentityDefect: no entry '" + key + "'");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["name"] = name;
        j["lhs"] = {lhs.real(), lhs.imag()};
        j["rhs"] = {rhs.real(), rhs.imag()};
        j["defect"] = defect;
        j["grid"] = {n_r, n_theta};
        for (const auto& [k, v] : extra) j["extra"][k] = v;
        return j;
    }
};

namespace detail {

inline IdentityDefect make_defect(std::string name, const PolarGrid& g, cplx lhs, cplx rhs, double defect) {
    IdentityDefect d;
    d.name = std::move(name);
    d.lhs = lhs;
    d.rhs = rhs;
    d.defect = defect;
    d.n_r = g.n_r;
    d.n_theta = g.n_theta;
    return d;
}

// slots 0, 2 are Sigma^+, slots 1, 3 are Sigma^-
inline double chirality_of(int slot) { return slot % 2 == 0 ? 1.0 : -1.0; }

inline SpinorValue pair_at(const SpinorField& s, int pair, std::size_t n) {
    return {s.slot(2 * pair).v[n], s.slot(2 * pair + 1).v[n]};
}
inline void set_pair(SpinorField& s, int pair, std::size_t n, const SpinorValue& v) {
    s.slot(2 * pair).v[n] = v.plus;
    s.slot(2 * pair + 1).v[n] = v.minus;
}

inline cplx inner(const SpinorField& a, const SpinorField& b, std::size_t n) {
    cplx acc = 0.0;
    for (int k = 0; k < 4; ++k) acc += a.slot(k).v[n] * std::conj(b.slot(k).v[n]);
    return acc;
}

inline double norm2(const SpinorField& a, std::size_t n) {
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) acc += std::norm(a.slot(k).v[n]);
    return acc;
}

// X.psi for X = a e1 + b e2 given per node
inline SpinorField clifford_field(const RealField& a, const RealField& b, const SpinorField& psi) {
    SpinorField out(psi.grid());
    for (std::size_t n = 0; n < a.size(); ++n)
        for (int p = 0; p < 2; ++p) set_pair(out, p, n, clifford_mul({a.v[n], b.v[n]}, pair_at(psi, p, n)));
    return out;
}

inline SpinorField scale(const RealField& s, SpinorField psi) {
    for (int k = 0; k < 4; ++k)
        for (std::size_t n = 0; n < s.size(); ++n) psi.slot(k).v[n] *= s.v[n];
    return psi;
}

} // namespace detail

// Untwisted spin Dirac operator on both pairs.
inline SpinorField spin_dirac(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi) {
    return dirac_apply(geo, metric, MapData::identity_flat(geo.grid()), psi);
}

// Spin connection in the orthonormal frame gauge. Along d_z it acts on
// Sigma^+ by -1/4 (log lambda)_z and on Sigma^- by +1/4 (log lambda)_z, the
// d_zbar part with the opposite signs. The two pieces that enter D (d_zbar on
// Sigma^+, d_z on Sigma^-) carry +1/4, as in the block formula; the
// other two are what make the connection metric.
// Returns the coordinate coefficients (a_x, a_y) for Sigma^+; Sigma^- is minus these.
inline std::pair<ComplexField, ComplexField> spin_connection_plus(const ConformalDiskMetric& m) {
    const PolarGrid& g = m.grid();
    ComplexField ax(g), ay(g);
    for (std::size_t n = 0; n < g.size(); ++n) {
        const cplx az = -0.25 * m.dlog_lambda_z.v[n], azb = 0.25 * m.dlog_lambda_zbar.v[n];
        ax.v[n] = az + azb;
        ay.v[n] = I * (az - azb);
    }
    return {ax, ay};
}

// Coordinate covariant derivatives (nabla_{d_x} psi, nabla_{d_y} psi).
inline std::array<SpinorField, 2> covariant_coordinate(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi) {
    psi.validate();
    const auto [ax, ay] = spin_connection_plus(metric);
    std::array<SpinorField, 2> out{SpinorField(psi.grid()), SpinorField(psi.grid())};
    for (int k = 0; k < 4; ++k) {
        const double c = detail::chirality_of(k);
        ComplexField ux = geo.dx(psi.slot(k)), uy = geo.dy(psi.slot(k));
        for (std::size_t n = 0; n < ux.size(); ++n) {
            ux.v[n] += c * ax.v[n] * psi.slot(k).v[n];
            uy.v[n] += c * ay.v[n] * psi.slot(k).v[n];
        }
        out[0].slot(k) = ux;
        out[1].slot(k) = uy;
    }
    return out;
}

// nabla_{e_1}, nabla_{e_2} with e_k = lambda^{-1/2} d_k.
inline std::array<SpinorField, 2> covariant_frame(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi) {
    auto d = covariant_coordinate(geo, metric, psi);
    const RealField s = metric.lambda.map([](double l) { return 1.0 / std::sqrt(l); });
    return {detail::scale(s, d[0]), detail::scale(s, d[1])};
}

// P_{e_k} psi = nabla_{e_k} psi + 1/2 e_k . D psi
inline std::array<SpinorField, 2> twistor_frame(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi) {
    auto nab = covariant_frame(geo, metric, psi);
    const SpinorField dpsi = spin_dirac(geo, metric, psi);
    const PolarGrid& g = psi.grid();
    const RealField one(g, 1.0), zero(g, 0.0);
    nab[0] += 0.5 * detail::clifford_field(one, zero, dpsi);
    nab[1] += 0.5 * detail::clifford_field(zero, one, dpsi);
    return nab;
}

// Rough Laplacian sum_k (nabla_{e_k} nabla_{e_k} - nabla_{nabla_{e_k} e_k}). For a
// conformal metric the Christoffel trace vanishes and this is
// lambda^{-1} (nabla_x nabla_x + nabla_y nabla_y).
inline SpinorField rough_laplacian(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi) {
    const auto d = covariant_coordinate(geo, metric, psi);
    const auto dx = covariant_coordinate(geo, metric, d[0]);
    const auto dy = covariant_coordinate(geo, metric, d[1]);
    SpinorField out = dx[0] + dy[1];
    return detail::scale(metric.lambda.map([](double l) { return 1.0 / l; }), out);
}

// integral of |psi|^2 (or other densities) against the Riemannian area lambda dx dy
inline double area_integral(const DiskGeometry& geo, const ConformalDiskMetric& metric, const RealField& density) {
    return geo.area_integral(to_complex(density), metric).real();
}

inline cplx area_integral(const DiskGeometry& geo, const ConformalDiskMetric& metric, const ComplexField& density) {
    return geo.area_integral(density, metric);
}

// integral over the boundary circle against the Riemannian arc length lambda^{1/2} dtheta
inline cplx boundary_integral(const ConformalDiskMetric& metric, const std::vector<cplx>& density) {
    const PolarGrid& g = metric.grid();
    cplx acc = 0.0;
    for (int i = 0; i < g.n_theta; ++i) acc += density[i] * metric.sqrt_lambda(g.n_r - 1, i);
    return acc * g.dtheta;
}

inline RealField pointwise_norm2(const SpinorField& psi) {
    RealField out(psi.grid());
    for (std::size_t n = 0; n < out.size(); ++n) out.v[n] = detail::norm2(psi, n);
    return out;
}

inline double l2_norm(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi) {
    return std::sqrt(std::max(0.0, area_integral(geo, metric, pointwise_norm2(psi))));
}

// int <D psi, phi> - int <psi, D phi>  versus  boundary integral of <n . psi, phi>
inline IdentityDefect check_green(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi, const SpinorField& phi) {
    const PolarGrid& g = geo.grid();
    const SpinorField dpsi = spin_dirac(geo, metric, psi), dphi = spin_dirac(geo, metric, phi);
    ComplexField a(g), b(g);
    for (std::size_t n = 0; n < g.size(); ++n) {
        a.v[n] = detail::inner(dpsi, phi, n);
        b.v[n] = detail::inner(psi, dphi, n);
    }
    const cplx ia = area_integral(geo, metric, a), ib = area_integral(geo, metric, b);
    std::vector<cplx> bd(g.n_theta);
    const int jb = g.n_r - 1;
    for (int i = 0; i < g.n_theta; ++i) {
        const CliffordVector nrm = outward_normal(BoundaryPoint(g.theta(i)));
        const std::size_t n = g.index(jb, i);
        cplx acc = 0.0;
        for (int p = 0; p < 2; ++p) acc += hermitian_inner(clifford_mul(nrm, detail::pair_at(psi, p, n)), detail::pair_at(phi, p, n));
        bd[i] = acc;
    }
    const cplx ibd = boundary_integral(metric, bd);
    auto d = detail::make_defect("green", g, ia - ib, ibd, std::abs(ia - ib - ibd));
    d.extra = {{"int_Dpsi_phi_re", ia.real()}, {"int_Dpsi_phi_im", ia.imag()}, {"int_psi_Dphi_re", ib.real()},
               {"int_psi_Dphi_im", ib.imag()}, {"boundary_re", ibd.real()}, {"boundary_im", ibd.imag()}};
    return d;
}

// int |nabla psi|^2 = int |P psi|^2 + 1/2 int |D psi|^2; also the pointwise sup defect.
inline IdentityDefect check_twistor(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi) {
    const PolarGrid& g = geo.grid();
    const auto nab = covariant_frame(geo, metric, psi);
    const auto P = twistor_frame(geo, metric, psi);
    const SpinorField dpsi = spin_dirac(geo, metric, psi);
    RealField gn(g), pn(g), dn(g);
    double sup = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        gn.v[n] = detail::norm2(nab[0], n) + detail::norm2(nab[1], n);
        pn.v[n] = detail::norm2(P[0], n) + detail::norm2(P[1], n);
        dn.v[n] = detail::norm2(dpsi, n);
        sup = std::max(sup, std::abs(gn.v[n] - pn.v[n] - 0.5 * dn.v[n]));
    }
    const double G = area_integral(geo, metric, gn), Pi = area_integral(geo, metric, pn), Di = area_integral(geo, metric, dn);
    auto d = detail::make_defect("twistor", g, G, Pi + 0.5 * Di, std::abs(G - Pi - 0.5 * Di));
    d.extra = {{"grad_sq", G}, {"twistor_sq", Pi}, {"dirac_sq", Di}, {"pointwise_sup", sup}};
    return d;
}

// Curvature endomorphism of the spin bundle: R = s/4 = K/2 times the identity.
inline RealField spin_curvature(const ConformalDiskMetric& metric) {
    return metric.gauss_curvature.map([](double k) { return 0.5 * k; });
}

// || D^2 psi + nabla^2 psi - R psi ||_{L^2}
inline IdentityDefect check_weitzenbock(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi) {
    const PolarGrid& g = geo.grid();
    const SpinorField d2 = spin_dirac(geo, metric, spin_dirac(geo, metric, psi));
    const SpinorField lap = rough_laplacian(geo, metric, psi);
    const SpinorField rhs = detail::scale(spin_curvature(metric), psi) - lap;
    const SpinorField res = d2 - rhs;
    const double a = l2_norm(geo, metric, d2), b = l2_norm(geo, metric, rhs), e = l2_norm(geo, metric, res);
    auto d = detail::make_defect("weitzenbock", g, a, b, e);
    d.extra = {{"residual_sup", res.sup_norm()}};
    return d;
}

// |int_{dD} (|psi|^2 - 2|B psi|^2)| <= 2 ||psi|| ||D psi||. For the chiral
// projectors the signed boundary integral equals 2 sign int Re<D psi, G psi>,
// reported as "equality_defect".
inline IdentityDefect check_prop31(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi, int sign,
                                   BoundaryVariant variant = BoundaryVariant::chiral) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("check_prop31: sign must be +1 or -1");
    const PolarGrid& g = geo.grid();
    const SpinorField dpsi = spin_dirac(geo, metric, psi);
    std::vector<cplx> bd(g.n_theta);
    const int jb = g.n_r - 1;
    for (int i = 0; i < g.n_theta; ++i) {
        const BoundaryPoint p(g.theta(i));
        const Mat2 B = boundary_matrix(variant, sign, p);
        const std::size_t n = g.index(jb, i);
        double acc = 0.0;
        for (int q = 0; q < 2; ++q) {
            const SpinorValue s = detail::pair_at(psi, q, n);
            acc += s.norm2() - 2.0 * (B * s).norm2();
        }
        bd[i] = acc;
    }
    const double signed_lhs = boundary_integral(metric, bd).real();
    const double lhs = std::abs(signed_lhs);
    const double rhs = 2.0 * l2_norm(geo, metric, psi) * l2_norm(geo, metric, dpsi);
    auto d = detail::make_defect("prop31", g, lhs, rhs, std::max(0.0, lhs - rhs));
    d.extra = {{"slack", rhs - lhs}};
    if (variant == BoundaryVariant::chiral) {
        RealField dens(g);
        for (std::size_t n = 0; n < g.size(); ++n) {
            double acc = 0.0;
            for (int q = 0; q < 2; ++q) acc += re_inner(detail::pair_at(dpsi, q, n), chirality_apply(detail::pair_at(psi, q, n)));
            dens.v[n] = acc;
        }
        const double bulk = 2.0 * sign * area_integral(geo, metric, dens);
        d.extra.emplace_back("equality_defect", std::abs(signed_lhs - bulk));
    }
    return d;
}

// 1/2 Delta_g f = N in D, f = 0 on the boundary, Delta_g = lambda^{-1} Delta_flat.
inline RealField solve_weight_f(const DiskGeometry& geo, const ConformalDiskMetric& metric, const RealField& curvature_norm) {
    const PolarGrid& g = geo.grid();
    if (curvature_norm.grid != g) throw std::invalid_argument("solve_weight_f: field on a different grid");
    for (double x : curvature_norm.v)
        if (!(x >= 0.0)) throw std::invalid_argument("solve_weight_f: curvature norm must be non-negative");
    RealField rhs(g);
    for (std::size_t n = 0; n < g.size(); ++n) rhs.v[n] = 2.0 * metric.lambda.v[n] * curvature_norm.v[n];
    ModalDirichletSolver poisson(g, 0.0, 1.0);
    RealField f = poisson.solve(rhs, std::vector<double>(g.n_theta, 0.0));
    // residual contract on the interior rings
    const ComplexField lap = geo.laplacian(to_complex(f), metric);
    double res = 0.0, scale = 1.0;
    for (int j = 0; j < g.n_r - 1; ++j)
        for (int i = 0; i < g.n_theta; ++i) {
            res = std::max(res, std::abs(0.5 * lap(j, i).real() - curvature_norm(j, i)));
            scale = std::max(scale, curvature_norm(j, i));
        }
    if (!(res <= 1e-6 * scale)) throw SolverError("solve_weight_f: Poisson residual " + std::to_string(res));
    return f;
}

// Mean curvature of the unit circle for the flat metric: -h is the geodesic
// curvature (1 for the outward normal), so h = -1. For lambda|dz|^2 the
// geodesic curvature of |z| = 1 is (1 + r/2 (log lambda)_r) lambda^{-1/2}.
inline std::vector<double> boundary_mean_curvature(const ConformalDiskMetric& metric) {
    const PolarGrid& g = metric.grid();
    const int jb = g.n_r - 1;
    std::vector<double> h(g.n_theta);
    for (int i = 0; i < g.n_theta; ++i) {
        const cplx z = g.z(jb, i);
        // (log lambda)_r = 2 Re(z (log lambda)_z) at |z| = 1
        const double dr_log = 2.0 * std::real(z * metric.dlog_lambda_z(jb, i));
        h[i] = -(1.0 + 0.5 * dr_log) / metric.sqrt_lambda(jb, i);
    }
    return h;
}

// m = 2 weighted Reilly formula:
//   int_dD e^f (Re<Dbar psi, psi> + 1/2 (h + d_n f)|psi|^2) + 1/2 int e^f |D psi|^2
//   = int e^f (1/2 Delta f + R_psi)|psi|^2 + int e^{-f} |P(e^f psi)|^2
// with Dbar = n.D + nabla_n - h/2. The h terms cancel between the two boundary
// pieces, which is why the identity cannot see the sign convention of h.
inline IdentityDefect check_weighted_reilly(const DiskGeometry& geo, const ConformalDiskMetric& metric, const SpinorField& psi, const RealField& f) {
    const PolarGrid& g = geo.grid();
    if (f.grid != g) throw std::invalid_argument("check_weighted_reilly: weight on a different grid");
    const int jb = g.n_r - 1;
    const RealField ef = f.map([](double x) { return std::exp(x); });
    const RealField emf = f.map([](double x) { return std::exp(-x); });
    const SpinorField dpsi = spin_dirac(geo, metric, psi);
    const auto nab = covariant_coordinate(geo, metric, psi);
    const std::vector<double> h = boundary_mean_curvature(metric);
    const ComplexField fr = geo.dr(to_complex(f));

    std::vector<cplx> b1(g.n_theta), b2(g.n_theta);
    for (int i = 0; i < g.n_theta; ++i) {
        const std::size_t n = g.index(jb, i);
        const double th = g.theta(i), sl = metric.sqrt_lambda(jb, i);
        const CliffordVector nrm = outward_normal(BoundaryPoint(th));
        double acc = 0.0;
        for (int q = 0; q < 2; ++q) {
            const SpinorValue s = detail::pair_at(psi, q, n);
            // nabla_n = lambda^{-1/2}(cos nabla_x + sin nabla_y)
            const SpinorValue dn = (1.0 / sl) * (std::cos(th) * detail::pair_at(nab[0], q, n) + std::sin(th) * detail::pair_at(nab[1], q, n));
            const SpinorValue dbar = clifford_mul(nrm, detail::pair_at(dpsi, q, n)) + dn - 0.5 * h[i] * s;
            acc += re_inner(dbar, s);
        }
        const double dnf = fr(jb, i).real() / sl;
        b1[i] = ef(jb, i) * acc;
        b2[i] = ef(jb, i) * 0.5 * (h[i] + dnf) * detail::norm2(psi, n);
    }
    const double B1 = boundary_integral(metric, b1).real(), B2 = boundary_integral(metric, b2).real();

    const ComplexField lapf = geo.laplacian(to_complex(f), metric);
    const RealField R = spin_curvature(metric);
    const SpinorField chi = detail::scale(ef, psi);
    const auto P = twistor_frame(geo, metric, chi);
    RealField d1(g), d2(g), d3(g);
    for (std::size_t n = 0; n < g.size(); ++n) {
        const double p2 = detail::norm2(psi, n);
        d1.v[n] = 0.5 * ef.v[n] * detail::norm2(dpsi, n);
        d2.v[n] = ef.v[n] * (0.5 * lapf.v[n].real() + R.v[n]) * p2;
        d3.v[n] = emf.v[n] * (detail::norm2(P[0], n) + detail::norm2(P[1], n));
    }
    const double I1 = area_integral(geo, metric, d1), I2 = area_integral(geo, metric, d2), I3 = area_integral(geo, metric, d3);
    const double lhs = B1 + B2 + I1, rhs = I2 + I3;
    auto d = detail::make_defect("reilly", g, lhs, rhs, std::abs(lhs - rhs));
    d.extra = {{"boundary_dbar", B1}, {"boundary_weight", B2}, {"bulk_dirac", I1}, {"bulk_curvature", I2}, {"bulk_twistor", I3}};
    return d;
}

struct KernelScanRow {
    int n_r = 0, n_theta = 0;
    double sigma_min = 0.0;
};

// Scaled smallest singular value of the homogeneous (D, B) system per level.
inline std::vector<KernelScanRow> kernel_triviality_scan(const std::string& metric_preset, const std::vector<std::pair<int, int>>& ladder,
                                                         const std::function<CouplingForm(const PolarGrid&)>& omega, BoundaryVariant variant,
                                                         int sign, BoundaryRows rows = BoundaryRows::projector) {
    std::vector<KernelScanRow> out;
    for (const auto& [nr, nt] : ladder) {
        const PolarGrid g(nr, nt);
        const ConformalDiskMetric metric = ConformalDiskMetric::by_name(metric_preset, g);
        const CouplingForm om = omega(g);
        const DiscreteDiracSolver solver(g, variant, sign, rows);
        const DiracCoefficients C = DiracCoefficients::from_coupling(metric, om);
        out.push_back({nr, nt, solver.smallest_singular_value(C)});
    }
    return out;
}

// Band-limited random spinor: each slot a random polynomial in z, zbar of
// total degree <= deg with coefficients ~ N(0,1)/(1 + a + b).
inline SpinorField random_spinor(const PolarGrid& g, int deg, std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<std::array<cplx, 4>> coef;
    std::vector<std::pair<int, int>> pw;
    for (int a = 0; a <= deg; ++a)
        for (int b = 0; a + b <= deg; ++b) {
            pw.emplace_back(a, b);
            std::array<cplx, 4> c;
            for (auto& x : c) x = cplx(N(rng), N(rng)) / (1.0 + a + b);
            coef.push_back(c);
        }
    return SpinorField::from(g, [&](cplx z) {
        std::array<cplx, 4> v{};
        for (std::size_t m = 0; m < pw.size(); ++m) {
            cplx mono = 1.0;
            for (int e = 0; e < pw[m].first; ++e) mono *= z;
            for (int e = 0; e < pw[m].second; ++e) mono *= std::conj(z);
            for (int k = 0; k < 4; ++k) v[k] += coef[m][k] * mono;
        }
        return v;
    });
}

} // namespace spindisk
