#pragma once

#include "spindisk/dirac.hpp"
#include "spindisk/elliptic.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace spindisk {

// Phi left the tubular neighbourhood where the nearest-point projection is defined.
struct ConstraintError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// N inside R^q through its nearest-point projection pi and two derivatives.
// d2pi(y)[A](B, C) = d^2 pi^A / dy^B dy^C.
struct TargetManifold {
    int q = 0;
    std::string name;
    double tubular_radius = 0.5;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> pi;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> dpi;
    std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&)> d2pi;

    // S^{q-1}: pi(y) = y/|y|, defined off the origin; radius 1/2 keeps |y| >= 1/2.
    static TargetManifold sphere(int q) {
        if (q < 2) throw std::invalid_argument("sphere target needs q >= 2");
        TargetManifold t;
        t.q = q;
        t.name = "sphere";
        t.pi = [](const Eigen::VectorXd& y) -> Eigen::VectorXd { return y / y.norm(); };
        t.dpi = [q](const Eigen::VectorXd& y) -> Eigen::MatrixXd {
            const double s = y.norm();
            return (Eigen::MatrixXd::Identity(q, q) - y * y.transpose() / (s * s)) / s;
        };
        t.d2pi = [q](const Eigen::VectorXd& y) {
            const double s = y.norm(), s3 = s * s * s, s5 = s3 * s * s;
            std::vector<Eigen::MatrixXd> H(q, Eigen::MatrixXd::Zero(q, q));
            for (int a = 0; a < q; ++a)
                for (int b = 0; b < q; ++b)
                    for (int c = 0; c < q; ++c) {
                        const double dab = a == b, dac = a == c, dbc = b == c;
                        H[a](b, c) = -(dab * y(c) + dac * y(b) + dbc * y(a)) / s3 + 3.0 * y(a) * y(b) * y(c) / s5;
                    }
            return H;
        };
        return t;
    }

    // Only pi given: derivatives by central differences (slow; for targets
    // without closed forms).
    static TargetManifold from_projection(int q, std::string name, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> pi, double radius,
                                          double step = 1e-4) {
        TargetManifold t;
        t.q = q;
        t.name = std::move(name);
        t.tubular_radius = radius;
        t.pi = pi;
        t.dpi = [q, pi, step](const Eigen::VectorXd& y) {
            Eigen::MatrixXd P(q, q);
            for (int b = 0; b < q; ++b) {
                Eigen::VectorXd e = Eigen::VectorXd::Zero(q);
                e(b) = step;
                P.col(b) = (pi(y + e) - pi(y - e)) / (2.0 * step);
            }
            return P;
        };
        t.d2pi = [q, pi, step](const Eigen::VectorXd& y) {
            std::vector<Eigen::MatrixXd> H(q, Eigen::MatrixXd::Zero(q, q));
            const Eigen::VectorXd p0 = pi(y);
            for (int b = 0; b < q; ++b)
                for (int c = b; c < q; ++c) {
                    Eigen::VectorXd eb = Eigen::VectorXd::Zero(q), ec = Eigen::VectorXd::Zero(q);
                    eb(b) = step;
                    ec(c) = step;
                    const Eigen::VectorXd d = b == c ? Eigen::VectorXd((pi(y + eb) - 2.0 * p0 + pi(y - eb)) / (step * step))
                                                     : Eigen::VectorXd((pi(y + eb + ec) - pi(y + eb - ec) - pi(y - eb + ec) + pi(y - eb - ec)) / (4.0 * step * step));
                    for (int a = 0; a < q; ++a) H[a](b, c) = H[a](c, b) = d(a);
                }
            return H;
        };
        return t;
    }

    double distance(const Eigen::VectorXd& y) const { return (y - pi(y)).norm(); }
};

using MapField = std::vector<RealField>; // Phi^A, A = 0..q-1

namespace flow_detail {

inline Eigen::VectorXd value_at(const MapField& phi, std::size_t n) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(phi.size()));
    for (std::size_t a = 0; a < phi.size(); ++a) y(static_cast<Eigen::Index>(a)) = phi[a].v[n];
    return y;
}

// (Phi_x, Phi_y) for each component
struct Gradient {
    MapField x, y;
};

inline Gradient gradient(const DiskGeometry& geo, const MapField& phi) {
    Gradient g;
    for (const auto& f : phi) {
        const ComplexField c = to_complex(f);
        g.x.push_back(real_part(geo.dx(c)));
        g.y.push_back(real_part(geo.dy(c)));
    }
    return g;
}

inline void check_tube(const MapField& phi, const TargetManifold& t) {
    for (std::size_t n = 0; n < phi[0].size(); ++n) {
        const double d = t.distance(value_at(phi, n));
        if (!(d < t.tubular_radius)) throw ConstraintError("map left the tubular neighbourhood of " + t.name + " (distance " + std::to_string(d) + ")");
    }
}

inline void check_map(const MapField& phi, const TargetManifold& t) {
    if (static_cast<int>(phi.size()) != t.q) throw std::invalid_argument("map has " + std::to_string(phi.size()) + " components, target needs " + std::to_string(t.q));
    for (const auto& f : phi)
        if (f.grid != phi[0].grid) throw std::invalid_argument("map components on different grids");
}

// Re<Psi^D, X . Psi^F> for the frame vector X = (a, b), summed over both pairs
inline double re_clifford(const std::vector<SpinorField>& psi, int d, int f, double a, double b, std::size_t n) {
    double acc = 0.0;
    for (int p = 0; p < 2; ++p) {
        const SpinorValue sd{psi[d].slot(2 * p).v[n], psi[d].slot(2 * p + 1).v[n]};
        const SpinorValue sf{psi[f].slot(2 * p).v[n], psi[f].slot(2 * p + 1).v[n]};
        acc += re_inner(sd, clifford_mul({a, b}, sf));
    }
    return acc;
}

inline bool spinors_zero(const std::vector<SpinorField>& psi) {
    for (const auto& s : psi)
        if (s.sup_norm() > 0.0) return false;
    return true;
}

} // namespace flow_detail

// Omega = [nu, d nu] along Phi, nu = Id - dpi, with d(nu o Phi) = -d2pi(dPhi).
inline CouplingForm omega_of(const DiskGeometry& geo, const MapField& phi, const TargetManifold& target) {
    flow_detail::check_map(phi, target);
    flow_detail::check_tube(phi, target);
    const int q = target.q;
    const PolarGrid& g = geo.grid();
    std::vector<ComplexField> dz;
    for (const auto& f : phi) dz.push_back(geo.dz(to_complex(f)));
    CouplingForm om = CouplingForm::zero(g, q);
    for (std::size_t n = 0; n < g.size(); ++n) {
        const Eigen::VectorXd y = flow_detail::value_at(phi, n);
        const Eigen::MatrixXd nu = Eigen::MatrixXd::Identity(q, q) - target.dpi(y);
        const auto H = target.d2pi(y);
        Eigen::MatrixXcd dnu = Eigen::MatrixXcd::Zero(q, q);
        for (int a = 0; a < q; ++a)
            for (int b = 0; b < q; ++b)
                for (int c = 0; c < q; ++c) dnu(a, b) -= H[a](b, c) * dz[c].v[n];
        const Eigen::MatrixXcd w = nu.cast<cplx>() * dnu - dnu * nu.cast<cplx>();
        for (int a = 0; a < q; ++a)
            for (int b = 0; b < q; ++b) {
                om.z(a, b).v[n] = w(a, b);
                om.zbar(a, b).v[n] = std::conj(w(a, b));
            }
    }
    return om;
}

// Omega-tilde^A_G = 1/2 R^A_{GDF} Re<Psi^D, e_i . Psi^F> eta^i (components along
// e_1, e_2, stored [A*q + G]) and its contraction <Omega-tilde^A_G, dPhi^G>.
struct CurvatureTerm {
    std::vector<RealField> tilde_x, tilde_y;
    MapField contracted;
};

// Pointwise kernel: w_i(D, F) = Re<Psi^D, e_i . Psi^F>; returns the e_1, e_2
// components of Omega-tilde as q x q matrices [A, G], built from
// S^{AC}_D = pi^A_B pi^C_{BD} and R^A_{GDF} = S^{AC}_D S^{GC}_F - S^{GC}_D S^{AC}_F.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> omega_tilde_at(const TargetManifold& target, const Eigen::VectorXd& y, const Eigen::MatrixXd& wx,
                                                                  const Eigen::MatrixXd& wy) {
    const int q = target.q;
    const Eigen::MatrixXd P = target.dpi(y);
    const auto H = target.d2pi(y);
    // S[D](A, C)
    std::vector<Eigen::MatrixXd> S(q, Eigen::MatrixXd::Zero(q, q));
    for (int d = 0; d < q; ++d)
        for (int c = 0; c < q; ++c) S[d].col(c) = P * H[c].col(d);
    Eigen::MatrixXd tx = Eigen::MatrixXd::Zero(q, q), ty = tx;
    for (int d = 0; d < q; ++d)
        for (int f = 0; f < q; ++f) {
            if (wx(d, f) == 0.0 && wy(d, f) == 0.0) continue;
            // R(A, G) for this (D, F)
            const Eigen::MatrixXd R = S[d] * S[f].transpose() - S[f] * S[d].transpose();
            tx += 0.5 * wx(d, f) * R;
            ty += 0.5 * wy(d, f) * R;
        }
    return {tx, ty};
}

inline CurvatureTerm curvature_term(const DiskGeometry& geo, const MapField& phi, const std::vector<SpinorField>& psi, const TargetManifold& target) {
    flow_detail::check_map(phi, target);
    flow_detail::check_tube(phi, target);
    const int q = target.q;
    if (static_cast<int>(psi.size()) != q) throw std::invalid_argument("curvature_term: expected q spinor fields");
    const PolarGrid& g = geo.grid();
    CurvatureTerm out;
    out.tilde_x.assign(static_cast<std::size_t>(q) * q, RealField(g));
    out.tilde_y = out.tilde_x;
    out.contracted.assign(q, RealField(g));
    if (flow_detail::spinors_zero(psi)) return out;
    const auto grad = flow_detail::gradient(geo, phi);
    Eigen::MatrixXd wx(q, q), wy(q, q);
    for (std::size_t n = 0; n < g.size(); ++n) {
        for (int d = 0; d < q; ++d)
            for (int f = 0; f < q; ++f) {
                wx(d, f) = flow_detail::re_clifford(psi, d, f, 1.0, 0.0, n);
                wy(d, f) = flow_detail::re_clifford(psi, d, f, 0.0, 1.0, n);
            }
        const auto [tx, ty] = omega_tilde_at(target, flow_detail::value_at(phi, n), wx, wy);
        for (int a = 0; a < q; ++a) {
            double contracted = 0.0;
            for (int gg = 0; gg < q; ++gg) {
                out.tilde_x[static_cast<std::size_t>(a) * q + gg].v[n] = tx(a, gg);
                out.tilde_y[static_cast<std::size_t>(a) * q + gg].v[n] = ty(a, gg);
                contracted += tx(a, gg) * grad.x[gg].v[n] + ty(a, gg) * grad.y[gg].v[n];
            }
            out.contracted[a].v[n] = contracted;
        }
    }
    return out;
}

// The two nonlinear terms of the map equation:
// second = pi^A_{BC} <grad Phi^B, grad Phi^C>,
// spinor = pi^A_B pi^C_{BD} pi^C_{EF} Re<Psi^D, grad Phi^E . Psi^F>.
struct NonlinearTerms {
    MapField second, spinor;
};

inline NonlinearTerms nonlinear_terms(const DiskGeometry& geo, const MapField& phi, const std::vector<SpinorField>& psi, const TargetManifold& target) {
    flow_detail::check_map(phi, target);
    flow_detail::check_tube(phi, target);
    const int q = target.q;
    const PolarGrid& g = geo.grid();
    const bool with_spinor = !psi.empty() && !flow_detail::spinors_zero(psi);
    if (with_spinor && static_cast<int>(psi.size()) != q) throw std::invalid_argument("nonlinear_terms: expected q spinor fields");
    const auto grad = flow_detail::gradient(geo, phi);
    NonlinearTerms out{MapField(q, RealField(g)), MapField(q, RealField(g))};
    std::vector<double> v(static_cast<std::size_t>(q) * q * q);
    for (std::size_t n = 0; n < g.size(); ++n) {
        const Eigen::VectorXd y = flow_detail::value_at(phi, n);
        const auto H = target.d2pi(y);
        for (int a = 0; a < q; ++a) {
            double acc = 0.0;
            for (int b = 0; b < q; ++b)
                for (int c = 0; c < q; ++c) acc += H[a](b, c) * (grad.x[b].v[n] * grad.x[c].v[n] + grad.y[b].v[n] * grad.y[c].v[n]);
            out.second[a].v[n] = acc;
        }
        if (!with_spinor) continue;
        const Eigen::MatrixXd P = target.dpi(y);
        // v[E][D][F] = Re<Psi^D, grad Phi^E . Psi^F>
        for (int e = 0; e < q; ++e)
            for (int d = 0; d < q; ++d)
                for (int f = 0; f < q; ++f)
                    v[(static_cast<std::size_t>(e) * q + d) * q + f] = flow_detail::re_clifford(psi, d, f, grad.x[e].v[n], grad.y[e].v[n], n);
        // T^C_D = pi^C_{EF} v[E][D][F]
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(q, q);
        for (int c = 0; c < q; ++c)
            for (int d = 0; d < q; ++d)
                for (int e = 0; e < q; ++e)
                    for (int f = 0; f < q; ++f) T(c, d) += H[c](e, f) * v[(static_cast<std::size_t>(e) * q + d) * q + f];
        for (int a = 0; a < q; ++a) {
            double acc = 0.0;
            for (int b = 0; b < q; ++b)
                for (int c = 0; c < q; ++c)
                    for (int d = 0; d < q; ++d) acc += P(a, b) * H[c](b, d) * T(c, d);
            out.spinor[a].v[n] = acc;
        }
    }
    return out;
}

// Delta Phi^A - pi^A_{BC} <grad Phi^B, grad Phi^C> - pi^A_B pi^C_{BD} pi^C_{EF} Re<Psi^D, grad Phi^E . Psi^F>
inline MapField flow_rhs(const DiskGeometry& geo, const MapField& phi, const std::vector<SpinorField>& psi, const TargetManifold& target) {
    const auto nl = nonlinear_terms(geo, phi, psi, target);
    MapField out;
    for (int a = 0; a < target.q; ++a) out.push_back(real_part(geo.laplacian_flat(to_complex(phi[a]))) - nl.second[a] - nl.spinor[a]);
    return out;
}

// Same right-hand side written with the commutator forms:
// Delta Phi^A + <Omega^A_B, dPhi^B> - <Omega-tilde^A_B, dPhi^B>.
inline MapField flow_rhs_commutator_form(const DiskGeometry& geo, const MapField& phi, const std::vector<SpinorField>& psi, const TargetManifold& target) {
    const int q = target.q;
    const CouplingForm om = omega_of(geo, phi, target);
    const CurvatureTerm ct = curvature_term(geo, phi, psi, target);
    const auto grad = flow_detail::gradient(geo, phi);
    MapField out;
    for (int a = 0; a < q; ++a) {
        RealField r = real_part(geo.laplacian_flat(to_complex(phi[a])));
        for (std::size_t n = 0; n < r.size(); ++n) {
            double acc = 0.0;
            for (int b = 0; b < q; ++b) {
                const cplx w = om.z(a, b).v[n];
                // Omega(d_x) = 2 Re w, Omega(d_y) = -2 Im w
                acc += 2.0 * w.real() * grad.x[b].v[n] - 2.0 * w.imag() * grad.y[b].v[n];
            }
            r.v[n] += acc - ct.contracted[a].v[n];
        }
        out.push_back(r);
    }
    return out;
}

// sup over nodes of |nu(Phi) Psi|, the normal part of the spinor
inline double tangency_sup(const MapField& phi, const std::vector<SpinorField>& psi, const TargetManifold& target) {
    const int q = target.q;
    double m = 0.0;
    for (std::size_t n = 0; n < phi[0].size(); ++n) {
        const Eigen::VectorXd y = flow_detail::value_at(phi, n);
        const Eigen::MatrixXd nu = Eigen::MatrixXd::Identity(q, q) - target.dpi(y);
        double s = 0.0;
        for (int k = 0; k < 4; ++k) {
            Eigen::VectorXcd col(q);
            for (int a = 0; a < q; ++a) col(a) = psi[a].slot(k).v[n];
            s += (nu.cast<cplx>() * col).squaredNorm();
        }
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

struct DiracSubstep {
    std::vector<SpinorField> psi;
    double tangency_sup = 0.0;
    LsqrInfo info;
};

// Solve D Psi^A + Omega^A_B . Psi^B = 0, B Psi = B psi0 along the current map.
inline DiracSubstep dirac_substep(const DiscreteDiracSolver& solver, const DiskGeometry& geo, const MapField& phi, const std::vector<SpinorTrace>& psi0,
                                  const TargetManifold& target) {
    const PolarGrid& g = geo.grid();
    const CouplingForm om = omega_of(geo, phi, target);
    const ConformalDiskMetric flat = ConformalDiskMetric::flat(g);
    std::vector<SpinorField> eta(target.q, SpinorField(g));
    auto sol = solve_bvp_discrete(solver, flat, om, eta, psi0);
    DiracSubstep out;
    out.tangency_sup = tangency_sup(phi, sol.psi, target);
    out.psi = std::move(sol.psi);
    out.info = sol.info;
    return out;
}

// One backward Euler step (Id - dt Delta) Phi' = Phi + dt source, Phi' = boundary on r = 1.
class HeatStepper {
public:
    HeatStepper(const PolarGrid& g, double dt) : dt_(dt), solver_(g, 1.0, -dt) {
        if (!(dt > 0.0)) throw std::invalid_argument("heat step: dt must be positive");
    }
    double dt() const { return dt_; }

    MapField step(const MapField& phi, const MapField& source, const std::vector<std::vector<double>>& boundary) const {
        if (boundary.size() != phi.size() || (!source.empty() && source.size() != phi.size()))
            throw std::invalid_argument("heat step: component count mismatch");
        MapField out;
        for (std::size_t a = 0; a < phi.size(); ++a) {
            RealField rhs = phi[a];
            if (!source.empty())
                for (std::size_t n = 0; n < rhs.size(); ++n) rhs.v[n] += dt_ * source[a].v[n];
            out.push_back(solver_.solve(rhs, boundary[a]));
        }
        return out;
    }

private:
    double dt_;
    ModalDirichletSolver solver_;
};

inline MapField heat_substep(const MapField& phi, const MapField& source, double dt, const std::vector<std::vector<double>>& boundary) {
    return HeatStepper(phi.at(0).grid, dt).step(phi, source, boundary);
}

// ---------------------------------------------------------------------------
// Preset data and the time loop.

// phi(z, t) in R^q; the first three coordinates carry the map, the rest are 0.
struct MapPresetFamily {
    std::string name = "constant";
    double param = 1.0;    // equivariant: boundary angle c; holomorphic: scale a
    double rotation = 0.0; // boundary data rotates about the last axis at this rate

    std::vector<double> operator()(cplx z, double t, int q) const {
        if (q < 3) throw std::invalid_argument("map presets need q >= 3");
        std::vector<double> y(q, 0.0);
        const double r = std::abs(z);
        const cplx rot = std::polar(1.0, rotation * t);
        if (name == "constant") {
            y[2] = 1.0;
        } else if (name == "equivariant") {
            // (sin(c r) e^{i theta}, cos(c r)): degree-one, not harmonic
            const double beta = param * r;
            const cplx e = (r > 0.0 ? z / r : cplx(1.0)) * rot;
            y[0] = std::sin(beta) * e.real();
            y[1] = std::sin(beta) * e.imag();
            y[2] = std::cos(beta);
        } else if (name == "holomorphic") {
            // inverse stereographic image of a z: harmonic, so a fixed point of the flow
            const cplx w = param * z * rot;
            const double d = 1.0 + std::norm(w);
            y[0] = 2.0 * w.real() / d;
            y[1] = 2.0 * w.imag() / d;
            y[2] = (1.0 - std::norm(w)) / d;
        } else {
            throw std::invalid_argument("unknown map preset '" + name + "'");
        }
        return y;
    }
};

// psi0^A = amplitude * dpi(phi)^A_B v^B (1, zbar)/sqrt 2 on the untilded pair: tangent to N.
struct SpinorPresetFamily {
    std::string name = "zero";
    double amplitude = 0.0;

    bool is_zero() const { return name == "zero" || amplitude == 0.0; }

    std::vector<SpinorTrace> operator()(const PolarGrid& g, const MapPresetFamily& map, double t, const TargetManifold& target) const {
        const int q = target.q, n = g.n_theta;
        std::vector<SpinorTrace> out(q, SpinorTrace(n));
        if (is_zero()) return out;
        if (name != "tangent") throw std::invalid_argument("unknown spinor preset '" + name + "'");
        Eigen::VectorXd v(q);
        for (int a = 0; a < q; ++a) v(a) = 1.0 / (1.0 + a);
        for (int i = 0; i < n; ++i) {
            const cplx z = std::polar(1.0, g.theta(i));
            const auto y = map(z, t, q);
            const Eigen::VectorXd w = target.dpi(Eigen::Map<const Eigen::VectorXd>(y.data(), q)) * v;
            for (int a = 0; a < q; ++a) {
                out[a].f_plus[i] = amplitude * w(a) / std::sqrt(2.0);
                out[a].f_minus[i] = amplitude * w(a) * std::conj(z) / std::sqrt(2.0);
            }
        }
        return out;
    }
};

struct FlowConfig {
    int n_r = 24, n_theta = 48;
    int q = 3;
    double dt = 1e-3;
    double t_end = 1e-2;
    MapPresetFamily map;
    SpinorPresetFamily spinor;
    int sign = 1;
    BoundaryVariant variant = BoundaryVariant::chiral;
    double blowup_threshold = 1e3;
    double tubular_radius = 0.5;

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("flow: dt must be positive");
        if (!(t_end >= 0.0)) throw std::invalid_argument("flow: t_end must be non-negative");
        if (!(blowup_threshold > 0.0)) throw std::invalid_argument("flow: blowup threshold must be positive");
        if (!(tubular_radius > 0.0)) throw std::invalid_argument("flow: tubular radius must be positive");
        if (sign != 1 && sign != -1) throw std::invalid_argument("flow: sign must be +1 or -1");
        (void)PolarGrid(n_r, n_theta);
    }
};

struct FlowMonitors {
    double t = 0.0;
    double energy = 0.0;
    double grad_sup = 0.0;
    double constraint_sup = 0.0;
    double tangency_sup = 0.0;
};

struct FlowState {
    double t = 0.0;
    MapField phi;
    std::vector<SpinorField> psi;
    FlowMonitors monitors;
};

enum class FlowStatus { completed, blowup, constraint };

struct FlowResult {
    FlowStatus status = FlowStatus::completed;
    std::vector<FlowMonitors> trajectory;
    FlowState final_state;
    int steps = 0;
    std::string message;
};

inline FlowMonitors measure(const DiskGeometry& geo, const MapField& phi, const TargetManifold& target, double t, double tangency) {
    FlowMonitors m;
    m.t = t;
    m.tangency_sup = tangency;
    const auto grad = flow_detail::gradient(geo, phi);
    RealField dens(geo.grid());
    for (std::size_t n = 0; n < dens.size(); ++n) {
        double s = 0.0;
        for (std::size_t a = 0; a < phi.size(); ++a) s += grad.x[a].v[n] * grad.x[a].v[n] + grad.y[a].v[n] * grad.y[a].v[n];
        dens.v[n] = s;
        m.grad_sup = std::max(m.grad_sup, std::sqrt(s));
        const Eigen::VectorXd y = flow_detail::value_at(phi, n);
        m.constraint_sup = std::max(m.constraint_sup, target.distance(y));
    }
    m.energy = 0.5 * geo.area_integral_flat(dens);
    return m;
}

inline MapField sample_map(const PolarGrid& g, const MapPresetFamily& map, double t, int q) {
    MapField phi(q, RealField(g));
    for (int j = 0; j < g.n_r; ++j)
        for (int i = 0; i < g.n_theta; ++i) {
            const auto y = map(g.z(j, i), t, q);
            for (int a = 0; a < q; ++a) phi[a](j, i) = y[a];
        }
    return phi;
}

inline std::vector<std::vector<double>> boundary_values(const PolarGrid& g, const MapPresetFamily& map, double t, int q) {
    std::vector<std::vector<double>> b(q, std::vector<double>(g.n_theta));
    for (int i = 0; i < g.n_theta; ++i) {
        const auto y = map(std::polar(1.0, g.theta(i)), t, q);
        for (int a = 0; a < q; ++a) b[a][i] = y[a];
    }
    return b;
}

// Time-lagged splitting: Psi_k from Phi_k, then one implicit heat step with the
// nonlinear terms as explicit source. on_step sees every recorded state.
inline FlowResult run_flow(const FlowConfig& cfg, const std::function<void(const FlowState&, int)>& on_step = {},
                           const std::optional<MapField>& initial = std::nullopt) {
    cfg.validate();
    const PolarGrid g(cfg.n_r, cfg.n_theta);
    const DiskGeometry geo(g);
    TargetManifold target = TargetManifold::sphere(cfg.q);
    target.tubular_radius = cfg.tubular_radius;
    const HeatStepper heat(g, cfg.dt);
    const DiscreteDiracSolver dirac(g, cfg.variant, cfg.sign);

    FlowResult res;
    FlowState st;
    st.t = 0.0;
    st.phi = initial ? *initial : sample_map(g, cfg.map, 0.0, cfg.q);
    flow_detail::check_map(st.phi, target);
    st.psi.assign(cfg.q, SpinorField(g));

    auto spinor_step = [&](FlowState& s) {
        if (cfg.spinor.is_zero()) {
            s.psi.assign(cfg.q, SpinorField(g));
            return 0.0;
        }
        auto d = dirac_substep(dirac, geo, s.phi, cfg.spinor(g, cfg.map, s.t, target), target);
        s.psi = std::move(d.psi);
        return d.tangency_sup;
    };

    const int nsteps = static_cast<int>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
    try {
        flow_detail::check_tube(st.phi, target);
        const double tan0 = spinor_step(st);
        st.monitors = measure(geo, st.phi, target, st.t, tan0);
        res.trajectory.push_back(st.monitors);
        if (on_step) on_step(st, 0);
        for (int k = 0; k < nsteps; ++k) {
            const auto nl = nonlinear_terms(geo, st.phi, st.psi, target);
            MapField source;
            for (int a = 0; a < cfg.q; ++a) source.push_back((-1.0) * (nl.second[a] + nl.spinor[a]));
            const double t1 = (k + 1) * cfg.dt;
            FlowState next;
            next.t = t1;
            next.phi = heat.step(st.phi, source, boundary_values(g, cfg.map, t1, cfg.q));
            flow_detail::check_tube(next.phi, target);
            const double tan = spinor_step(next);
            next.monitors = measure(geo, next.phi, target, t1, tan);
            st = std::move(next);
            res.trajectory.push_back(st.monitors);
            res.steps = k + 1;
            if (on_step) on_step(st, k + 1);
            if (st.monitors.grad_sup > cfg.blowup_threshold) {
                res.status = FlowStatus::blowup;
                res.message = "sup |dPhi| = " + std::to_string(st.monitors.grad_sup) + " exceeded threshold at t = " + std::to_string(st.t);
                break;
            }
        }
    } catch (const ConstraintError& e) {
        res.status = FlowStatus::constraint;
        res.message = e.what();
    }
    res.final_state = std::move(st);
    return res;
}

// Harmonic map flow into S^{q-1} with the tension written out by hand,
// pi^A_{BC} X^B X^C = (-2 X^A (y.X) - y^A |X|^2)/s^3 + 3 y^A (y.X)^2/s^5,
// and no spinor. Same time stepping as run_flow; used as a reference run.
inline FlowResult run_harmonic_flow_sphere(const FlowConfig& cfg, const std::function<void(const FlowState&, int)>& on_step = {}) {
    cfg.validate();
    const PolarGrid g(cfg.n_r, cfg.n_theta);
    const DiskGeometry geo(g);
    const int q = cfg.q;
    const ModalDirichletSolver solve(g, 1.0, -cfg.dt);
    auto monitors = [&](const MapField& phi, double t) {
        FlowMonitors m;
        m.t = t;
        RealField dens(g);
        MapField gx, gy;
        for (const auto& f : phi) {
            gx.push_back(real_part(geo.dx(to_complex(f))));
            gy.push_back(real_part(geo.dy(to_complex(f))));
        }
        for (std::size_t n = 0; n < g.size(); ++n) {
            double s = 0.0, r2 = 0.0;
            for (int a = 0; a < q; ++a) {
                s += gx[a].v[n] * gx[a].v[n] + gy[a].v[n] * gy[a].v[n];
                r2 += phi[a].v[n] * phi[a].v[n];
            }
            dens.v[n] = s;
            m.grad_sup = std::max(m.grad_sup, std::sqrt(s));
            m.constraint_sup = std::max(m.constraint_sup, std::abs(std::sqrt(r2) - 1.0));
        }
        m.energy = 0.5 * geo.area_integral_flat(dens);
        return m;
    };
    FlowResult res;
    FlowState st;
    st.phi = sample_map(g, cfg.map, 0.0, q);
    st.psi.assign(q, SpinorField(g));
    auto in_tube = [&](const FlowMonitors& m) {
        if (!(m.constraint_sup < cfg.tubular_radius)) {
            res.status = FlowStatus::constraint;
            res.message = "map left the tubular neighbourhood of sphere (distance " + std::to_string(m.constraint_sup) + ")";
            return false;
        }
        return true;
    };
    st.monitors = monitors(st.phi, 0.0);
    if (!in_tube(st.monitors)) {
        res.final_state = std::move(st);
        return res;
    }
    res.trajectory.push_back(st.monitors);
    if (on_step) on_step(st, 0);
    const int nsteps = static_cast<int>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
    for (int k = 0; k < nsteps; ++k) {
        std::vector<MapField> grad(2);
        for (const auto& f : st.phi) {
            grad[0].push_back(real_part(geo.dx(to_complex(f))));
            grad[1].push_back(real_part(geo.dy(to_complex(f))));
        }
        MapField rhs = st.phi;
        for (std::size_t n = 0; n < g.size(); ++n) {
            double s2 = 0.0;
            for (int a = 0; a < q; ++a) s2 += st.phi[a].v[n] * st.phi[a].v[n];
            const double s = std::sqrt(s2), s3 = s2 * s, s5 = s3 * s2;
            for (const auto& X : grad) {
                double yx = 0.0, xx = 0.0;
                for (int a = 0; a < q; ++a) {
                    yx += st.phi[a].v[n] * X[a].v[n];
                    xx += X[a].v[n] * X[a].v[n];
                }
                for (int a = 0; a < q; ++a)
                    rhs[a].v[n] -= cfg.dt * ((-2.0 * X[a].v[n] * yx - st.phi[a].v[n] * xx) / s3 + 3.0 * st.phi[a].v[n] * yx * yx / s5);
            }
        }
        const double t1 = (k + 1) * cfg.dt;
        const auto bd = boundary_values(g, cfg.map, t1, q);
        FlowState next;
        next.t = t1;
        for (int a = 0; a < q; ++a) next.phi.push_back(solve.solve(rhs[a], bd[a]));
        next.psi = st.psi;
        next.monitors = monitors(next.phi, t1);
        if (!in_tube(next.monitors)) break;
        st = std::move(next);
        res.trajectory.push_back(st.monitors);
        res.steps = k + 1;
        if (on_step) on_step(st, k + 1);
        if (st.monitors.grad_sup > cfg.blowup_threshold) {
            res.status = FlowStatus::blowup;
            res.message = "sup |dPhi| = " + std::to_string(st.monitors.grad_sup) + " exceeded threshold at t = " + std::to_string(st.t);
            break;
        }
    }
    res.final_state = std::move(st);
    return res;
}

} // namespace spindisk
