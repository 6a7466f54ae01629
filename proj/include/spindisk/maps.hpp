#pragma once

#include "spindisk/grid.hpp"

#include <functional>
#include <string>

namespace spindisk {

// Target metric rho |dw|^2 on the disk, given by closed forms.
struct TargetMetricPreset {
    std::string name;
    std::function<double(cplx)> rho;
    std::function<cplx(cplx)> dlog_rho_dw; // (log rho)_w at w

    static TargetMetricPreset flat() {
        return {"flat", [](cplx) { return 1.0; }, [](cplx) { return cplx(0.0); }};
    }
    static TargetMetricPreset round() {
        return {"round", [](cplx w) { return 4.0 / std::pow(1.0 + std::norm(w), 2); },
                [](cplx w) { return -2.0 * std::conj(w) / (1.0 + std::norm(w)); }};
    }
    static TargetMetricPreset by_name(const std::string& n) {
        if (n == "flat") return flat();
        if (n == "round") return round();
        throw std::invalid_argument("unknown target metric preset '" + n + "'");
    }
};

// phi: D -> D with its Wirtinger derivatives in closed form.
struct MapPreset {
    std::string name;
    std::function<cplx(cplx)> phi, phi_z, phi_zbar;

    static MapPreset identity() {
        return {"identity", [](cplx z) { return z; }, [](cplx) { return cplx(1.0); }, [](cplx) { return cplx(0.0); }};
    }
    // a non-holomorphic map with |phi| <= 0.9 on the closed disk
    static MapPreset smooth() {
        return {"smooth", [](cplx z) { return 0.6 * z + 0.2 * std::conj(z) + 0.1 * z * z; },
                [](cplx z) { return 0.6 + 0.2 * z; }, [](cplx) { return cplx(0.2); }};
    }
    static MapPreset by_name(const std::string& n) {
        if (n == "identity") return identity();
        if (n == "smooth") return smooth();
        throw std::invalid_argument("unknown map preset '" + n + "'");
    }
};

struct MapData {
    std::string name = "identity";
    std::string target = "flat";
    ComplexField phi, dphi_z, dphi_zbar;
    RealField rho_at_phi;
    ComplexField dlog_rho_dphi, dlog_rho_dphibar;

    const PolarGrid& grid() const { return phi.grid; }

    static MapData make(const PolarGrid& g, const MapPreset& m, const TargetMetricPreset& t) {
        MapData d;
        d.name = m.name;
        d.target = t.name;
        d.phi = ComplexField::from(g, m.phi);
        d.dphi_z = ComplexField::from(g, m.phi_z);
        d.dphi_zbar = ComplexField::from(g, m.phi_zbar);
        d.rho_at_phi = RealField(g);
        d.dlog_rho_dphi = ComplexField(g);
        d.dlog_rho_dphibar = ComplexField(g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const cplx w = d.phi.v[k];
            const double rho = t.rho(w);
            if (!(rho > 0.0)) throw std::invalid_argument("MapData: rho must be positive along phi");
            d.rho_at_phi.v[k] = rho;
            d.dlog_rho_dphi.v[k] = t.dlog_rho_dw(w);
            d.dlog_rho_dphibar.v[k] = std::conj(d.dlog_rho_dphi.v[k]);
        }
        return d;
    }

    static MapData identity_flat(const PolarGrid& g) { return make(g, MapPreset::identity(), TargetMetricPreset::flat()); }

    // (log rho)_phi phi_z and (log rho)_phi phi_zbar, and the tilde (phibar) analogues
    ComplexField coupling_z() const { return dlog_rho_dphi * dphi_z; }
    ComplexField coupling_zbar() const { return dlog_rho_dphi * dphi_zbar; }
    ComplexField coupling_tilde_z() const { return dlog_rho_dphibar * conj(dphi_zbar); }
    ComplexField coupling_tilde_zbar() const { return dlog_rho_dphibar * conj(dphi_z); }
};

} // namespace spindisk
