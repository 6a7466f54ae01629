#pragma once

#include "spindisk/grid.hpp"

#include <string>
#include <utility>

namespace spindisk {

class DiskGeometry;

// lambda |dz|^2 with log-derivatives and Gauss curvature on the grid.
struct ConformalDiskMetric {
    std::string preset = "flat";
    RealField lambda;
    ComplexField dlog_lambda_z;
    ComplexField dlog_lambda_zbar;
    RealField gauss_curvature;

    const PolarGrid& grid() const { return lambda.grid; }
    bool is_flat() const { return preset == "flat"; }

    static ConformalDiskMetric flat(const PolarGrid& g) {
        ConformalDiskMetric m;
        m.preset = "flat";
        m.lambda = RealField(g, 1.0);
        m.dlog_lambda_z = ComplexField(g);
        m.dlog_lambda_zbar = ComplexField(g);
        m.gauss_curvature = RealField(g, 0.0);
        return m;
    }

    // 4/(1+|z|^2)^2: the unit disk is a hemisphere of the unit sphere, K = 1.
    static ConformalDiskMetric round(const PolarGrid& g) {
        ConformalDiskMetric m;
        m.preset = "round";
        m.lambda = RealField::from(g, [](cplx z) { return 4.0 / std::pow(1.0 + std::norm(z), 2); });
        m.dlog_lambda_z = ComplexField::from(g, [](cplx z) { return -2.0 * std::conj(z) / (1.0 + std::norm(z)); });
        m.dlog_lambda_zbar = ComplexField::from(g, [](cplx z) { return -2.0 * z / (1.0 + std::norm(z)); });
        m.gauss_curvature = RealField(g, 1.0);
        return m;
    }

    // e^{2 Re z}: flat, but the frame still twists, so connection terms are live.
    static ConformalDiskMetric exponential(const PolarGrid& g) {
        ConformalDiskMetric m;
        m.preset = "exp";
        m.lambda = RealField::from(g, [](cplx z) { return std::exp(2.0 * z.real()); });
        m.dlog_lambda_z = ComplexField(g, 1.0);
        m.dlog_lambda_zbar = ComplexField(g, 1.0);
        m.gauss_curvature = RealField(g, 0.0);
        return m;
    }

    static ConformalDiskMetric by_name(const std::string& name, const PolarGrid& g) {
        if (name == "flat") return flat(g);
        if (name == "round") return round(g);
        if (name == "exp") return exponential(g);
        throw std::invalid_argument("unknown metric preset '" + name + "'");
    }

    double sqrt_lambda(int j, int i) const { return std::sqrt(lambda(j, i)); }
};

class DiskGeometry {
public:
    explicit DiskGeometry(const PolarGrid& g) : grid_(g), radial_(g) {}

    const PolarGrid& grid() const { return grid_; }
    const RadialOperators& radial() const { return radial_; }

    ComplexField dr(const ComplexField& u) const {
        check(u);
        ComplexField out(grid_);
        for (int j = 0; j < grid_.n_r; ++j)
            for (int i = 0; i < grid_.n_theta; ++i) out(j, i) = radial_.apply(radial_.d1(j), u, i);
        return out;
    }

    ComplexField drr(const ComplexField& u) const {
        check(u);
        ComplexField out(grid_);
        for (int j = 0; j < grid_.n_r; ++j)
            for (int i = 0; i < grid_.n_theta; ++i) out(j, i) = radial_.apply(radial_.d2(j), u, i);
        return out;
    }

    // Spectral theta derivatives, ring by ring; first derivative drops the Nyquist mode.
    ComplexField dtheta(const ComplexField& u) const { return theta_derivative(u, 1); }
    ComplexField dthetatheta(const ComplexField& u) const { return theta_derivative(u, 2); }

    // d/dzbar = 1/2 e^{i theta} (d_r + i/r d_theta)
    ComplexField dbar(const ComplexField& u) const { return wirtinger(u, +1); }
    // d/dz = 1/2 e^{-i theta} (d_r - i/r d_theta)
    ComplexField dz(const ComplexField& u) const { return wirtinger(u, -1); }

    // coordinate partials
    ComplexField dx(const ComplexField& u) const { return dz(u) + dbar(u); }
    ComplexField dy(const ComplexField& u) const { return I * (dz(u) - dbar(u)); }

    // Gradient components in the orthonormal frame e_k = lambda^{-1/2} d_k.
    std::pair<ComplexField, ComplexField> gradient(const ComplexField& u, const ConformalDiskMetric& m) const {
        ComplexField ux = dx(u), uy = dy(u);
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double s = 1.0 / std::sqrt(m.lambda.v[k]);
            ux.v[k] *= s;
            uy.v[k] *= s;
        }
        return {ux, uy};
    }

    ComplexField laplacian_flat(const ComplexField& u) const {
        ComplexField a = drr(u), b = dr(u), c = dthetatheta(u);
        ComplexField out(grid_);
        for (int j = 0; j < grid_.n_r; ++j) {
            const double r = grid_.r(j);
            for (int i = 0; i < grid_.n_theta; ++i) out(j, i) = a(j, i) + b(j, i) / r + c(j, i) / (r * r);
        }
        return out;
    }

    // Delta_lambda = lambda^{-1} Delta_flat
    ComplexField laplacian(const ComplexField& u, const ConformalDiskMetric& m) const {
        ComplexField out = laplacian_flat(u);
        for (std::size_t k = 0; k < out.size(); ++k) out.v[k] /= m.lambda.v[k];
        return out;
    }

    BoundaryTrace boundary_trace(const ComplexField& u) const {
        check(u);
        const int j = grid_.n_r - 1;
        return BoundaryTrace(std::vector<cplx>(u.ring(j), u.ring(j) + grid_.n_theta));
    }

    // Trapezoid rule for the integral over theta in [0, 2 pi).
    static cplx boundary_integral(const BoundaryTrace& b) {
        cplx acc = 0.0;
        for (const auto& x : b.values) acc += x;
        return acc * (2.0 * pi / b.size());
    }

    cplx area_integral_flat(const ComplexField& u) const {
        check(u);
        cplx acc = 0.0;
        for (int j = 0; j < grid_.n_r; ++j) {
            cplx ring = 0.0;
            for (int i = 0; i < grid_.n_theta; ++i) ring += u(j, i);
            acc += radial_.area_weight(j) * ring;
        }
        return acc;
    }

    // integral of u against lambda dx dy
    cplx area_integral(const ComplexField& u, const ConformalDiskMetric& m) const {
        ComplexField w = u;
        for (std::size_t k = 0; k < w.size(); ++k) w.v[k] *= m.lambda.v[k];
        return area_integral_flat(w);
    }

    double area_integral_flat(const RealField& u) const { return area_integral_flat(to_complex(u)).real(); }

    // Derivatives of sampled log lambda when no closed form is available.
    ConformalDiskMetric metric_from_samples(const RealField& lambda, const std::string& name = "sampled") const {
        ConformalDiskMetric m;
        m.preset = name;
        for (double x : lambda.v)
            if (!(x > 0.0)) throw std::invalid_argument("metric: lambda must be positive");
        m.lambda = lambda;
        ComplexField loglam = to_complex(lambda.map([](double x) { return std::log(x); }));
        m.dlog_lambda_z = dz(loglam);
        m.dlog_lambda_zbar = dbar(loglam);
        ComplexField lap = laplacian_flat(loglam);
        m.gauss_curvature = RealField(grid_);
        for (std::size_t k = 0; k < lambda.size(); ++k) m.gauss_curvature.v[k] = -0.5 * lap.v[k].real() / lambda.v[k];
        return m;
    }

private:
    void check(const ComplexField& u) const {
        if (u.grid != grid_) throw std::invalid_argument("DiskGeometry: field on a different grid");
    }

    ComplexField theta_derivative(const ComplexField& u, int order) const {
        check(u);
        const int n = grid_.n_theta;
        const auto& plan = fft_plan(n);
        ComplexField out(grid_);
        std::vector<cplx> c(n);
        for (int j = 0; j < grid_.n_r; ++j) {
            plan.forward(u.ring(j), c.data());
            for (int k = 0; k < n; ++k) {
                const int m = signed_mode(k, n);
                if (order == 1) c[k] *= (k == n / 2) ? cplx(0.0) : I * static_cast<double>(m);
                else c[k] *= -static_cast<double>(m) * m;
                c[k] /= static_cast<double>(n);
            }
            plan.backward(c.data(), out.ring(j));
        }
        return out;
    }

    ComplexField wirtinger(const ComplexField& u, int s) const {
        ComplexField ur = dr(u), ut = dtheta(u);
        ComplexField out(grid_);
        for (int j = 0; j < grid_.n_r; ++j) {
            const double r = grid_.r(j);
            for (int i = 0; i < grid_.n_theta; ++i) {
                const cplx e = std::polar(0.5, s * grid_.theta(i));
                out(j, i) = e * (ur(j, i) + static_cast<double>(s) * I * ut(j, i) / r);
            }
        }
        return out;
    }

    PolarGrid grid_;
    RadialOperators radial_;
};

} // namespace spindisk
