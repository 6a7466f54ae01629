#include "spindisk/field_io.hpp"
#include "spindisk/geometry.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

using namespace spindisk;

namespace {

double sup_diff(const ComplexField& a, const ComplexField& b) { return (a - b).sup_norm(); }

// smooth non-polynomial test field and its symbolic derivatives
cplx ufun(cplx z) { return std::exp(0.7 * z + 0.4 * std::conj(z) * I); }
cplx ufun_dz(cplx z) { return 0.7 * ufun(z); }
cplx ufun_dbar(cplx z) { return 0.4 * I * ufun(z); }

} // namespace

TEST(Geometry, GridInvariants) {
    EXPECT_THROW(PolarGrid(8, 7), std::invalid_argument);
    EXPECT_THROW(PolarGrid(8, 6), std::invalid_argument);
    EXPECT_THROW(PolarGrid(3, 16), std::invalid_argument);
    PolarGrid g(16, 32);
    EXPECT_EQ(g.r(g.n_r - 1), 1.0);
    for (int j = 1; j < g.n_r; ++j) EXPECT_GT(g.r(j), g.r(j - 1));
    EXPECT_GT(g.r(0), 0.0);
}

TEST(Geometry, FornbergMatchesClassicalStencil) {
    auto w = fornberg_weights(0.0, {-2, -1, 0, 1, 2}, 1);
    EXPECT_NEAR(w[0], 1.0 / 12, 1e-14);
    EXPECT_NEAR(w[1], -8.0 / 12, 1e-14);
    EXPECT_NEAR(w[2], 0.0, 1e-14);
    auto w2 = fornberg_weights(0.0, {-2, -1, 0, 1, 2}, 2);
    EXPECT_NEAR(w2[2], -30.0 / 12, 1e-13);
}

TEST(Geometry, DbarExamples) {
    PolarGrid g(64, 128);
    DiskGeometry geo(g);
    auto z2 = ComplexField::from(g, [](cplx z) { return z * z; });
    EXPECT_LT(geo.dbar(z2).sup_norm(), 1e-10);
    auto zb = ComplexField::from(g, [](cplx z) { return std::conj(z); });
    EXPECT_LT(sup_diff(geo.dbar(zb), ComplexField(g, 1.0)), 1e-10);
    auto zz = ComplexField::from(g, [](cplx z) { return std::norm(z); });
    EXPECT_LT(sup_diff(geo.dz(zz), zb), 1e-10);
}

TEST(Geometry, WirtingerConvergenceOrder) {
    std::vector<double> err;
    for (int n : {16, 32, 64}) {
        PolarGrid g(n, 2 * n);
        DiskGeometry geo(g);
        auto u = ComplexField::from(g, ufun);
        double e = std::max(sup_diff(geo.dbar(u), ComplexField::from(g, ufun_dbar)),
                            sup_diff(geo.dz(u), ComplexField::from(g, ufun_dz)));
        err.push_back(e);
    }
    EXPECT_GT(std::log2(err[1] / err[2]), 4.0 - 0.3);
}

TEST(Geometry, ThetaIndependentFieldHasZeroThetaDerivative) {
    PolarGrid g(16, 32);
    DiskGeometry geo(g);
    auto u = ComplexField::from(g, [](cplx z) { return std::exp(std::norm(z)); });
    auto d = geo.dtheta(u);
    for (auto x : d.v) EXPECT_LT(std::abs(x), 1e-13);
}

TEST(Geometry, LaplacianExamples) {
    PolarGrid g(64, 128);
    DiskGeometry geo(g);
    auto flat = ConformalDiskMetric::flat(g);
    auto harm = ComplexField::from(g, [](cplx z) { return (z * z).real(); });
    EXPECT_LT(geo.laplacian(harm, flat).sup_norm(), 1e-9);
    auto r2 = ComplexField::from(g, [](cplx z) { return std::norm(z); });
    EXPECT_LT(sup_diff(geo.laplacian(r2, flat), ComplexField(g, 4.0)), 1e-9);
    auto round = ConformalDiskMetric::round(g);
    auto expect = ComplexField::from(g, [](cplx z) { return std::pow(1.0 + std::norm(z), 2); });
    EXPECT_LT(sup_diff(geo.laplacian(r2, round), expect), 1e-9);
}

TEST(Geometry, LaplacianConvergence) {
    std::vector<double> err;
    for (int n : {16, 32, 64}) {
        PolarGrid g(n, 2 * n);
        DiskGeometry geo(g);
        auto u = ComplexField::from(g, [](cplx z) { return std::exp(z.real()) * std::cos(2 * z.imag()); });
        auto ex = ComplexField::from(g, [](cplx z) { return -3.0 * std::exp(z.real()) * std::cos(2 * z.imag()); });
        err.push_back(sup_diff(geo.laplacian_flat(u), ex));
    }
    // the u_r / r term loses one order on the innermost ring
    EXPECT_GT(std::log2(err[1] / err[2]), 3.0 - 0.3);
}

TEST(Geometry, Integrals) {
    PolarGrid g(64, 128);
    DiskGeometry geo(g);
    auto one = ComplexField(g, 1.0);
    EXPECT_NEAR(std::abs(DiskGeometry::boundary_integral(geo.boundary_trace(one)) - 2 * pi), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(DiskGeometry::boundary_integral(BoundaryTrace::from(128, [](cplx z) { return z; }))), 0.0, 1e-12);
    EXPECT_NEAR(geo.area_integral(one, ConformalDiskMetric::flat(g)).real(), pi, 1e-8);
    // hemisphere of the unit sphere has area 2 pi
    EXPECT_NEAR(geo.area_integral(one, ConformalDiskMetric::round(g)).real(), 2 * pi, 1e-6);
    // int e^{x} over the disk = 2 pi I_1(1)
    auto ex = ComplexField::from(g, [](cplx z) { return std::exp(z.real()); });
    EXPECT_NEAR(geo.area_integral_flat(ex).real(), 2 * pi * std::cyl_bessel_i(1.0, 1.0), 1e-8);
}

TEST(Geometry, RadialSplitQuadrature) {
    PolarGrid g(32, 64);
    RadialOperators rad(g);
    // odd profile F(s) = s cos(s)
    auto F = [](double s) { return s * std::cos(s); };
    auto prim = [](double s) { return std::cos(s) + s * std::sin(s); };
    for (int j = 0; j < g.n_r; ++j) {
        double in = 0.0, out = 0.0;
        for (int m = 0; m <= j; ++m) in += rad.inner_weights(j)[m] * F(g.r(m));
        for (int m = j; m < g.n_r; ++m) out += rad.outer_weights(j)[m - j] * F(g.r(m));
        // the last two outer intervals only see two or three nodes
        EXPECT_NEAR(in, prim(g.r(j)) - prim(0.0), 1e-6) << j;
        EXPECT_NEAR(out, prim(1.0) - prim(g.r(j)), j >= g.n_r - 3 ? 2e-5 : 1e-6) << j;
    }
}

TEST(Geometry, DiscreteIntegrationByParts) {
    std::vector<double> d;
    for (int n : {16, 32, 64}) {
        PolarGrid g(n, 2 * n);
        DiskGeometry geo(g);
        auto u = ComplexField::from(g, [](cplx z) { return std::exp(0.5 * z.real() + 0.3 * z.imag() * z.imag()); });
        auto v = ComplexField::from(g, [](cplx z) { return std::sin(z.real() - 0.2 * z.imag()) + I * std::norm(z); });
        auto lu = geo.laplacian_flat(u), lv = geo.laplacian_flat(v);
        auto ur = geo.boundary_trace(geo.dr(u)), vr = geo.boundary_trace(geo.dr(v));
        auto ub = geo.boundary_trace(u), vb = geo.boundary_trace(v);
        BoundaryTrace bt(g.n_theta);
        for (int i = 0; i < g.n_theta; ++i) bt[i] = ur[i] * std::conj(vb[i]) - ub[i] * std::conj(vr[i]);
        auto a = geo.area_integral_flat(lu * conj(v)) - geo.area_integral_flat(u * conj(lv));
        d.push_back(std::abs(a - DiskGeometry::boundary_integral(bt)));
    }
    EXPECT_LT(d[2], d[1]);
    EXPECT_LT(d[2], 1e-6);
}

TEST(Geometry, ExpMetricConsistency) {
    PolarGrid g(32, 64);
    DiskGeometry geo(g);
    auto m = ConformalDiskMetric::exponential(g);
    auto sampled = geo.metric_from_samples(m.lambda);
    EXPECT_LT(sup_diff(sampled.dlog_lambda_z, m.dlog_lambda_z), 1e-6);
    EXPECT_LT(sup_diff(to_complex(sampled.gauss_curvature), to_complex(m.gauss_curvature)), 1e-5);
    auto r = ConformalDiskMetric::round(g);
    auto rs = geo.metric_from_samples(r.lambda);
    EXPECT_LT(sup_diff(rs.dlog_lambda_zbar, r.dlog_lambda_zbar), 1e-5);
    EXPECT_LT(sup_diff(to_complex(rs.gauss_curvature), to_complex(r.gauss_curvature)), 1e-4);
    EXPECT_THROW(geo.metric_from_samples(RealField(g, -1.0)), std::invalid_argument);
}

TEST(Geometry, CsvRoundTrip) {
    PolarGrid g(8, 16);
    auto u = ComplexField::from(g, [](cplx z) { return std::exp(z) / 3.0; });
    auto dir = std::filesystem::temp_directory_path() / "spindisk_io_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "u.csv").string();
    write_field_csv(path, u, "flat");
    auto back = read_field_csv(path);
    EXPECT_EQ(back.grid, g);
    for (std::size_t k = 0; k < u.size(); ++k) EXPECT_EQ(back.v[k], u.v[k]);
    std::filesystem::remove_all(dir);
}
