#include "spindisk/riemann_hilbert.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace spindisk;

namespace {

BoundarySymbol symbol(int n, cplx (*f)(cplx)) { return BoundarySymbol(BoundaryTrace::from(n, f)); }

double sup_diff(const ComplexField& a, const ComplexField& b) { return (a - b).sup_norm(); }

// random band-limited real density with geometric decay
BoundaryTrace random_real_trace(int n, unsigned seed, int kmax = 8) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    std::vector<double> a(kmax + 1), b(kmax + 1);
    for (int k = 0; k <= kmax; ++k) {
        a[k] = nd(gen) * std::pow(0.6, k);
        b[k] = nd(gen) * std::pow(0.6, k);
    }
    BoundaryTrace t(n);
    for (int i = 0; i < n; ++i) {
        double th = t.theta(i), v = a[0];
        for (int k = 1; k <= kmax; ++k) v += a[k] * std::cos(k * th) + b[k] * std::sin(k * th);
        t[i] = v;
    }
    return t;
}

} // namespace

TEST(RiemannHilbert, WindingIndex) {
    EXPECT_EQ(winding_index(symbol(64, [](cplx z) { return 1.0 / z; })), -1);
    EXPECT_EQ(winding_index(symbol(64, [](cplx z) { return 3.0 + z; })), 0);
    EXPECT_EQ(winding_index(symbol(64, [](cplx z) { return z * z * z; })), 3);
    EXPECT_EQ(winding_index(symbol(64, [](cplx z) { return -I / z; })), -1);
    // e^{i 4 theta} on 8 samples jumps by exactly pi
    EXPECT_THROW(winding_index(symbol(8, [](cplx z) { return z * z * z * z; })), std::runtime_error);
    EXPECT_THROW(BoundarySymbol(BoundaryTrace(8, 0.0)), std::invalid_argument);
}

TEST(RiemannHilbert, CauchyIntegralExamples) {
    const int n = 256;
    auto f2 = BoundaryTrace::from(n, [](cplx z) { return z * z; });
    cplx z0(0.3, 0.1);
    EXPECT_LT(std::abs(cauchy_integral(f2, {z0})[0] - z0 * z0), 1e-10);
    auto finv = BoundaryTrace::from(n, [](cplx z) { return 1.0 / z; });
    EXPECT_LT(std::abs(cauchy_integral(finv, {z0})[0]), 1e-10);
    cplx zo(1.7, -0.4);
    EXPECT_LT(std::abs(cauchy_integral(finv, {zo})[0] + 1.0 / zo), 1e-10);
    auto fp = BoundaryTrace::from(n, [](cplx z) { return 1.0 / (z - 2.0); });
    EXPECT_LT(std::abs(cauchy_integral(fp, {z0})[0] - 1.0 / (z0 - 2.0)), 1e-10);
    EXPECT_THROW(cauchy_integral(f2, {cplx(0.0, 1.0)}), std::invalid_argument);
}

TEST(RiemannHilbert, CauchyNearBoundaryUpsampling) {
    // plain trapezoid at r = 0.99 with 128 nodes would be off by O(0.99^128)
    const int n = 128;
    auto fp = BoundaryTrace::from(n, [](cplx z) { return 1.0 / (z - 2.0); });
    for (double r : {0.9, 0.99}) {
        cplx z = std::polar(r, 0.3);
        EXPECT_LT(std::abs(cauchy_integral(fp, {z})[0] - 1.0 / (z - 2.0)), 1e-10) << r;
    }
    // closer in, the upsampling factor saturates; a finer trace recovers accuracy
    const int nf = 512;
    auto ff = BoundaryTrace::from(nf, [](cplx z) { return 1.0 / (z - 2.0); });
    cplx z = std::polar(0.999, 0.3);
    EXPECT_LT(std::abs(cauchy_integral(ff, {z})[0] - 1.0 / (z - 2.0)), 1e-8);
    // outside: 1/(zeta-2) is analytic in |z|<2 so the exterior value is 0
    cplx zo = std::polar(1.01, 1.1);
    EXPECT_LT(std::abs(cauchy_integral(fp, {zo})[0]), 1e-10);
}

TEST(RiemannHilbert, PlemeljJump) {
    const int n = 512;
    auto f = BoundaryTrace::from(n, [](cplx z) { return std::exp(0.5 * z + 0.3 / z); });
    std::vector<double> err;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        double m = 0.0;
        for (int i = 0; i < n; i += 7) {
            cplx zeta = f.z(i);
            auto in = cauchy_integral(f, {zeta * (1.0 - eps)})[0];
            auto out = cauchy_integral(f, {zeta / (1.0 - eps)})[0];
            m = std::max(m, std::abs(in - out - f[i]));
        }
        err.push_back(m);
    }
    // the jump converges like O(eps)
    EXPECT_LT(err[2], 5e-3);
    EXPECT_LT(err[2], err[1]);
    EXPECT_LT(err[1], err[0]);
}

TEST(RiemannHilbert, SchwarzExamples) {
    const int n = 128;
    std::vector<cplx> pts = {0.0, cplx(0.2, -0.5), cplx(-0.7, 0.1)};
    auto one = schwarz_operator(BoundaryTrace(n, 1.0), pts);
    for (auto v : one) EXPECT_LT(std::abs(v - 1.0), 1e-13);
    auto cosv = schwarz_operator(BoundaryTrace::from(n, [](cplx z) { return cplx(z.real()); }), pts);
    for (std::size_t k = 0; k < pts.size(); ++k) EXPECT_LT(std::abs(cosv[k] - pts[k]), 1e-13);
    EXPECT_THROW(schwarz_operator(BoundaryTrace(n, I), pts), std::invalid_argument);
}

TEST(RiemannHilbert, SchwarzReproducesBoundaryAndMatchesPoisson) {
    PolarGrid g(32, 128);
    auto h = random_real_trace(g.n_theta, 7);
    auto S = schwarz_on_grid(h, g);
    for (int i = 0; i < g.n_theta; ++i) EXPECT_NEAR(S(g.n_r - 1, i).real(), h[i].real(), 1e-12);
    // Poisson-kernel oracle at interior points
    std::vector<cplx> pts = {cplx(0.3, 0.2), cplx(-0.5, -0.6), cplx(0.0, 0.6)};
    auto sv = schwarz_operator(h, pts);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        double r = std::abs(pts[k]), t = std::arg(pts[k]), acc = 0.0;
        for (int i = 0; i < g.n_theta; ++i) {
            double P = (1 - r * r) / (1 - 2 * r * std::cos(h.theta(i) - t) + r * r);
            acc += P * h[i].real();
        }
        acc /= g.n_theta;
        EXPECT_NEAR(sv[k].real(), acc, 1e-10);
    }
    EXPECT_NEAR(schwarz_operator(h, {0.0})[0].imag(), 0.0, 1e-14);
    // grid version agrees with the pointwise version
    auto at = schwarz_operator(h, {g.z(10, 5)})[0];
    EXPECT_LT(std::abs(at - S(10, 5)), 1e-12);
}

TEST(RiemannHilbert, AreaTransformZbarOracle) {
    // dbar G = zbar, Re G = 0 on the circle, Im G(0) = 0  =>  G = (zbar^2 - z^2)/2
    std::vector<double> err;
    for (int n : {16, 32, 64}) {
        PolarGrid g(n, 2 * n);
        DiskGeometry geo(g);
        auto w = ComplexField::from(g, [](cplx z) { return std::conj(z); });
        auto G = area_cauchy_transform_on_grid(geo, w);
        auto ex = ComplexField::from(g, [](cplx z) { return 0.5 * (std::conj(z * z) - z * z); });
        err.push_back(sup_diff(G, ex));
        if (n == 64) {
            EXPECT_LT(sup_diff(geo.dbar(G), w), 1e-8);
        }
    }
    EXPECT_LT(err[2], 1e-6);
    EXPECT_EQ(area_cauchy_transform_on_grid(DiskGeometry(PolarGrid(8, 16)), ComplexField(PolarGrid(8, 16))).sup_norm(), 0.0);
}

TEST(RiemannHilbert, AreaTransformSmoothDensity) {
    std::vector<double> dres, bres;
    for (int n : {16, 32, 64}) {
        PolarGrid g(n, 2 * n);
        DiskGeometry geo(g);
        auto w = ComplexField::from(g, [](cplx z) { return std::exp(0.8 * z - 0.5 * std::conj(z)) * (0.3 + std::conj(z) * z); });
        auto G = area_cauchy_transform_on_grid(geo, w);
        dres.push_back(sup_diff(geo.dbar(G), w));
        double b = 0.0;
        for (int i = 0; i < g.n_theta; ++i) b = std::max(b, std::abs(G(g.n_r - 1, i).real()));
        bres.push_back(b);
    }
    EXPECT_LT(dres[2], dres[1]);
    EXPECT_LT(dres[2], 1e-5);
    EXPECT_LT(bres[2], 1e-6);
}

TEST(RiemannHilbert, AreaTransformDirectAgreesAtGridNodes) {
    std::vector<double> diff;
    for (int n : {16, 32, 64}) {
        PolarGrid g(n, 2 * n);
        DiskGeometry geo(g);
        auto w = ComplexField::from(g, [](cplx z) { return std::cos(z) + 0.5 * std::conj(z) * std::conj(z); });
        auto G = area_cauchy_transform_on_grid(geo, w);
        std::vector<cplx> pts;
        std::vector<cplx> ref;
        for (auto [j, i] : {std::pair{n / 3, 1}, std::pair{n / 2, n / 3}, std::pair{n - 3, n}}) {
            pts.push_back(g.z(j, i));
            ref.push_back(G(j, i));
        }
        auto d = area_cauchy_transform(geo, w, pts);
        double m = 0.0;
        for (std::size_t k = 0; k < d.size(); ++k) m = std::max(m, std::abs(d[k] - ref[k]));
        diff.push_back(m);
    }
    // node skipping is first order at a node
    EXPECT_LT(diff[2], diff[0]);
    EXPECT_LT(diff[2], 5e-2);
}

TEST(RiemannHilbert, GProblemExamples) {
    PolarGrid g(32, 64);
    DiskGeometry geo(g);
    auto flat = ConformalDiskMetric::flat(g);
    auto g0 = solve_g_problem(geo, flat, MapData::identity_flat(g));
    EXPECT_LT(g0.sup_norm(), 1e-14);
    auto g1 = solve_g_problem(geo, flat, MapData::make(g, MapPreset::identity(), TargetMetricPreset::round()));
    // datum log rho^{1/2} = log 1 = 0 on |z| = 1 and the area density vanishes
    EXPECT_LT(g1.sup_norm(), 1e-12);
}

TEST(RiemannHilbert, GProblemResidualContractDecays) {
    std::vector<double> ir, br;
    for (int n : {16, 32, 64}) {
        PolarGrid g(n, 2 * n);
        DiskGeometry geo(g);
        auto metric = ConformalDiskMetric::round(g);
        auto map = MapData::make(g, MapPreset::smooth(), TargetMetricPreset::round());
        auto gf = solve_g_problem(geo, metric, map);
        auto res = g_problem_residual(geo, metric, map, gf);
        ir.push_back(res.interior_sup);
        br.push_back(res.boundary_sup);
    }
    EXPECT_LT(ir[2], ir[1]);
    EXPECT_LT(ir[1], ir[0]);
    EXPECT_LT(ir[2], 1e-4);
    EXPECT_LT(br[2], 1e-6);
}

TEST(RiemannHilbert, GProblemRejectsNonpositive) {
    PolarGrid g(8, 16);
    DiskGeometry geo(g);
    auto m = ConformalDiskMetric::flat(g);
    m.lambda.v[3] = 0.0;
    EXPECT_THROW(solve_g_problem(geo, m, MapData::identity_flat(g)), std::invalid_argument);
}

TEST(RiemannHilbert, ResidueOracleExamples) {
    PolarGrid g(16, 256);
    auto phi = symbol(256, [](cplx z) { return 1.0 / z; });
    auto p1 = rh_solve_index_minus_one(phi, BoundaryTrace(256, 1.0), g);
    EXPECT_LT(sup_diff(p1.a_plus, ComplexField(g, 1.0)), 1e-12);
    EXPECT_LT(p1.a_minus.sup_norm(), 1e-12);
    auto p2 = rh_solve_index_minus_one(phi, BoundaryTrace::from(256, [](cplx z) { return 1.0 / z; }), g);
    EXPECT_LT(p2.a_plus.sup_norm(), 1e-12);
    EXPECT_LT(sup_diff(p2.a_minus, ComplexField(g, -1.0)), 1e-12);
    auto p3 = rh_solve_index_minus_one(phi, BoundaryTrace::from(256, [](cplx z) { return z; }), g);
    EXPECT_LT(sup_diff(p3.a_plus, ComplexField::from(g, [](cplx z) { return z; })), 1e-12);
    EXPECT_LT(p3.a_minus.sup_norm(), 1e-12);
    EXPECT_THROW(rh_solve_index_minus_one(symbol(256, [](cplx) { return cplx(2.0); }), BoundaryTrace(256, 1.0), g), std::invalid_argument);
}

TEST(RiemannHilbert, GeneralSymbolSolutionIsHolomorphicAndSatisfiesBC) {
    const int n = 128;
    auto phi = symbol(n, [](cplx z) { return std::exp(0.3 * z + 0.2 / z) * (2.0 + 0.5 * z) / z; });
    auto f = BoundaryTrace::from(n, [](cplx z) { return std::cos(z) + 0.4 / (z - 1.8); });
    std::vector<double> hol;
    for (int nr : {16, 32, 64}) {
        PolarGrid g(nr, n);
        DiskGeometry geo(g);
        auto p = rh_solve_index_minus_one(phi, f, g);
        EXPECT_LT(rh_boundary_residual(p, phi, f), 1e-12);
        hol.push_back(std::max(geo.dbar(p.a_plus).sup_norm(), geo.dbar(p.a_minus).sup_norm()));
        // pointwise route through trapezoid Cauchy integrals at z and 1/conj(z)
        std::vector<cplx> pts = {g.z(nr / 2, 3), g.z(nr - 4, 40), g.z(0, 7)};
        auto ev = rh_evaluate(phi, f, pts);
        EXPECT_LT(std::abs(ev[0].first - p.a_plus(nr / 2, 3)), 1e-11);
        EXPECT_LT(std::abs(ev[1].second - p.a_minus(nr - 4, 40)), 1e-11);
        EXPECT_LT(std::abs(ev[2].second - p.a_minus(0, 7)), 1e-11);
    }
    EXPECT_LT(hol[2], hol[0]);
    EXPECT_LT(hol[2], 1e-6);
    // limit at the origin
    auto at0 = rh_evaluate(phi, f, {0.0})[0];
    auto near0 = rh_evaluate(phi, f, {cplx(1e-7, 0.0)})[0];
    EXPECT_LT(std::abs(at0.second - near0.second), 1e-5);
}

TEST(RiemannHilbert, UniquenessAgainstConstantPerturbation) {
    const int n = 64;
    PolarGrid g(16, n);
    auto phi = symbol(n, [](cplx z) { return -1.0 / z; });
    auto f = BoundaryTrace::from(n, [](cplx z) { return std::exp(z) + 0.2 / z; });
    auto p = rh_solve_index_minus_one(phi, f, g);
    std::mt19937 gen(3);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 20; ++t) {
        cplx a(nd(gen), nd(gen)), b(nd(gen), nd(gen));
        HolomorphicPair q = p;
        for (auto& v : q.a_plus.v) v += a;
        for (auto& v : q.a_minus.v) v += b;
        EXPECT_GT(rh_boundary_residual(q, phi, f), 0.1 * std::min(std::abs(a), std::abs(b)));
    }
}

TEST(RiemannHilbert, NormBoundStableUnderRefinement) {
    auto phi_f = [](cplx z) { return I * std::exp(0.2 * z) / z; };
    auto f_f = [](cplx z) { return std::sin(2.0 * z) + std::conj(z); };
    std::vector<double> C;
    for (int n : {32, 64, 128}) {
        PolarGrid g(n / 2, n);
        auto phi = symbol(n, phi_f);
        auto f = BoundaryTrace::from(n, f_f);
        auto p = rh_solve_index_minus_one(phi, f, g);
        double fs = 0.0;
        for (auto v : f.values) fs = std::max(fs, std::abs(v));
        C.push_back(std::max(p.a_plus.sup_norm(), p.a_minus.sup_norm()) / fs);
    }
    EXPECT_NEAR(C[1] / C[0], 1.0, 0.05);
    EXPECT_NEAR(C[2] / C[1], 1.0, 0.05);
}
