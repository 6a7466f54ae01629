#pragma once

#include "spindisk/riemann_hilbert.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace spindisk {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Boundary values of the four components.
struct SpinorTrace {
    BoundaryTrace f_plus, f_minus, ft_plus, ft_minus;

    SpinorTrace() = default;
    explicit SpinorTrace(int n) : f_plus(n), f_minus(n), ft_plus(n), ft_minus(n) {}

    // f(z) -> {f+, f-, ft+, ft-}
    template <class F>
    static SpinorTrace from(int n, F&& f) {
        SpinorTrace t(n);
        for (int i = 0; i < n; ++i) {
            const auto v = f(t.f_plus.z(i));
            t.f_plus[i] = v[0];
            t.f_minus[i] = v[1];
            t.ft_plus[i] = v[2];
            t.ft_minus[i] = v[3];
        }
        return t;
    }
    int size() const { return f_plus.size(); }
    BoundaryTrace& slot(int k) { return k == 0 ? f_plus : k == 1 ? f_minus : k == 2 ? ft_plus : ft_minus; }
    const BoundaryTrace& slot(int k) const { return k == 0 ? f_plus : k == 1 ? f_minus : k == 2 ? ft_plus : ft_minus; }
};

// (f+, f-) is the pair twisted by dphi, (ft+, ft-) the one twisted by dphibar.
struct SpinorField {
    ComplexField f_plus, f_minus, ft_plus, ft_minus;

    SpinorField() = default;
    explicit SpinorField(const PolarGrid& g) : f_plus(g), f_minus(g), ft_plus(g), ft_minus(g) {}

    template <class F>
    static SpinorField from(const PolarGrid& g, F&& f) {
        SpinorField s(g);
        for (int j = 0; j < g.n_r; ++j)
            for (int i = 0; i < g.n_theta; ++i) {
                const auto v = f(g.z(j, i));
                s.f_plus(j, i) = v[0];
                s.f_minus(j, i) = v[1];
                s.ft_plus(j, i) = v[2];
                s.ft_minus(j, i) = v[3];
            }
        return s;
    }

    const PolarGrid& grid() const { return f_plus.grid; }
    ComplexField& slot(int k) { return k == 0 ? f_plus : k == 1 ? f_minus : k == 2 ? ft_plus : ft_minus; }
    const ComplexField& slot(int k) const { return k == 0 ? f_plus : k == 1 ? f_minus : k == 2 ? ft_plus : ft_minus; }

    void validate() const {
        if (f_minus.grid != f_plus.grid || ft_plus.grid != f_plus.grid || ft_minus.grid != f_plus.grid)
            throw std::invalid_argument("SpinorField: components live on different grids");
        for (int k = 0; k < 4; ++k)
            if (slot(k).size() != f_plus.grid.size()) throw std::invalid_argument("SpinorField: component size mismatch");
    }

    SpinorTrace boundary_trace() const {
        const auto& g = grid();
        SpinorTrace t(g.n_theta);
        for (int k = 0; k < 4; ++k)
            for (int i = 0; i < g.n_theta; ++i) t.slot(k)[i] = slot(k)(g.n_r - 1, i);
        return t;
    }

    double sup_norm() const {
        double m = 0.0;
        for (std::size_t n = 0; n < f_plus.size(); ++n) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += std::norm(slot(k).v[n]);
            m = std::max(m, std::sqrt(s));
        }
        return m;
    }

    SpinorField& operator+=(const SpinorField& o) { for (int k = 0; k < 4; ++k) slot(k) += o.slot(k); return *this; }
    SpinorField& operator-=(const SpinorField& o) { for (int k = 0; k < 4; ++k) slot(k) -= o.slot(k); return *this; }
    SpinorField& operator*=(cplx c) { for (int k = 0; k < 4; ++k) slot(k) *= c; return *this; }
};

inline SpinorField operator+(SpinorField a, const SpinorField& b) { return a += b; }
inline SpinorField operator-(SpinorField a, const SpinorField& b) { return a -= b; }
inline SpinorField operator*(cplx c, SpinorField a) { return a *= c; }

inline double sup_difference(const SpinorField& a, const SpinorField& b) { return (a - b).sup_norm(); }

// Omega^A_B = omega_z dz + omega_zbar dzbar, stored at [A*q + B].
struct CouplingForm {
    int q = 0;
    PolarGrid grid;
    std::vector<ComplexField> omega_z, omega_zbar;

    static CouplingForm zero(const PolarGrid& g, int q) {
        if (q < 1) throw std::invalid_argument("CouplingForm: q must be >= 1");
        CouplingForm c;
        c.q = q;
        c.grid = g;
        c.omega_z.assign(static_cast<std::size_t>(q) * q, ComplexField(g));
        c.omega_zbar.assign(static_cast<std::size_t>(q) * q, ComplexField(g));
        return c;
    }

    ComplexField& z(int a, int b) { return omega_z[static_cast<std::size_t>(a) * q + b]; }
    const ComplexField& z(int a, int b) const { return omega_z[static_cast<std::size_t>(a) * q + b]; }
    ComplexField& zbar(int a, int b) { return omega_zbar[static_cast<std::size_t>(a) * q + b]; }
    const ComplexField& zbar(int a, int b) const { return omega_zbar[static_cast<std::size_t>(a) * q + b]; }

    // a dx + b dy  ->  (a - ib)/2 dz + (a + ib)/2 dzbar
    void set_real(int a, int b, const RealField& ax, const RealField& ay) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            z(a, b).v[k] = 0.5 * cplx(ax.v[k], -ay.v[k]);
            zbar(a, b).v[k] = 0.5 * cplx(ax.v[k], ay.v[k]);
        }
    }

    bool is_zero() const {
        for (const auto& f : omega_z)
            if (f.sup_norm() > 0.0) return false;
        for (const auto& f : omega_zbar)
            if (f.sup_norm() > 0.0) return false;
        return true;
    }

    double sup_norm() const {
        double m = 0.0;
        for (const auto& f : omega_z) m = std::max(m, f.sup_norm());
        for (const auto& f : omega_zbar) m = std::max(m, f.sup_norm());
        return m;
    }

    double antisymmetry_defect() const {
        double d = 0.0;
        for (int a = 0; a < q; ++a)
            for (int b = 0; b < q; ++b) {
                d = std::max(d, (z(a, b) + z(b, a)).sup_norm());
                d = std::max(d, (zbar(a, b) + zbar(b, a)).sup_norm());
            }
        return d;
    }

    void validate() const {
        if (q < 1 || omega_z.size() != static_cast<std::size_t>(q) * q || omega_zbar.size() != omega_z.size())
            throw std::invalid_argument("CouplingForm: wrong number of entries");
        for (std::size_t k = 0; k < omega_z.size(); ++k)
            if (omega_z[k].grid != grid || omega_zbar[k].grid != grid) throw std::invalid_argument("CouplingForm: grid mismatch");
        if (antisymmetry_defect() > 1e-12 * (1.0 + sup_norm())) throw std::invalid_argument("CouplingForm: not antisymmetric");
    }

    // Real antisymmetric form with coefficients that are random quadratics in
    // (x, y), scaled so that sup |Omega| is about `amplitude`.
    static CouplingForm random_smooth(const PolarGrid& g, int q, double amplitude, unsigned seed) {
        CouplingForm c = zero(g, q);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (int a = 0; a < q; ++a)
            for (int b = a + 1; b < q; ++b) {
                std::array<double, 12> co{};
                for (auto& x : co) x = U(rng);
                auto poly = [&](int o, cplx z) {
                    const double x = z.real(), y = z.imag();
                    return co[o] + co[o + 1] * x + co[o + 2] * y + co[o + 3] * x * x + co[o + 4] * x * y + co[o + 5] * y * y;
                };
                RealField ax = RealField::from(g, [&](cplx z) { return amplitude * poly(0, z) / 3.0; });
                RealField ay = RealField::from(g, [&](cplx z) { return amplitude * poly(6, z) / 3.0; });
                c.set_real(a, b, ax, ay);
                c.set_real(b, a, (-1.0) * ax, (-1.0) * ay);
            }
        return c;
    }
};

// The twisted Dirac operator on the four components (block formula).
inline SpinorField dirac_apply(const DiskGeometry& geo, const ConformalDiskMetric& metric, const MapData& map, const SpinorField& psi) {
    psi.validate();
    const ComplexField cz = map.coupling_z(), czb = map.coupling_zbar(), ctz = map.coupling_tilde_z(), ctzb = map.coupling_tilde_zbar();
    const ComplexField dzm = geo.dz(psi.f_minus), dbp = geo.dbar(psi.f_plus);
    const ComplexField dztm = geo.dz(psi.ft_minus), dbtp = geo.dbar(psi.ft_plus);
    SpinorField out(psi.grid());
    for (std::size_t k = 0; k < out.f_plus.size(); ++k) {
        const double s = 2.0 / std::sqrt(metric.lambda.v[k]);
        const cplx a = 0.25 * metric.dlog_lambda_z.v[k], b = 0.25 * metric.dlog_lambda_zbar.v[k];
        out.f_plus.v[k] = -s * (dzm.v[k] + (a + cz.v[k]) * psi.f_minus.v[k]);
        out.f_minus.v[k] = s * (dbp.v[k] + (b + czb.v[k]) * psi.f_plus.v[k]);
        out.ft_plus.v[k] = -s * (dztm.v[k] + (a + ctz.v[k]) * psi.ft_minus.v[k]);
        out.ft_minus.v[k] = s * (dbtp.v[k] + (b + ctzb.v[k]) * psi.ft_plus.v[k]);
    }
    return out;
}

// Omega acting through Clifford multiplication: the real form a dx + b dy acts
// as lambda^{-1/2}(a E1 + b E2), i.e. on (s+, s-) as
// lambda^{-1/2}(-2 omega_z s-, 2 omega_zbar s+). Both pairs of each field are acted on.
inline std::vector<SpinorField> coupling_apply(const ConformalDiskMetric& metric, const CouplingForm& om, const std::vector<SpinorField>& psi) {
    std::vector<SpinorField> out;
    for (std::size_t a = 0; a < psi.size(); ++a) out.emplace_back(om.grid);
    for (int a = 0; a < om.q; ++a)
        for (int b = 0; b < om.q; ++b)
            for (std::size_t k = 0; k < om.grid.size(); ++k) {
                const double s = 2.0 / std::sqrt(metric.lambda.v[k]);
                const cplx wz = om.z(a, b).v[k], wzb = om.zbar(a, b).v[k];
                out[a].f_plus.v[k] += -s * wz * psi[b].f_minus.v[k];
                out[a].f_minus.v[k] += s * wzb * psi[b].f_plus.v[k];
                out[a].ft_plus.v[k] += -s * wz * psi[b].ft_minus.v[k];
                out[a].ft_minus.v[k] += s * wzb * psi[b].ft_plus.v[k];
            }
    return out;
}

// D Psi^A + Omega^A_B . Psi^B for Psi in (Sigma M)^q, untwisted spin Dirac operator.
inline std::vector<SpinorField> dirac_omega_apply(const DiskGeometry& geo, const ConformalDiskMetric& metric, const CouplingForm& om,
                                                  const std::vector<SpinorField>& psi) {
    if (static_cast<int>(psi.size()) != om.q) throw std::invalid_argument("dirac_omega_apply: expected q spinor fields");
    const MapData flat = MapData::identity_flat(geo.grid());
    auto out = coupling_apply(metric, om, psi);
    for (int a = 0; a < om.q; ++a) out[a] += dirac_apply(geo, metric, flat, psi[a]);
    return out;
}

// Boundary row coefficient: B^sign psi = B^sign psi0 reduces to
// u+ + kappa zbar u- = u0+ + kappa zbar u0- on the circle.
inline cplx boundary_kappa(BoundaryVariant v, int sign) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("boundary sign must be +1 or -1");
    return v == BoundaryVariant::chiral ? cplx(sign) : cplx(0.0, -sign);
}

// ------------------------------------------------------------------------
// Closed-form solver through the holomorphic pairs.

inline SpinorField solve_chiral_bvp_closed_form(const DiskGeometry& geo, const ConformalDiskMetric& metric, const MapData& map,
                                                const SpinorTrace& psi0, int sign, BoundaryVariant variant = BoundaryVariant::chiral) {
    const auto& g = geo.grid();
    if (psi0.size() != g.n_theta) throw std::invalid_argument("closed form: boundary trace has the wrong length");
    const cplx kappa = boundary_kappa(variant, sign);
    const ComplexField gg = solve_g_problem(geo, metric, map);
    const int jb = g.n_r - 1, n = g.n_theta;
    BoundaryTrace sym(n), rhs(n), rhs_t(n);
    for (int i = 0; i < n; ++i) {
        const cplx zb = std::conj(g.z(jb, i));
        const double amp = std::pow(metric.lambda(jb, i), 0.25) * std::sqrt(map.rho_at_phi(jb, i));
        const cplx ph = std::polar(1.0, gg(jb, i).imag());
        sym[i] = -kappa * zb;
        rhs[i] = amp * ph * (psi0.f_plus[i] + kappa * zb * psi0.f_minus[i]);
        rhs_t[i] = amp * std::conj(ph) * (psi0.ft_plus[i] + kappa * zb * psi0.ft_minus[i]);
    }
    const BoundarySymbol phi(sym);
    const auto A = rh_solve_index_minus_one(phi, rhs, g);
    const auto At = rh_solve_index_minus_one(phi, rhs_t, g);
    SpinorField out(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const cplx e = std::exp(gg.v[k]);
        const double w = 1.0 / (std::sqrt(metric.lambda.v[k]) * map.rho_at_phi.v[k]);
        out.f_plus.v[k] = A.a_plus.v[k] / e;
        out.f_minus.v[k] = w * std::conj(e) * std::conj(A.a_minus.v[k]);
        out.ft_plus.v[k] = w * e * At.a_plus.v[k];
        out.ft_minus.v[k] = std::conj(At.a_minus.v[k]) / std::conj(e);
    }
    return out;
}

// ------------------------------------------------------------------------
// Discrete least-squares collocation.
//
// Rows are written in "flat form": for each pair a,
//   dbar u+_a + sum_b Zb_ab u+_b = rhs-_a,   dz u-_a + sum_b Z_ab u-_b = rhs+_a,
// plus boundary rows and fourth-difference rows c h^3 d^4 u on both
// components (the centred first-derivative stencils alone do not see the
// radial checkerboard). theta is spectral: after a unitary DFT on each ring the
// principal part is block diagonal, block k pairing mode p of u+ with mode
// p+1 of u-. Those blocks give an exact right preconditioner for LSQR; the
// pointwise terms are applied in physical space.

struct DiracCoefficients {
    int pairs = 0;
    PolarGrid grid;
    std::vector<ComplexField> Z, Zb; // [a*pairs + b]
    bool pointwise = false;          // any nonzero entry

    static DiracCoefficients zero(const PolarGrid& g, int pairs) {
        DiracCoefficients c;
        c.pairs = pairs;
        c.grid = g;
        c.Z.assign(static_cast<std::size_t>(pairs) * pairs, ComplexField(g));
        c.Zb = c.Z;
        return c;
    }
    ComplexField& z(int a, int b) { return Z[static_cast<std::size_t>(a) * pairs + b]; }
    ComplexField& zb(int a, int b) { return Zb[static_cast<std::size_t>(a) * pairs + b]; }
    const ComplexField& z(int a, int b) const { return Z[static_cast<std::size_t>(a) * pairs + b]; }
    const ComplexField& zb(int a, int b) const { return Zb[static_cast<std::size_t>(a) * pairs + b]; }

    void finish() {
        pointwise = false;
        for (const auto& f : Z) pointwise = pointwise || f.sup_norm() > 0.0;
        for (const auto& f : Zb) pointwise = pointwise || f.sup_norm() > 0.0;
    }

    // one pair of the map-twisted operator; tilde selects (ft+, ft-)
    static DiracCoefficients from_map(const ConformalDiskMetric& metric, const MapData& map, bool tilde) {
        DiracCoefficients c = zero(metric.grid(), 1);
        const ComplexField cz = tilde ? map.coupling_tilde_z() : map.coupling_z();
        const ComplexField czb = tilde ? map.coupling_tilde_zbar() : map.coupling_zbar();
        for (std::size_t k = 0; k < c.grid.size(); ++k) {
            c.Z[0].v[k] = 0.25 * metric.dlog_lambda_z.v[k] + cz.v[k];
            c.Zb[0].v[k] = 0.25 * metric.dlog_lambda_zbar.v[k] + czb.v[k];
        }
        c.finish();
        return c;
    }

    static DiracCoefficients from_coupling(const ConformalDiskMetric& metric, const CouplingForm& om) {
        DiracCoefficients c = zero(om.grid, om.q);
        for (int a = 0; a < om.q; ++a)
            for (int b = 0; b < om.q; ++b) {
                c.z(a, b) = om.z(a, b);
                c.zb(a, b) = om.zbar(a, b);
                if (a == b)
                    for (std::size_t k = 0; k < c.grid.size(); ++k) {
                        c.z(a, a).v[k] += 0.25 * metric.dlog_lambda_z.v[k];
                        c.zb(a, a).v[k] += 0.25 * metric.dlog_lambda_zbar.v[k];
                    }
            }
        c.finish();
        return c;
    }
};

struct DiscreteOptions {
    double stabilization = 0.5;
    double boundary_weight = 1.0;
    double tol = 1e-10;
    int max_iter = 4000;
};

enum class BoundaryRows { projector, dirichlet };

struct SpinorPair {
    ComplexField plus, minus;
};

struct LsqrInfo {
    int iterations = 0;
    bool converged = false;
    double residual_norm = 0.0;
    double normal_residual = 0.0;
};

class DiscreteDiracSolver {
public:
    using Vec = Eigen::VectorXcd;
    using SpMat = Eigen::SparseMatrix<cplx>;

    DiscreteDiracSolver(const PolarGrid& g, BoundaryVariant variant, int sign, BoundaryRows rows = BoundaryRows::projector,
                        DiscreteOptions opt = {})
        : grid_(g), rad_(g), variant_(variant), sign_(sign), rows_(rows), opt_(opt) {
        kappa_ = boundary_kappa(variant, sign);
        nr_ = g.n_r;
        nt_ = g.n_theta;
        nb_ = rows == BoundaryRows::projector ? 1 : 2;
        block_rows_ = 4 * nr_ + nb_;
        w_.resize(nr_);
        for (int j = 0; j < nr_; ++j) w_[j] = std::sqrt(g.r(j) * g.dr * g.dtheta);
        wb_ = opt.boundary_weight * std::sqrt(g.dtheta);
        build_blocks();
    }

    const PolarGrid& grid() const { return grid_; }
    int block_rows() const { return block_rows_; }
    int block_cols() const { return 2 * nr_; }
    const SpMat& block(int k) const { return blocks_[k]; }
    // label of the u+ mode carried by block k
    int block_mode(int k) const { return k < nt_ / 2 ? k : k - nt_; }
    // L2 column scale of unknown index c inside a block
    double column_scale(int c) const { return w_[c / 2]; }

    // Least-squares solve. rhs: flat-form interior targets per pair
    // (minus-row target, plus-row target); bdata: prescribed (u0+, u0-) traces.
    std::vector<SpinorPair> solve(const DiracCoefficients& C, const std::vector<SpinorPair>& rhs, const std::vector<std::pair<BoundaryTrace, BoundaryTrace>>& bdata,
                                  LsqrInfo* info = nullptr) const {
        check_coeffs(C);
        const int P = C.pairs;
        if (static_cast<int>(rhs.size()) != P || static_cast<int>(bdata.size()) != P) throw std::invalid_argument("DiscreteDiracSolver: wrong number of pairs");
        Vec b = assemble_rhs(rhs, bdata);
        LsqrInfo li;
        Vec y = lsqr(C, b, li);
        if (info) *info = li;
        if (!li.converged) throw SolverError("discrete Dirac solve: LSQR did not converge in " + std::to_string(li.iterations) + " iterations");
        return to_fields(precond_apply(y, P), P);
    }

    // y = A x with x in block layout
    Vec apply(const DiracCoefficients& C, const Vec& x) const {
        const int P = C.pairs;
        Vec y(static_cast<Eigen::Index>(P) * nt_ * block_rows_);
        for (int a = 0; a < P; ++a)
            for (int k = 0; k < nt_; ++k) y.segment(row_off(a, k), block_rows_) = blocks_[k] * x.segment(col_off(a, k), 2 * nr_);
        if (C.pointwise) add_pointwise(C, x, y);
        return y;
    }

    Vec apply_adjoint(const DiracCoefficients& C, const Vec& y) const {
        const int P = C.pairs;
        Vec x(static_cast<Eigen::Index>(P) * nt_ * 2 * nr_);
        for (int a = 0; a < P; ++a)
            for (int k = 0; k < nt_; ++k) x.segment(col_off(a, k), 2 * nr_) = blocks_[k].adjoint() * y.segment(row_off(a, k), block_rows_);
        if (C.pointwise) add_pointwise_adjoint(C, y, x);
        return x;
    }

    // smallest singular value of A with unknowns measured in L2 (column scale),
    // exact per block when there are no pointwise terms, Lanczos otherwise
    double smallest_singular_value(const DiracCoefficients& C, int lanczos_steps = 40) const {
        check_coeffs(C);
        if (!C.pointwise) {
            double s = std::numeric_limits<double>::infinity();
            for (int k = 0; k < nt_; ++k) {
                Eigen::MatrixXcd M = Eigen::MatrixXcd(blocks_[k]);
                for (int c = 0; c < 2 * nr_; ++c) M.col(c) /= column_scale(c);
                Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
                s = std::min(s, svd.singularValues().minCoeff());
            }
            return s;
        }
        return lanczos_sigma_min(C, lanczos_steps);
    }

private:
    Eigen::Index col_off(int a, int k) const { return (static_cast<Eigen::Index>(a) * nt_ + k) * 2 * nr_; }
    Eigen::Index row_off(int a, int k) const { return (static_cast<Eigen::Index>(a) * nt_ + k) * block_rows_; }

    void check_coeffs(const DiracCoefficients& C) const {
        if (C.grid != grid_) throw std::invalid_argument("DiscreteDiracSolver: coefficient grid mismatch");
        if (C.pairs < 1) throw std::invalid_argument("DiscreteDiracSolver: need at least one pair");
    }

    void build_blocks() {
        blocks_.resize(nt_);
        chol_.resize(nt_);
        const double h = grid_.dr;
        const double cs = opt_.stabilization / h;
        // fourth differences, centred where the extended grid allows
        auto d4 = [&](int j) {
            const int s = (j + 2 <= nr_ - 1) ? j - 2 : nr_ - 5;
            return std::pair<int, std::array<double, 5>>{s, {1.0, -4.0, 6.0, -4.0, 1.0}};
        };
        for (int k = 0; k < nt_; ++k) {
            const int p = block_mode(k), m = p + 1;
            const double parp = (p % 2 == 0) ? 1.0 : -1.0, parm = -parp;
            std::vector<Eigen::Triplet<cplx>> t;
            auto put = [&](int row, int e, int comp, double par, cplx v) {
                if (e >= 0) t.emplace_back(row, 2 * e + comp, v);
                else t.emplace_back(row, 2 * (-e - 1) + comp, par * v);
            };
            for (int j = 0; j < nr_; ++j) {
                const double r = grid_.r(j), wj = w_[j];
                const auto& st = rad_.d1(j);
                for (std::size_t q = 0; q < st.w.size(); ++q) {
                    const int e = st.start + static_cast<int>(q);
                    put(j, e, 0, parp, 0.5 * wj * st.w[q]);
                    put(nr_ + j, e, 1, parm, 0.5 * wj * st.w[q]);
                }
                t.emplace_back(j, 2 * j, -0.5 * wj * p / r);
                t.emplace_back(nr_ + j, 2 * j + 1, 0.5 * wj * m / r);
                const auto [s, dw] = d4(j);
                for (int q = 0; q < 5; ++q) {
                    put(2 * nr_ + j, s + q, 0, parp, cs * wj * dw[q]);
                    put(3 * nr_ + j, s + q, 1, parm, cs * wj * dw[q]);
                }
            }
            const int jb = nr_ - 1, rb = 4 * nr_;
            if (rows_ == BoundaryRows::projector) {
                t.emplace_back(rb, 2 * jb, wb_);
                t.emplace_back(rb, 2 * jb + 1, wb_ * kappa_);
            } else {
                t.emplace_back(rb, 2 * jb, wb_);
                t.emplace_back(rb + 1, 2 * jb + 1, wb_);
            }
            SpMat M(block_rows_, 2 * nr_);
            M.setFromTriplets(t.begin(), t.end());
            M.makeCompressed();
            blocks_[k] = M;
            SpMat N = SpMat(M.adjoint()) * M;
            chol_[k] = std::make_unique<Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>>>(N);
            if (chol_[k]->info() != Eigen::Success) throw SolverError("discrete Dirac solve: singular mode block " + std::to_string(p));
        }
    }

    // unitary DFT helpers on one ring
    void fwd(const cplx* in, cplx* out) const {
        fft_plan(nt_).forward(in, out);
        const double s = 1.0 / std::sqrt(static_cast<double>(nt_));
        for (int i = 0; i < nt_; ++i) out[i] *= s;
    }
    void bwd(const cplx* in, cplx* out) const {
        fft_plan(nt_).backward(in, out);
        const double s = 1.0 / std::sqrt(static_cast<double>(nt_));
        for (int i = 0; i < nt_; ++i) out[i] *= s;
    }

    std::vector<SpinorPair> to_fields(const Vec& x, int P) const {
        std::vector<SpinorPair> out(P, SpinorPair{ComplexField(grid_), ComplexField(grid_)});
        std::vector<cplx> cp(nt_), cm(nt_);
        for (int a = 0; a < P; ++a)
            for (int j = 0; j < nr_; ++j) {
                for (int k = 0; k < nt_; ++k) {
                    cp[k] = x[col_off(a, k) + 2 * j];
                    cm[(k + 1) % nt_] = x[col_off(a, k) + 2 * j + 1];
                }
                bwd(cp.data(), out[a].plus.ring(j));
                bwd(cm.data(), out[a].minus.ring(j));
            }
        return out;
    }

    Vec from_fields(const std::vector<SpinorPair>& u) const {
        const int P = static_cast<int>(u.size());
        Vec x(static_cast<Eigen::Index>(P) * nt_ * 2 * nr_);
        std::vector<cplx> cp(nt_), cm(nt_);
        for (int a = 0; a < P; ++a)
            for (int j = 0; j < nr_; ++j) {
                fwd(u[a].plus.ring(j), cp.data());
                fwd(u[a].minus.ring(j), cm.data());
                for (int k = 0; k < nt_; ++k) {
                    x[col_off(a, k) + 2 * j] = cp[k];
                    x[col_off(a, k) + 2 * j + 1] = cm[(k + 1) % nt_];
                }
            }
        return x;
    }

    Vec assemble_rhs(const std::vector<SpinorPair>& rhs, const std::vector<std::pair<BoundaryTrace, BoundaryTrace>>& bdata) const {
        const int P = static_cast<int>(rhs.size());
        Vec b = Vec::Zero(static_cast<Eigen::Index>(P) * nt_ * block_rows_);
        std::vector<cplx> c1(nt_), c2(nt_), tmp(nt_);
        for (int a = 0; a < P; ++a) {
            if (rhs[a].plus.grid != grid_ || rhs[a].minus.grid != grid_) throw std::invalid_argument("DiscreteDiracSolver: rhs grid mismatch");
            for (int j = 0; j < nr_; ++j) {
                fwd(rhs[a].plus.ring(j), c1.data());  // dbar rows
                fwd(rhs[a].minus.ring(j), c2.data()); // dz rows
                for (int k = 0; k < nt_; ++k) {
                    b[row_off(a, k) + j] = w_[j] * c1[(k + 1) % nt_];
                    b[row_off(a, k) + nr_ + j] = w_[j] * c2[k];
                }
            }
            const auto& [u0p, u0m] = bdata[a];
            if (u0p.size() != nt_ || u0m.size() != nt_) throw std::invalid_argument("DiscreteDiracSolver: boundary data length");
            if (rows_ == BoundaryRows::projector) {
                for (int i = 0; i < nt_; ++i) tmp[i] = u0p[i] + kappa_ * std::conj(u0p.z(i)) * u0m[i];
                fwd(tmp.data(), c1.data());
                for (int k = 0; k < nt_; ++k) b[row_off(a, k) + 4 * nr_] = wb_ * c1[k];
            } else {
                fwd(u0p.values.data(), c1.data());
                fwd(u0m.values.data(), c2.data());
                for (int k = 0; k < nt_; ++k) {
                    b[row_off(a, k) + 4 * nr_] = wb_ * c1[k];
                    b[row_off(a, k) + 4 * nr_ + 1] = wb_ * c2[(k + 1) % nt_];
                }
            }
        }
        return b;
    }

    void add_pointwise(const DiracCoefficients& C, const Vec& x, Vec& y) const {
        const int P = C.pairs;
        auto u = to_fields(x, P);
        std::vector<cplx> tp(nt_), tm(nt_), cp(nt_), cm(nt_);
        for (int a = 0; a < P; ++a)
            for (int j = 0; j < nr_; ++j) {
                for (int i = 0; i < nt_; ++i) {
                    cplx sp = 0.0, sm = 0.0;
                    for (int bb = 0; bb < P; ++bb) {
                        sp += C.zb(a, bb)(j, i) * u[bb].plus(j, i);
                        sm += C.z(a, bb)(j, i) * u[bb].minus(j, i);
                    }
                    tp[i] = w_[j] * sp;
                    tm[i] = w_[j] * sm;
                }
                fwd(tp.data(), cp.data());
                fwd(tm.data(), cm.data());
                for (int k = 0; k < nt_; ++k) {
                    y[row_off(a, k) + j] += cp[(k + 1) % nt_];
                    y[row_off(a, k) + nr_ + j] += cm[k];
                }
            }
    }

    void add_pointwise_adjoint(const DiracCoefficients& C, const Vec& y, Vec& x) const {
        const int P = C.pairs;
        std::vector<SpinorPair> s(P, SpinorPair{ComplexField(grid_), ComplexField(grid_)});
        std::vector<cplx> cp(nt_), cm(nt_);
        for (int a = 0; a < P; ++a)
            for (int j = 0; j < nr_; ++j) {
                for (int k = 0; k < nt_; ++k) {
                    cp[(k + 1) % nt_] = y[row_off(a, k) + j];
                    cm[k] = y[row_off(a, k) + nr_ + j];
                }
                bwd(cp.data(), s[a].plus.ring(j));
                bwd(cm.data(), s[a].minus.ring(j));
                for (int i = 0; i < nt_; ++i) {
                    s[a].plus(j, i) *= w_[j];
                    s[a].minus(j, i) *= w_[j];
                }
            }
        std::vector<SpinorPair> u(P, SpinorPair{ComplexField(grid_), ComplexField(grid_)});
        for (int bb = 0; bb < P; ++bb)
            for (int a = 0; a < P; ++a)
                for (std::size_t n = 0; n < grid_.size(); ++n) {
                    u[bb].plus.v[n] += std::conj(C.zb(a, bb).v[n]) * s[a].plus.v[n];
                    u[bb].minus.v[n] += std::conj(C.z(a, bb).v[n]) * s[a].minus.v[n];
                }
        x += from_fields(u);
    }

    // x = R^{-1} y and its adjoint, R^H R = M_k^H M_k per block
    Vec precond_apply(const Vec& y, int P) const {
        Vec x(y.size());
        for (int a = 0; a < P; ++a)
            for (int k = 0; k < nt_; ++k) x.segment(col_off(a, k), 2 * nr_) = chol_[k]->matrixU().solve(y.segment(col_off(a, k), 2 * nr_));
        return x;
    }
    Vec precond_adjoint(const Vec& x, int P) const {
        Vec y(x.size());
        for (int a = 0; a < P; ++a)
            for (int k = 0; k < nt_; ++k) y.segment(col_off(a, k), 2 * nr_) = chol_[k]->matrixL().solve(x.segment(col_off(a, k), 2 * nr_));
        return y;
    }
    Vec normal_precond_solve(const Vec& v, int P) const { return precond_apply(precond_adjoint(v, P), P); }

    // Paige-Saunders LSQR on A R^{-1}
    Vec lsqr(const DiracCoefficients& C, const Vec& b, LsqrInfo& info) const {
        const int P = C.pairs;
        const Eigen::Index n = static_cast<Eigen::Index>(P) * nt_ * 2 * nr_;
        Vec x = Vec::Zero(n);
        double beta = b.norm();
        info = {};
        if (beta == 0.0) {
            info.converged = true;
            return x;
        }
        Vec u = b / beta;
        Vec v = precond_adjoint(apply_adjoint(C, u), P);
        double alpha = v.norm();
        if (alpha == 0.0) {
            info.converged = true;
            return x;
        }
        v /= alpha;
        Vec w = v;
        double phibar = beta, rhobar = alpha, anorm2 = 0.0;
        const double bnorm = beta;
        for (int it = 1; it <= opt_.max_iter; ++it) {
            u = apply(C, precond_apply(v, P)) - alpha * u;
            beta = u.norm();
            if (beta > 0.0) u /= beta;
            anorm2 += alpha * alpha + beta * beta;
            v = precond_adjoint(apply_adjoint(C, u), P) - beta * v;
            alpha = v.norm();
            if (alpha > 0.0) v /= alpha;
            const double rho = std::hypot(rhobar, beta);
            const double c = rhobar / rho, s = beta / rho;
            const double theta = s * alpha;
            rhobar = -c * alpha;
            const double phi = c * phibar;
            phibar = s * phibar;
            x += (phi / rho) * w;
            w = v - (theta / rho) * w;
            const double rnorm = phibar, arnorm = phibar * alpha * std::abs(c), anorm = std::sqrt(anorm2);
            info.iterations = it;
            info.residual_norm = rnorm;
            info.normal_residual = arnorm;
            const double xnorm = x.norm();
            if (rnorm <= opt_.tol * bnorm + opt_.tol * anorm * xnorm || arnorm <= opt_.tol * anorm * rnorm || alpha == 0.0) {
                info.converged = true;
                break;
            }
        }
        return x;
    }

    // preconditioned CG on A^H A x = r
    Vec normal_solve(const DiracCoefficients& C, const Vec& r, double tol, int maxit) const {
        const int P = C.pairs;
        Vec x = Vec::Zero(r.size());
        Vec res = r;
        Vec z = normal_precond_solve(res, P);
        Vec p = z;
        cplx rz = res.dot(z);
        const double r0 = r.norm();
        for (int it = 0; it < maxit && res.norm() > tol * r0; ++it) {
            Vec q = apply_adjoint(C, apply(C, p));
            const cplx a = rz / p.dot(q);
            x += a * p;
            res -= a * q;
            z = normal_precond_solve(res, P);
            const cplx rz2 = res.dot(z);
            p = z + (rz2 / rz) * p;
            rz = rz2;
        }
        if (res.norm() > 1e3 * tol * r0) throw SolverError("sigma_min: inner CG did not converge");
        return x;
    }

    // largest eigenvalue of S (A^H A)^{-1} S, S the column scale, by Lanczos
    double lanczos_sigma_min(const DiracCoefficients& C, int steps) const {
        const int P = C.pairs;
        const Eigen::Index n = static_cast<Eigen::Index>(P) * nt_ * 2 * nr_;
        Eigen::VectorXd sc(n);
        for (Eigen::Index i = 0; i < n; ++i) sc[i] = column_scale(static_cast<int>(i % (2 * nr_)));
        std::mt19937_64 rng(12345);
        std::normal_distribution<double> N01;
        Vec q(n);
        for (Eigen::Index i = 0; i < n; ++i) q[i] = cplx(N01(rng), N01(rng));
        q /= q.norm();
        std::vector<Vec> Q{q};
        std::vector<double> al, be;
        steps = std::min<int>(steps, static_cast<int>(n));
        for (int k = 0; k < steps; ++k) {
            Vec t = sc.cwiseProduct(normal_solve(C, sc.cwiseProduct(Q[k]).eval(), 1e-13, 2000)).eval();
            const double a = Q[k].dot(t).real();
            al.push_back(a);
            for (const auto& qq : Q) t -= qq.dot(t) * qq; // full reorthogonalisation
            for (const auto& qq : Q) t -= qq.dot(t) * qq;
            const double b = t.norm();
            if (b < 1e-14 * std::abs(a) || k + 1 == steps) break;
            be.push_back(b);
            Q.push_back(t / b);
        }
        const int m = static_cast<int>(al.size());
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            T(i, i) = al[i];
            if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = be[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        return 1.0 / std::sqrt(es.eigenvalues().maxCoeff());
    }

    PolarGrid grid_;
    RadialOperators rad_;
    BoundaryVariant variant_;
    int sign_;
    BoundaryRows rows_;
    DiscreteOptions opt_;
    cplx kappa_;
    int nr_ = 0, nt_ = 0, nb_ = 1, block_rows_ = 0;
    std::vector<double> w_;
    double wb_ = 0.0;
    std::vector<SpMat> blocks_;
    std::vector<std::unique_ptr<Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>>>> chol_;
};

struct DiscreteSolution {
    std::vector<SpinorField> psi;
    LsqrInfo info;
};

namespace detail {

inline std::pair<BoundaryTrace, BoundaryTrace> pair_trace(const SpinorTrace& t, bool tilde) {
    return tilde ? std::pair{t.ft_plus, t.ft_minus} : std::pair{t.f_plus, t.f_minus};
}

// flat-form interior targets: dbar rows get lambda^{1/2} eta-/2, dz rows -lambda^{1/2} eta+/2
inline SpinorPair flat_rhs(const ConformalDiskMetric& metric, const ComplexField& eta_plus, const ComplexField& eta_minus) {
    SpinorPair r{ComplexField(metric.grid()), ComplexField(metric.grid())};
    for (std::size_t k = 0; k < r.plus.size(); ++k) {
        const double s = 0.5 * std::sqrt(metric.lambda.v[k]);
        r.plus.v[k] = s * eta_minus.v[k];
        r.minus.v[k] = -s * eta_plus.v[k];
    }
    return r;
}

inline bool trace_is_zero(const BoundaryTrace& a, const BoundaryTrace& b) {
    for (int i = 0; i < a.size(); ++i)
        if (a[i] != 0.0 || b[i] != 0.0) return false;
    return true;
}

} // namespace detail

// The map-twisted problem D Psi = eta, B Psi = B psi0 by least squares.
inline SpinorField solve_map_bvp_discrete(const DiscreteDiracSolver& solver, const ConformalDiskMetric& metric, const MapData& map, const SpinorField& eta,
                                          const SpinorTrace& psi0, LsqrInfo* info = nullptr) {
    eta.validate();
    SpinorField out(solver.grid());
    LsqrInfo total;
    for (int t = 0; t < 2; ++t) {
        const bool tilde = t == 1;
        const auto C = DiracCoefficients::from_map(metric, map, tilde);
        const auto rhs = detail::flat_rhs(metric, tilde ? eta.ft_plus : eta.f_plus, tilde ? eta.ft_minus : eta.f_minus);
        LsqrInfo li;
        auto u = solver.solve(C, {rhs}, {detail::pair_trace(psi0, tilde)}, &li);
        total.iterations += li.iterations;
        total.residual_norm = std::hypot(total.residual_norm, li.residual_norm);
        out.slot(2 * t) = u[0].plus;
        out.slot(2 * t + 1) = u[0].minus;
    }
    total.converged = true;
    if (info) *info = total;
    return out;
}

// D Psi^A + Omega^A_B . Psi^B = eta^A, B Psi^A = B psi0^A for A = 1..q.
inline DiscreteSolution solve_bvp_discrete(const DiscreteDiracSolver& solver, const ConformalDiskMetric& metric, const CouplingForm& om,
                                           const std::vector<SpinorField>& eta, const std::vector<SpinorTrace>& bdata) {
    om.validate();
    const int q = om.q;
    if (static_cast<int>(eta.size()) != q || static_cast<int>(bdata.size()) != q) throw std::invalid_argument("solve_bvp_discrete: expected q right-hand sides");
    const auto C = DiracCoefficients::from_coupling(metric, om);
    DiscreteSolution sol;
    for (int a = 0; a < q; ++a) sol.psi.emplace_back(solver.grid());
    for (int t = 0; t < 2; ++t) {
        const bool tilde = t == 1;
        std::vector<SpinorPair> rhs;
        std::vector<std::pair<BoundaryTrace, BoundaryTrace>> bd;
        bool zero = true;
        for (int a = 0; a < q; ++a) {
            eta[a].validate();
            rhs.push_back(detail::flat_rhs(metric, eta[a].slot(2 * t), eta[a].slot(2 * t + 1)));
            bd.push_back(detail::pair_trace(bdata[a], tilde));
            zero = zero && rhs.back().plus.sup_norm() == 0.0 && rhs.back().minus.sup_norm() == 0.0 && detail::trace_is_zero(bd.back().first, bd.back().second);
        }
        if (zero) continue; // unique solution is 0
        LsqrInfo li;
        auto u = solver.solve(C, rhs, bd, &li);
        sol.info.iterations += li.iterations;
        sol.info.residual_norm = std::hypot(sol.info.residual_norm, li.residual_norm);
        for (int a = 0; a < q; ++a) {
            sol.psi[a].slot(2 * t) = u[a].plus;
            sol.psi[a].slot(2 * t + 1) = u[a].minus;
        }
    }
    sol.info.converged = true;
    return sol;
}

// ------------------------------------------------------------------------

struct ResidualReport {
    double interior_sup = 0.0;
    double boundary_sup = 0.0;
    double l2_interior = 0.0;
};

namespace detail {

inline void accumulate_interior(const DiskGeometry& geo, const ConformalDiskMetric& metric, const std::vector<SpinorField>& res, ResidualReport& rep) {
    const auto& g = geo.grid();
    RealField dens(g);
    for (std::size_t n = 0; n < g.size(); ++n) {
        double s = 0.0;
        for (const auto& r : res)
            for (int k = 0; k < 4; ++k) s += std::norm(r.slot(k).v[n]);
        dens.v[n] = s;
        rep.interior_sup = std::max(rep.interior_sup, std::sqrt(s));
    }
    rep.l2_interior = std::sqrt(std::max(0.0, geo.area_integral(to_complex(dens), metric).real()));
}

inline double boundary_defect(const SpinorField& psi, const SpinorTrace& psi0, int sign, BoundaryVariant v) {
    const auto& g = psi.grid();
    const int jb = g.n_r - 1;
    double m = 0.0;
    for (int i = 0; i < g.n_theta; ++i) {
        const BoundaryPoint p(g.theta(i));
        const Mat2 B = boundary_matrix(v, sign, p);
        double s = 0.0;
        for (int t = 0; t < 2; ++t) {
            const SpinorValue d{psi.slot(2 * t)(jb, i) - psi0.slot(2 * t)[i], psi.slot(2 * t + 1)(jb, i) - psi0.slot(2 * t + 1)[i]};
            s += (B * d).norm2();
        }
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

} // namespace detail

inline ResidualReport residual_report(const DiskGeometry& geo, const ConformalDiskMetric& metric, const MapData& map, const SpinorField& psi,
                                      const SpinorField& eta, const SpinorTrace& psi0, int sign, BoundaryVariant v = BoundaryVariant::chiral) {
    ResidualReport rep;
    detail::accumulate_interior(geo, metric, {dirac_apply(geo, metric, map, psi) - eta}, rep);
    rep.boundary_sup = detail::boundary_defect(psi, psi0, sign, v);
    return rep;
}

inline ResidualReport residual_report(const DiskGeometry& geo, const ConformalDiskMetric& metric, const CouplingForm& om, const std::vector<SpinorField>& psi,
                                      const std::vector<SpinorField>& eta, const std::vector<SpinorTrace>& psi0, int sign,
                                      BoundaryVariant v = BoundaryVariant::chiral) {
    ResidualReport rep;
    auto res = dirac_omega_apply(geo, metric, om, psi);
    for (std::size_t a = 0; a < res.size(); ++a) res[a] -= eta[a];
    detail::accumulate_interior(geo, metric, res, rep);
    for (std::size_t a = 0; a < psi.size(); ++a) rep.boundary_sup = std::max(rep.boundary_sup, detail::boundary_defect(psi[a], psi0[a], sign, v));
    return rep;
}

} // namespace spindisk
