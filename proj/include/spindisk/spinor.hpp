#pragma once

#include <cmath>
#include <complex>
#include <numbers>

namespace spindisk {

using cplx = std::complex<double>;
inline constexpr cplx I{0.0, 1.0};
inline constexpr double pi = std::numbers::pi;

// Two-component spinor (Sigma^+ , Sigma^-).
struct SpinorValue {
    cplx plus{};
    cplx minus{};

    SpinorValue() = default;
    SpinorValue(cplx p, cplx m) : plus(p), minus(m) {}

    double norm2() const { return std::norm(plus) + std::norm(minus); }

    SpinorValue& operator+=(const SpinorValue& o) { plus += o.plus; minus += o.minus; return *this; }
    SpinorValue& operator-=(const SpinorValue& o) { plus -= o.plus; minus -= o.minus; return *this; }
    SpinorValue& operator*=(cplx c) { plus *= c; minus *= c; return *this; }
};

inline SpinorValue operator+(SpinorValue a, const SpinorValue& b) { return a += b; }
inline SpinorValue operator-(SpinorValue a, const SpinorValue& b) { return a -= b; }
inline SpinorValue operator*(cplx c, SpinorValue a) { return a *= c; }
inline SpinorValue operator*(SpinorValue a, cplx c) { return a *= c; }
inline SpinorValue operator-(const SpinorValue& a) { return {-a.plus, -a.minus}; }

// Orthonormal-frame vector a*e1 + b*e2.
struct CliffordVector {
    double a = 0.0;
    double b = 0.0;
    double norm2() const { return a * a + b * b; }
};

// Boundary point stored by angle; z is derived so |z| = 1 by construction.
struct BoundaryPoint {
    double theta = 0.0;

    BoundaryPoint() = default;
    explicit BoundaryPoint(double t) : theta(t) {
        theta = std::fmod(theta, 2.0 * pi);
        if (theta < 0.0) theta += 2.0 * pi;
    }
    cplx z() const { return std::polar(1.0, theta); }
};

// 2x2 complex matrix acting on SpinorValue, row-major.
struct Mat2 {
    cplx a, b, c, d;
    SpinorValue operator*(const SpinorValue& s) const {
        return {a * s.plus + b * s.minus, c * s.plus + d * s.minus};
    }
    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
    Mat2 adjoint() const { return {std::conj(a), std::conj(c), std::conj(b), std::conj(d)}; }
};

// E1 = [[0,-1],[1,0]], E2 = [[0,i],[i,0]].
inline constexpr Mat2 clifford_e1() { return {0.0, -1.0, 1.0, 0.0}; }
inline constexpr Mat2 clifford_e2() { return {0.0, I, I, 0.0}; }
inline constexpr Mat2 chirality_matrix() { return {1.0, 0.0, 0.0, -1.0}; }

inline SpinorValue clifford_mul(const CliffordVector& X, const SpinorValue& s) {
    // (a E1 + b E2) s, expanded to avoid the 0*inf pitfalls of a generic product
    return {-X.a * s.minus + I * X.b * s.minus, X.a * s.plus + I * X.b * s.plus};
}

inline SpinorValue chirality_apply(const SpinorValue& s) { return {s.plus, -s.minus}; }

// B^{sign} = 1/2 [[1, sign*conj z],[sign*z, 1]]
inline Mat2 chiral_matrix(int sign, const BoundaryPoint& p) {
    const cplx z = p.z();
    const double s = sign >= 0 ? 1.0 : -1.0;
    return {0.5, 0.5 * s * std::conj(z), 0.5 * s * z, 0.5};
}

// B^{sign}_MIT = 1/2 [[1, -sign*i*conj z],[sign*i*z, 1]]
inline Mat2 mit_matrix(int sign, const BoundaryPoint& p) {
    const cplx z = p.z();
    const double s = sign >= 0 ? 1.0 : -1.0;
    return {0.5, -0.5 * s * I * std::conj(z), 0.5 * s * I * z, 0.5};
}

inline SpinorValue chiral_projector(int sign, const BoundaryPoint& p, const SpinorValue& s) {
    return chiral_matrix(sign, p) * s;
}

inline SpinorValue mit_projector(int sign, const BoundaryPoint& p, const SpinorValue& s) {
    return mit_matrix(sign, p) * s;
}

enum class BoundaryVariant { chiral, mit };

inline Mat2 boundary_matrix(BoundaryVariant v, int sign, const BoundaryPoint& p) {
    return v == BoundaryVariant::chiral ? chiral_matrix(sign, p) : mit_matrix(sign, p);
}

// conjugate-linear in the second slot
inline cplx hermitian_inner(const SpinorValue& s, const SpinorValue& t) {
    return s.plus * std::conj(t.plus) + s.minus * std::conj(t.minus);
}

inline double re_inner(const SpinorValue& s, const SpinorValue& t) {
    return std::real(hermitian_inner(s, t));
}

// Outward unit normal at a boundary point, in the orthonormal frame.
inline CliffordVector outward_normal(const BoundaryPoint& p) {
    return {std::cos(p.theta), std::sin(p.theta)};
}

} // namespace spindisk
