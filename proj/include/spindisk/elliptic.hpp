#pragma once

#include "spindisk/geometry.hpp"

#include <Eigen/Dense>

#include <vector>

namespace spindisk {

// (alpha + beta Delta_flat) u = rhs in the disk, u = g on r = 1.
// Delta_flat is diagonal in the theta modes, so each mode is a dense radial
// solve built from the same 5-point stencils (parity ghosts included).
class ModalDirichletSolver {
public:
    ModalDirichletSolver(const PolarGrid& g, double alpha, double beta) : grid_(g) {
        RadialOperators rad(g);
        const int nr = g.n_r, nt = g.n_theta;
        lu_.reserve(nt);
        for (int k = 0; k < nt; ++k) {
            const int m = signed_mode(k, nt);
            const auto D1 = rad.mode_matrix(rad.d1_family(), m < 0 ? -m : m);
            const auto D2 = rad.mode_matrix(rad.d2_family(), m < 0 ? -m : m);
            Eigen::MatrixXd A(nr, nr);
            for (int j = 0; j < nr; ++j) {
                const double r = g.r(j);
                for (int c = 0; c < nr; ++c) {
                    const std::size_t at = static_cast<std::size_t>(j) * nr + c;
                    A(j, c) = beta * (D2[at] + D1[at] / r);
                }
                A(j, j) += alpha - beta * static_cast<double>(m) * m / (r * r);
            }
            A.row(nr - 1).setZero();
            A(nr - 1, nr - 1) = 1.0;
            lu_.emplace_back(A);
        }
    }

    const PolarGrid& grid() const { return grid_; }

    ComplexField solve(const ComplexField& rhs, const BoundaryTrace& g) const {
        if (rhs.grid != grid_) throw std::invalid_argument("ModalDirichletSolver: grid mismatch");
        if (g.size() != grid_.n_theta) throw std::invalid_argument("ModalDirichletSolver: boundary trace has wrong length");
        const int nr = grid_.n_r, nt = grid_.n_theta;
        const auto& plan = fft_plan(nt);
        std::vector<cplx> c(static_cast<std::size_t>(nr) * nt), gb(nt);
        for (int j = 0; j < nr; ++j) plan.forward(rhs.ring(j), c.data() + static_cast<std::size_t>(j) * nt);
        plan.forward(g.values.data(), gb.data());
        for (int k = 0; k < nt; ++k) {
            Eigen::VectorXcd b(nr);
            for (int j = 0; j < nr - 1; ++j) b(j) = c[static_cast<std::size_t>(j) * nt + k];
            b(nr - 1) = gb[k];
            const Eigen::VectorXd xr = lu_[k].solve(b.real()), xi = lu_[k].solve(b.imag());
            Eigen::VectorXcd x = xr.cast<cplx>() + I * xi.cast<cplx>();
            for (int j = 0; j < nr; ++j) c[static_cast<std::size_t>(j) * nt + k] = x(j) / static_cast<double>(nt);
        }
        ComplexField out(grid_);
        for (int j = 0; j < nr; ++j) plan.backward(c.data() + static_cast<std::size_t>(j) * nt, out.ring(j));
        return out;
    }

    RealField solve(const RealField& rhs, const std::vector<double>& g) const {
        BoundaryTrace b(grid_.n_theta);
        for (int i = 0; i < grid_.n_theta; ++i) b[i] = g.at(i);
        return real_part(solve(to_complex(rhs), b));
    }

private:
    PolarGrid grid_;
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
};

} // namespace spindisk
