#pragma once

// Brute-force reference computations shared by the unit and acceptance tests.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "dpgfeast/dpg.hpp"

namespace dpgfeast::testing {

/// Dense global saddle-point system [G B; B^H 0] [eps; x] = [F; 0].
struct full_solution
{
    Eigen::VectorXcd eps;
    Eigen::VectorXcd x;
    Eigen::MatrixXcd b;
    std::vector<double> eps_norms;
};

inline full_solution brute_force(const mesh& m, const fe_system& sys, cplx z, const reaction& nu, const Eigen::VectorXcd& f)
{
    const reference_tables ref(sys.p(), sys.dp());
    const int ny = sys.local_test_dim(), nt = sys.local_trial_dim();
    const int ne = static_cast<int>(m.num_triangles()) * ny, nc = sys.num_condensed();
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(ne, ne), b = Eigen::MatrixXcd::Zero(ne, nc);
    Eigen::VectorXcd load = Eigen::VectorXcd::Zero(ne);
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const auto em = compute_element_matrices(m, t, ref);
        const int r0 = static_cast<int>(t) * ny;
        g.block(r0, r0, ny, ny) = em.gram.cast<cplx>();
        const auto& trial = sys.trial_dofs(t);
        const double nuk = nu(m.region_tags()[t]);
        for (int i = 0; i < nt; ++i)
            if (trial[i] >= 0) {
                b.block(r0, trial[i], ny, 1) +=
                    ((z + nuk) * em.mass.col(i).cast<cplx>() - em.stiffness.col(i).cast<cplx>());
                load.segment(r0, ny) += em.mass.col(i).cast<cplx>() * f[trial[i]];
            }
        for (int e = 0; e < 3; ++e)
            for (int j = 0; j < sys.p(); ++j) {
                const int col = sys.num_trial() + sys.flux_offset(m.triangle_edge(t, e)) + j;
                b.block(r0, col, ny, 1) += em.flux.col(e * sys.p() + j).cast<cplx>();
            }
    }
    Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(ne + nc, ne + nc);
    k.topLeftCorner(ne, ne) = g;
    k.topRightCorner(ne, nc) = b;
    k.bottomLeftCorner(nc, ne) = b.adjoint();
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(ne + nc);
    rhs.head(ne) = load;
    const Eigen::VectorXcd sol = k.fullPivLu().solve(rhs);
    full_solution out{sol.head(ne), sol.tail(nc), b, {}};
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const Eigen::VectorXcd e = out.eps.segment(static_cast<int>(t) * ny, ny);
        out.eps_norms.push_back(
            std::sqrt((e.adjoint() * g.block(t * ny, t * ny, ny, ny) * e)(0).real()));
    }
    return out;
}

} // namespace dpgfeast::testing
