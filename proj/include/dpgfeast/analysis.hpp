#pragma once

// Reference spectra, eigenvalue and eigenspace error measures, and numerical
// orders of convergence.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elements.hpp"
#include "errors.hpp"
#include "mesh.hpp"
#include "sparse.hpp"

namespace dpgfeast {

using scalar_function = std::function<double(point)>;
using gradient_function = std::function<point(point)>;

struct reference_spectrum
{
    enum class origin
    {
        analytic,
        literature,
        paper_table,
    };

    std::vector<double> values; // ascending, with multiplicity
    std::vector<scalar_function> eigenfunctions;
    std::vector<gradient_function> gradients;
    origin source = origin::analytic;
};

/// Dirichlet Laplacian on the unit square: 2 pi^2 (simple) and 5 pi^2 (double)
/// with eigenfunctions sin(k1 pi x) sin(k2 pi y).
inline reference_spectrum reference_square()
{
    using std::numbers::pi;
    reference_spectrum r;
    r.source = reference_spectrum::origin::analytic;
    for (auto [k1, k2] : {std::array{1, 1}, std::array{1, 2}, std::array{2, 1}}) {
        const double a = k1 * pi, b = k2 * pi;
        r.values.push_back(a * a + b * b);
        r.eigenfunctions.push_back([a, b](point x) { return std::sin(a * x.x) * std::sin(b * x.y); });
        r.gradients.push_back([a, b](point x) {
            return point{a * std::cos(a * x.x) * std::sin(b * x.y), b * std::sin(a * x.x) * std::cos(b * x.y)};
        });
    }
    return r;
}

/// Lowest three Dirichlet eigenvalues of (0,2)^2 minus [1,2]^2.
inline reference_spectrum reference_lshape()
{
    reference_spectrum r;
    r.source = reference_spectrum::origin::literature;
    r.values = {9.6397238, 15.197252, 2.0 * std::numbers::pi * std::numbers::pi};
    return r;
}

/// Scaled guided-mode eigenvalues of the step-index fiber.
inline reference_spectrum reference_fiber()
{
    reference_spectrum r;
    r.source = reference_spectrum::origin::paper_table;
    r.values = {2932065.0334243, 2932475.1036310, 2932475.1036310,
                2934248.1978369, 2934248.1978369, 2935689.8561775};
    return r;
}

/// max(sup_a inf_b |x - y|, sup_b inf_a |x - y|).
inline double hausdorff(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.empty() || b.empty())
        throw error("hausdorff: empty set");
    auto one_sided = [](const std::vector<double>& from, const std::vector<double>& to) {
        double d = 0.0;
        for (double x : from) {
            double best = std::numeric_limits<double>::infinity();
            for (double y : to)
                best = std::min(best, std::abs(x - y));
            d = std::max(d, best);
        }
        return d;
    };
    return std::max(one_sided(a, b), one_sided(b, a));
}

/// Distance from v to span(basis) in the norm induced by `metric`:
/// sqrt(v^H S v - b^H G^{-1} b) with G = B^H S B and b = B^H S v.
inline double subspace_distance(const Eigen::VectorXcd& v, const Eigen::MatrixXcd& basis, const sparse_real& metric,
                                double rank_tol = 1e-12)
{
    if (v.size() != metric.rows() || basis.rows() != metric.rows())
        throw error("subspace_distance: dimension mismatch");
    const Eigen::MatrixXcd sb = metric.cast<cplx>() * basis;
    Eigen::MatrixXcd g = basis.adjoint() * sb;
    g = 0.5 * (g + g.adjoint()).eval();
    const Eigen::VectorXcd b = sb.adjoint() * v;
    const double vv = (v.adjoint() * (metric.cast<cplx>() * v))(0).real();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g);
    const Eigen::VectorXd& d = es.eigenvalues();
    const double dmax = d.size() ? d.maxCoeff() : 0.0;
    const auto rank = static_cast<std::size_t>((d.array() > rank_tol * dmax).count());
    if (rank < static_cast<std::size_t>(basis.cols()) || !(dmax > 0.0))
        throw rank_deficient_mass(rank);
    const Eigen::VectorXcd c = es.eigenvectors().adjoint() * b;
    double proj = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i)
        proj += std::norm(c[i]) / d[i];
    return std::sqrt(std::max(0.0, vv - proj));
}

/// Nodal interpolant in the free trial space (Dirichlet values dropped).
inline Eigen::VectorXd interpolate(const mesh&, const fe_system& sys, const scalar_function& f)
{
    const auto& pts = sys.dof_points();
    Eigen::VectorXd out(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = f(pts[i]);
    return out;
}

/// |u_h - u|_{H^1} for trial coefficients u_h against an exact gradient.
inline double h1_seminorm_error(const mesh& m, const fe_system& sys, const Eigen::VectorXcd& uh,
                                const gradient_function& grad, int extra_degree = 6)
{
    if (uh.size() != sys.num_trial())
        throw error("h1_seminorm_error: coefficient vector has wrong length");
    const auto quad = triangle_quadrature(std::min(2 * sys.p() + extra_degree, max_quadrature_degree));
    std::vector<basis_values> tab;
    for (const auto& x : quad.points)
        tab.push_back(eval_trial_basis(sys.p(), x));
    double sum = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const affine_map map(m, t);
        const double det = std::abs(map.det);
        const auto& dofs = sys.trial_dofs(t);
        Eigen::VectorXcd local(static_cast<Eigen::Index>(dofs.size()));
        for (std::size_t i = 0; i < dofs.size(); ++i)
            local[static_cast<Eigen::Index>(i)] = dofs[i] >= 0 ? uh[dofs[i]] : cplx(0.0);
        for (std::size_t q = 0; q < quad.points.size(); ++q) {
            const Eigen::MatrixXd g = tab[q].gradients * map.inverse_transpose.transpose();
            const Eigen::RowVector2cd gh = local.transpose() * g.cast<cplx>();
            const point ge = grad(map(quad.points[q]));
            sum += quad.weights[q] * det * (std::norm(gh[0] - ge.x) + std::norm(gh[1] - ge.y));
        }
    }
    return std::sqrt(sum);
}

/// NOC_l = log2(err_{l-1} / err_l) for consecutive levels with halved h.
inline std::vector<double> noc(const std::vector<double>& errors)
{
    for (double e : errors)
        if (!(e > 0.0))
            throw error("noc: error values must be positive");
    std::vector<double> rates;
    for (std::size_t i = 1; i < errors.size(); ++i)
        rates.push_back(std::log2(errors[i - 1] / errors[i]));
    return rates;
}

/// Least-squares slope of log(err) against log(h).
inline double fitted_rate(const std::vector<double>& h, const std::vector<double>& errors)
{
    if (h.size() != errors.size() || h.size() < 2)
        throw error("fitted_rate: need at least two matching samples");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h[i] > 0.0) || !(errors[i] > 0.0))
            throw error("fitted_rate: values must be positive");
        mx += std::log(h[i]) / n;
        my += std::log(errors[i]) / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double dx = std::log(h[i]) - mx;
        sxy += dx * (std::log(errors[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// Scales the columns of `v` to unit norm in `metric`.
inline Eigen::MatrixXcd normalize_columns(Eigen::MatrixXcd v, const sparse_real& metric)
{
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const double n = std::sqrt((v.col(j).adjoint() * (metric.cast<cplx>() * v.col(j)))(0).real());
        if (n > 0.0)
            v.col(j) /= n;
    }
    return v;
}

struct eigenspace_errors
{
    std::vector<double> delta1; // dist(e_{i,h}, I_h E)
    std::vector<double> delta2; // dist(I_h e_i, E_h)
    double d_h = 0.0;
};

/// Computable eigenspace error proxies in the H^1 seminorm, given the
/// computed eigenvectors and the interpolated exact eigenfunctions.
inline eigenspace_errors eigenspace_distance(const Eigen::MatrixXcd& computed, const Eigen::MatrixXcd& interpolated,
                                             const sparse_real& stiffness)
{
    const Eigen::MatrixXcd eh = normalize_columns(computed, stiffness);
    const Eigen::MatrixXcd ie = normalize_columns(interpolated, stiffness);
    eigenspace_errors out;
    for (Eigen::Index i = 0; i < eh.cols(); ++i)
        out.delta1.push_back(subspace_distance(eh.col(i), ie, stiffness));
    for (Eigen::Index i = 0; i < ie.cols(); ++i)
        out.delta2.push_back(subspace_distance(ie.col(i), eh, stiffness));
    for (double d : out.delta1)
        out.d_h += d;
    for (double d : out.delta2)
        out.d_h += d;
    return out;
}

} // namespace dpgfeast
