#pragma once

// Reference-element machinery for the three DPG spaces: continuous Lagrange
// trial space L_h, edge normal-flux space Q_h and the broken test space Y_h.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "mesh.hpp"

namespace dpgfeast {

using barycentric = std::array<double, 3>;

//
// quadrature
//

struct gauss_rule_1d
{
    std::vector<double> points;  // on [0,1]
    std::vector<double> weights; // sum to 1
};

namespace detail {

// P_n(x) and P_n'(x) by the three-term recurrence.
inline std::pair<double, double> legendre_with_derivative(int n, double x)
{
    double p0 = 1.0, p1 = x;
    if (n == 0)
        return {1.0, 0.0};
    for (int k = 2; k <= n; ++k) {
        double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
    }
    return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

} // namespace detail

/// n-point Gauss-Legendre rule on [0,1] (exact to degree 2n-1).
inline gauss_rule_1d gauss_legendre(int n)
{
    gauss_rule_1d r;
    r.points.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            auto [p, dp] = detail::legendre_with_derivative(n, x);
            double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        double dp = detail::legendre_with_derivative(n, x).second;
        r.points[n - 1 - i] = 0.5 * (x + 1.0);
        r.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

struct quadrature_rule
{
    std::vector<barycentric> points;
    std::vector<double> weights; // sum to 1/2, the reference triangle area
    int exactness_degree = 0;
};

inline constexpr int max_quadrature_degree = 40;

/// Rule on the reference triangle exact for all polynomials of total degree
/// `deg`. Degree <= 1 is the centroid rule; higher degrees use the collapsed
/// (Duffy) product of Gauss-Legendre rules.
inline quadrature_rule triangle_quadrature(int deg)
{
    if (deg < 0 || deg > max_quadrature_degree)
        throw error("triangle_quadrature: unsupported degree " + std::to_string(deg));
    quadrature_rule q;
    q.exactness_degree = deg;
    if (deg <= 1) {
        q.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
        q.weights.push_back(0.5);
        return q;
    }
    // x = s (1 - t), y = t with Jacobian (1 - t): degree deg+1 in t
    const int n = (deg + 3) / 2;
    const auto g = gauss_legendre(n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double s = g.points[i], t = g.points[j];
            double x = s * (1.0 - t), y = t;
            q.points.push_back({1.0 - x - y, x, y});
            q.weights.push_back(g.weights[i] * g.weights[j] * (1.0 - t));
        }
    return q;
}

//
// Lagrange basis on the reference triangle (equispaced nodes)
//

/// Multi-index (i, j, k), i + j + k = p: node at barycentric (i, j, k)/p.
using lagrange_index = std::array<int, 3>;

/// Node ordering: the three vertices, then p-1 nodes on each edge (edge i is
/// opposite vertex i, ordered from vertex (i+1)%3 to (i+2)%3), then interior
/// nodes.
inline std::vector<lagrange_index> lagrange_nodes(int p)
{
    std::vector<lagrange_index> nodes;
    for (int v = 0; v < 3; ++v) {
        lagrange_index idx{0, 0, 0};
        idx[v] = p;
        nodes.push_back(idx);
    }
    for (int e = 0; e < 3; ++e) {
        int a = (e + 1) % 3, b = (e + 2) % 3;
        for (int m = 1; m < p; ++m) {
            lagrange_index idx{0, 0, 0};
            idx[a] = p - m;
            idx[b] = m;
            nodes.push_back(idx);
        }
    }
    for (int i = 1; i < p; ++i)
        for (int j = 1; i + j < p; ++j)
            nodes.push_back({i, j, p - i - j});
    return nodes;
}

inline int lagrange_dim(int p) { return (p + 1) * (p + 2) / 2; }

struct basis_values
{
    Eigen::VectorXd values;
    Eigen::MatrixX2d gradients; // with respect to the reference coordinates (xi, eta)
};

namespace detail {

// R_n(l) = prod_{s<n} (p l - s)/(s + 1) and its derivative in l.
inline void silvester(int p, int n, double l, double& value, double& deriv)
{
    value = 1.0;
    deriv = 0.0;
    for (int s = 0; s < n; ++s) {
        double f = (p * l - s) / (s + 1.0);
        double df = p / (s + 1.0);
        deriv = deriv * f + value * df;
        value *= f;
    }
}

} // namespace detail

/// Values and reference gradients of the degree-p Lagrange basis at a point.
/// Reference coordinates are xi = l1, eta = l2 (so l0 = 1 - xi - eta).
inline basis_values eval_trial_basis(int p, const barycentric& pt)
{
    const auto nodes = lagrange_nodes(p);
    basis_values out;
    out.values.resize(nodes.size());
    out.gradients.resize(nodes.size(), 2);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        std::array<double, 3> r{}, dr{};
        for (int c = 0; c < 3; ++c)
            detail::silvester(p, nodes[k][c], pt[c], r[c], dr[c]);
        out.values[k] = r[0] * r[1] * r[2];
        // d/dl0, d/dl1, d/dl2 then chain rule with dl0/dxi = dl0/deta = -1
        double d0 = dr[0] * r[1] * r[2];
        double d1 = r[0] * dr[1] * r[2];
        double d2 = r[0] * r[1] * dr[2];
        out.gradients(k, 0) = d1 - d0;
        out.gradients(k, 1) = d2 - d0;
    }
    return out;
}

//
// edge flux basis
//

/// Legendre polynomials P_0..P_{n-1} in t in [0,1] (argument 2t-1).
inline Eigen::VectorXd legendre_values(int n, double t)
{
    Eigen::VectorXd v(n);
    const double x = 2.0 * t - 1.0;
    if (n > 0)
        v[0] = 1.0;
    if (n > 1)
        v[1] = x;
    for (int k = 2; k < n; ++k)
        v[k] = ((2.0 * k - 1.0) * x * v[k - 1] - (k - 1.0) * v[k - 2]) / k;
    return v;
}

/// Normal-trace basis of degree p-1 on one edge, as seen from an element.
/// `t` is the element-local parameter along the edge (counterclockwise
/// direction of the element). When the element traverses the edge against
/// the global low-to-high orientation the parameter is reversed and the sign
/// flipped, since its outward normal is then opposite to the global edge
/// normal. The result is q.n_K for the single-valued global flux functions.
inline Eigen::VectorXd eval_flux_basis(int p, bool element_follows_global, double t)
{
    if (element_follows_global)
        return legendre_values(p, t);
    return -legendre_values(p, 1.0 - t);
}

//
// global DOF layout
//

/// Degree-p Lagrange trial space with homogeneous Dirichlet conditions, p
/// Legendre flux coefficients per edge and a broken test space of degree
/// p + dp.
class fe_system
{
public:
    fe_system(const mesh& m, int p, int dp)
        : p_(p)
        , dp_(dp)
    {
        if (p < 1)
            throw error("fe_system: degree p must be >= 1");
        if (dp < 1)
            throw error("fe_system: enrichment dp must be >= 1");

        const auto nodes = lagrange_nodes(p);
        const int nloc = lagrange_dim(p);
        trial_map_.assign(m.num_triangles(), std::vector<int>(nloc, -1));

        // vertices, then edge interiors, then element interiors
        std::vector<int> vertex_dof(m.num_vertices(), -1);
        int next = 0;
        for (std::size_t v = 0; v < m.num_vertices(); ++v)
            if (!m.is_boundary_vertex(v))
                vertex_dof[v] = next++;
        std::vector<int> edge_first(m.num_edges(), -1);
        if (p > 1)
            for (std::size_t e = 0; e < m.num_edges(); ++e)
                if (!m.is_boundary_edge(e)) {
                    edge_first[e] = next;
                    next += p - 1;
                }
        const int interior_per = (p - 1) * (p - 2) / 2;

        dof_points_.clear();
        for (std::size_t v = 0; v < m.num_vertices(); ++v)
            if (vertex_dof[v] >= 0)
                dof_points_.push_back(m.vertices()[v]);
        dof_points_.resize(next);

        for (std::size_t t = 0; t < m.num_triangles(); ++t) {
            const auto& tri = m.triangles()[t];
            auto& map = trial_map_[t];
            for (int v = 0; v < 3; ++v)
                map[v] = vertex_dof[tri[v]];
            int k = 3;
            for (int e = 0; e < 3; ++e) {
                const int ge = m.triangle_edge(t, e);
                const int a = tri[(e + 1) % 3];
                const bool forward = a == m.edges()[ge][0];
                for (int j = 1; j < p; ++j, ++k) {
                    if (edge_first[ge] < 0)
                        continue;
                    // local node j is j/p along the local direction
                    int pos = forward ? j : p - j;
                    map[k] = edge_first[ge] + pos - 1;
                }
            }
            for (int j = 0; j < interior_per; ++j, ++k)
                map[k] = next + j;
            next += interior_per;

            // nodal coordinates for every non-vertex node
            for (int i = 3; i < nloc; ++i) {
                if (map[i] < 0)
                    continue;
                if (static_cast<int>(dof_points_.size()) <= map[i])
                    dof_points_.resize(map[i] + 1);
                point x{0.0, 0.0};
                for (int c = 0; c < 3; ++c)
                    x = x + (static_cast<double>(nodes[i][c]) / p) * m.vertices()[tri[c]];
                dof_points_[map[i]] = x;
            }
        }
        num_trial_ = next;
        dof_points_.resize(num_trial_);
        num_flux_ = static_cast<int>(m.num_edges()) * p;
    }

    int p() const noexcept { return p_; }
    int dp() const noexcept { return dp_; }
    int test_degree() const noexcept { return p_ + dp_; }

    int num_trial() const noexcept { return num_trial_; }
    int num_flux() const noexcept { return num_flux_; }
    /// Size of the condensed system: trial unknowns followed by flux unknowns.
    int num_condensed() const noexcept { return num_trial_ + num_flux_; }

    int local_trial_dim() const noexcept { return lagrange_dim(p_); }
    int local_flux_dim() const noexcept { return 3 * p_; }
    int local_test_dim() const noexcept { return lagrange_dim(p_ + dp_); }

    /// Global trial indices of the local Lagrange nodes of triangle t; -1 for
    /// nodes on the Dirichlet boundary.
    const std::vector<int>& trial_dofs(std::size_t t) const { return trial_map_[t]; }

    /// First global flux index of edge e (p consecutive Legendre coefficients).
    int flux_offset(int edge) const noexcept { return edge * p_; }

    /// Physical location of each free trial node.
    const std::vector<point>& dof_points() const noexcept { return dof_points_; }

    /// Exactness required for element integrals.
    int quadrature_degree() const noexcept { return 2 * (p_ + dp_) + 2; }

private:
    int p_;
    int dp_;
    int num_trial_ = 0;
    int num_flux_ = 0;
    std::vector<std::vector<int>> trial_map_;
    std::vector<point> dof_points_;
};

/// Affine map of triangle t: x = v0 + J (xi, eta).
struct affine_map
{
    Eigen::Matrix2d jacobian;
    Eigen::Matrix2d inverse_transpose;
    double det = 0.0;
    point origin;

    affine_map(const mesh& m, std::size_t t)
    {
        const auto& tri = m.triangles()[t];
        const point a = m.vertices()[tri[0]], b = m.vertices()[tri[1]], c = m.vertices()[tri[2]];
        jacobian << b.x - a.x, c.x - a.x, b.y - a.y, c.y - a.y;
        det = jacobian.determinant();
        inverse_transpose = jacobian.inverse().transpose();
        origin = a;
    }

    point operator()(const barycentric& l) const
    {
        return {origin.x + jacobian(0, 0) * l[1] + jacobian(0, 1) * l[2],
                origin.y + jacobian(1, 0) * l[1] + jacobian(1, 1) * l[2]};
    }
};

} // namespace dpgfeast
