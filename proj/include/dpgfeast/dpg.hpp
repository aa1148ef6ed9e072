#pragma once

// DPG discretization of the shifted operator z - A, A = -Laplace - nu with
// homogeneous Dirichlet conditions.
//
// On each element K the broken test space Y_h(K) carries the H^1(K) Gram
// matrix G_K and the trial-to-test matrix B_K, with columns the local trial
// (u) unknowns followed by the local flux (q) unknowns:
//
//   B_K = [ (z + nu_K) M_K - S_K  |  D_K ],
//
// M_K and S_K the test-by-trial mass and stiffness matrices and D_K the edge
// pairing <q.n, v>. Eliminating the error representation eps_h leaves the
// Hermitian positive definite system sum_K B_K^H G_K^{-1} B_K x = rhs.
// Everything except the shift is precomputed once per mesh and degree as
// C_K = L_K^{-1} [M_K | S_K | D_K] with G_K = L_K L_K^T.

#include <map>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "elements.hpp"
#include "errors.hpp"
#include "mesh.hpp"
#include "sparse.hpp"

namespace dpgfeast {

/// Piecewise-constant reaction coefficient keyed by region tag; tags not
/// listed carry zero.
class reaction
{
public:
    reaction() = default;
    reaction(std::map<int, double> by_tag)
        : by_tag_(std::move(by_tag))
    {}

    double operator()(int tag) const
    {
        auto it = by_tag_.find(tag);
        return it == by_tag_.end() ? 0.0 : it->second;
    }

    const std::map<int, double>& values() const noexcept { return by_tag_; }

private:
    std::map<int, double> by_tag_;
};

/// Reference tabulations for one (p, dp) pair.
struct reference_tables
{
    int p = 0;
    int test_degree = 0;
    quadrature_rule quad;
    std::vector<basis_values> trial; // at quad points
    std::vector<basis_values> test;  // at quad points
    gauss_rule_1d edge_quad;
    // per local edge, test basis values at the edge quadrature points
    std::array<std::vector<Eigen::VectorXd>, 3> test_on_edge;

    reference_tables(int p_, int dp)
        : p(p_)
        , test_degree(p_ + dp)
        , quad(triangle_quadrature(2 * (p_ + dp) + 2))
        , edge_quad(gauss_legendre((2 * p_ + dp) / 2 + 2))
    {
        for (const auto& x : quad.points) {
            trial.push_back(eval_trial_basis(p, x));
            test.push_back(eval_trial_basis(test_degree, x));
        }
        for (int e = 0; e < 3; ++e) {
            const int a = (e + 1) % 3, b = (e + 2) % 3;
            for (double s : edge_quad.points) {
                barycentric l{0.0, 0.0, 0.0};
                l[a] = 1.0 - s;
                l[b] = s;
                test_on_edge[e].push_back(eval_trial_basis(test_degree, l).values);
            }
        }
    }
};

/// Shift-independent element matrices of one triangle.
struct element_matrices
{
    Eigen::MatrixXd gram;      // test x test, broken H^1(K) inner product
    Eigen::MatrixXd mass;      // test x trial, int_K phi_j eta_i
    Eigen::MatrixXd stiffness; // test x trial, int_K grad phi_j . grad eta_i
    Eigen::MatrixXd flux;      // test x (3p), <q_j . n_K, eta_i>_{dK}
};

inline element_matrices compute_element_matrices(const mesh& m, std::size_t t, const reference_tables& ref)
{
    const affine_map map(m, t);
    const double det = std::abs(map.det);
    const int nt = lagrange_dim(ref.p), ny = lagrange_dim(ref.test_degree);

    element_matrices em;
    em.gram = Eigen::MatrixXd::Zero(ny, ny);
    em.mass = Eigen::MatrixXd::Zero(ny, nt);
    em.stiffness = Eigen::MatrixXd::Zero(ny, nt);
    em.flux = Eigen::MatrixXd::Zero(ny, 3 * ref.p);

    for (std::size_t q = 0; q < ref.quad.weights.size(); ++q) {
        const double w = ref.quad.weights[q] * det;
        const Eigen::VectorXd& yv = ref.test[q].values;
        const Eigen::MatrixXd yg = ref.test[q].gradients * map.inverse_transpose.transpose();
        const Eigen::VectorXd& uv = ref.trial[q].values;
        const Eigen::MatrixXd ug = ref.trial[q].gradients * map.inverse_transpose.transpose();
        em.gram.noalias() += w * (yv * yv.transpose() + yg * yg.transpose());
        em.mass.noalias() += w * yv * uv.transpose();
        em.stiffness.noalias() += w * yg * ug.transpose();
    }

    const auto& tri = m.triangles()[t];
    for (int e = 0; e < 3; ++e) {
        const int a = tri[(e + 1) % 3], b = tri[(e + 2) % 3];
        const double len = norm(m.vertices()[b] - m.vertices()[a]);
        const bool forward = a == m.edges()[m.triangle_edge(t, e)][0];
        for (std::size_t q = 0; q < ref.edge_quad.points.size(); ++q) {
            const double w = ref.edge_quad.weights[q] * len;
            const Eigen::VectorXd qv = eval_flux_basis(ref.p, forward, ref.edge_quad.points[q]);
            em.flux.middleCols(e * ref.p, ref.p).noalias() += w * ref.test_on_edge[e][q] * qv.transpose();
        }
    }
    return em;
}

/// Shift-independent part of the DPG discretization on one mesh, shared by
/// the operators at every contour node.
class dpg_discretization
{
public:
    dpg_discretization(const mesh& m, const fe_system& sys)
        : mesh_(m)
        , sys_(sys)
        , ref_(sys.p(), sys.dp())
    {
        const int nt = sys.local_trial_dim(), nf = sys.local_flux_dim();
        elements_.resize(m.num_triangles());
        for (std::size_t t = 0; t < m.num_triangles(); ++t) {
            auto em = compute_element_matrices(m, t, ref_);
            Eigen::LLT<Eigen::MatrixXd> llt(em.gram);
            if (llt.info() != Eigen::Success)
                throw error("dpg: element Gram matrix is not positive definite");
            auto& el = elements_[t];
            el.c.resize(em.gram.rows(), 2 * nt + nf);
            el.c << em.mass, em.stiffness, em.flux;
            llt.matrixL().solveInPlace(el.c);

            el.dofs.resize(nt + nf);
            const auto& trial = sys.trial_dofs(t);
            for (int i = 0; i < nt; ++i)
                el.dofs[i] = trial[i];
            for (int e = 0; e < 3; ++e) {
                const int off = sys.num_trial() + sys.flux_offset(m.triangle_edge(t, e));
                for (int j = 0; j < sys.p(); ++j)
                    el.dofs[nt + e * sys.p() + j] = off + j;
            }
            el.tag = m.region_tags()[t];
        }
    }

    const mesh& get_mesh() const noexcept { return mesh_; }
    const fe_system& system() const noexcept { return sys_; }
    const reference_tables& tables() const noexcept { return ref_; }

    struct element
    {
        Eigen::MatrixXd c;     // L^{-1} [M | S | D]
        std::vector<int> dofs; // condensed indices, -1 on the Dirichlet boundary
        int tag = 0;
    };

    const std::vector<element>& elements() const noexcept { return elements_; }

    /// L_K^{-1} B_K for the shift z.
    Eigen::MatrixXcd weighted_b(const element& el, cplx z, double nu) const
    {
        const int nt = sys_.local_trial_dim(), nf = sys_.local_flux_dim();
        Eigen::MatrixXcd w(el.c.rows(), nt + nf);
        w.leftCols(nt) = ((z + nu) * el.c.leftCols(nt).cast<cplx>()) - el.c.middleCols(nt, nt).cast<cplx>();
        w.rightCols(nf) = el.c.rightCols(nf).cast<cplx>();
        return w;
    }

    /// L_K^{-1} M_K.
    auto weighted_mass(const element& el) const { return el.c.leftCols(sys_.local_trial_dim()); }

private:
    mesh mesh_;
    fe_system sys_;
    reference_tables ref_;
    std::vector<element> elements_;
};

struct resolvent_solution
{
    Eigen::MatrixXcd u;        // trial coefficients, one column per source
    Eigen::MatrixXcd q;        // flux coefficients
    Eigen::MatrixXd eps_norms; // ||eps_h||_{H^1(K)}, triangles x columns
};

/// Condensed DPG system for one shift, factored on construction.
class dpg_operator
{
public:
    dpg_operator(std::shared_ptr<const dpg_discretization> disc, cplx z, reaction nu,
                 solver_kind kind = solver_kind::direct)
        : disc_(std::move(disc))
        , z_(z)
        , nu_(std::move(nu))
    {
        const auto& sys = disc_->system();
        const int nloc = sys.local_trial_dim() + sys.local_flux_dim();
        std::vector<Eigen::Triplet<cplx>> trips;
        trips.reserve(disc_->elements().size() * nloc * nloc);
        for (const auto& el : disc_->elements()) {
            const Eigen::MatrixXcd w = disc_->weighted_b(el, z_, nu_(el.tag));
            const Eigen::MatrixXcd local = w.adjoint() * w;
            for (int j = 0; j < nloc; ++j) {
                if (el.dofs[j] < 0)
                    continue;
                for (int i = 0; i < nloc; ++i)
                    if (el.dofs[i] >= 0)
                        trips.emplace_back(el.dofs[i], el.dofs[j], local(i, j));
            }
        }
        const int n = sys.num_condensed();
        condensed_.resize(n, n);
        condensed_.setFromTriplets(trips.begin(), trips.end());
        condensed_.makeCompressed();
        trips.clear();
        trips.shrink_to_fit();
        solver_ = std::make_unique<hpd_solver>(condensed_, kind);
    }

    cplx shift() const noexcept { return z_; }
    const reaction& nu() const noexcept { return nu_; }
    const sparse_complex& condensed() const noexcept { return condensed_; }
    const dpg_discretization& discretization() const noexcept { return *disc_; }

    /// Condensed right-hand side sum_K (L^{-1}B_K)^H L^{-1} M_K f_K for sources
    /// given as trial coefficient columns.
    Eigen::MatrixXcd condensed_rhs(const Eigen::MatrixXcd& f) const
    {
        const auto& sys = disc_->system();
        if (f.rows() != sys.num_trial())
            throw error("apply_resolvent: source has " + std::to_string(f.rows()) + " rows, expected " +
                        std::to_string(sys.num_trial()));
        const int nt = sys.local_trial_dim();
        Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(sys.num_condensed(), f.cols());
        Eigen::MatrixXcd floc(nt, f.cols());
        for (const auto& el : disc_->elements()) {
            gather_trial(el, f, floc);
            const Eigen::MatrixXcd w = disc_->weighted_b(el, z_, nu_(el.tag));
            const Eigen::MatrixXcd local = w.adjoint() * (disc_->weighted_mass(el).cast<cplx>() * floc);
            for (int i = 0; i < local.rows(); ++i)
                if (el.dofs[i] >= 0)
                    rhs.row(el.dofs[i]) += local.row(i);
        }
        return rhs;
    }

    /// u_h = R_h(z) f for each column of f, with the flux and the element
    /// norms of the error representation.
    resolvent_solution apply(const Eigen::MatrixXcd& f, bool with_indicator = true) const
    {
        const auto& sys = disc_->system();
        const Eigen::MatrixXcd x = solver_->solve(condensed_rhs(f));
        resolvent_solution sol;
        sol.u = x.topRows(sys.num_trial());
        sol.q = x.bottomRows(sys.num_flux());
        if (with_indicator)
            sol.eps_norms = error_representation_norms(f, x);
        return sol;
    }

    /// ||L^{-1}(F_K - B_K x_K)||_2 = ||eps_h||_{H^1(K)} per element and column.
    Eigen::MatrixXd error_representation_norms(const Eigen::MatrixXcd& f, const Eigen::MatrixXcd& x) const
    {
        const auto& sys = disc_->system();
        const int nt = sys.local_trial_dim(), nloc = nt + sys.local_flux_dim();
        const auto& els = disc_->elements();
        Eigen::MatrixXd norms(els.size(), f.cols());
        Eigen::MatrixXcd floc(nt, f.cols()), xloc(nloc, f.cols());
        for (std::size_t k = 0; k < els.size(); ++k) {
            const auto& el = els[k];
            gather_trial(el, f, floc);
            for (int i = 0; i < nloc; ++i)
                xloc.row(i) = el.dofs[i] >= 0 ? Eigen::RowVectorXcd(x.row(el.dofs[i]))
                                              : Eigen::RowVectorXcd::Zero(f.cols());
            const Eigen::MatrixXcd w = disc_->weighted_b(el, z_, nu_(el.tag));
            const Eigen::MatrixXcd r = disc_->weighted_mass(el).cast<cplx>() * floc - w * xloc;
            norms.row(k) = r.colwise().norm();
        }
        return norms;
    }

private:
    static void gather_trial(const dpg_discretization::element& el, const Eigen::MatrixXcd& f, Eigen::MatrixXcd& out)
    {
        for (int i = 0; i < out.rows(); ++i)
            out.row(i) = el.dofs[i] >= 0 ? Eigen::RowVectorXcd(f.row(el.dofs[i])) : Eigen::RowVectorXcd::Zero(f.cols());
    }

    std::shared_ptr<const dpg_discretization> disc_;
    cplx z_;
    reaction nu_;
    sparse_complex condensed_;
    std::unique_ptr<hpd_solver> solver_;
};

inline dpg_operator assemble_dpg(std::shared_ptr<const dpg_discretization> disc, cplx z, const reaction& nu,
                                 solver_kind kind = solver_kind::direct)
{
    return dpg_operator(std::move(disc), z, nu, kind);
}

inline resolvent_solution apply_resolvent(const dpg_operator& op, const Eigen::MatrixXcd& f)
{
    return op.apply(f, true);
}

struct indicator
{
    Eigen::MatrixXd element; // eta_K per element and column
    Eigen::VectorXd global;  // (sum_K eta_K^2)^{1/2} per column
};

inline indicator error_indicator(const resolvent_solution& sol)
{
    return {sol.eps_norms, sol.eps_norms.colwise().norm().transpose()};
}

/// Real sparse matrices of the trial space L_h (free DOFs only).
struct trial_forms
{
    sparse_real mass;      // (u, v)
    sparse_real stiffness; // (grad u, grad v)
    sparse_real a;         // stiffness - nu mass
};

inline trial_forms assemble_trial_forms(const mesh& m, const fe_system& sys, const reaction& nu)
{
    const int p = sys.p();
    const auto quad = triangle_quadrature(2 * p);
    std::vector<basis_values> tab;
    for (const auto& x : quad.points)
        tab.push_back(eval_trial_basis(p, x));
    const int nt = sys.local_trial_dim();

    std::vector<Eigen::Triplet<double>> tm, ts, ta;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const affine_map map(m, t);
        const double det = std::abs(map.det);
        Eigen::MatrixXd mk = Eigen::MatrixXd::Zero(nt, nt), sk = Eigen::MatrixXd::Zero(nt, nt);
        for (std::size_t q = 0; q < quad.weights.size(); ++q) {
            const double w = quad.weights[q] * det;
            const Eigen::MatrixXd g = tab[q].gradients * map.inverse_transpose.transpose();
            mk.noalias() += w * tab[q].values * tab[q].values.transpose();
            sk.noalias() += w * g * g.transpose();
        }
        const double nuk = nu(m.region_tags()[t]);
        const auto& dofs = sys.trial_dofs(t);
        for (int j = 0; j < nt; ++j) {
            if (dofs[j] < 0)
                continue;
            for (int i = 0; i < nt; ++i) {
                if (dofs[i] < 0)
                    continue;
                tm.emplace_back(dofs[i], dofs[j], mk(i, j));
                ts.emplace_back(dofs[i], dofs[j], sk(i, j));
                ta.emplace_back(dofs[i], dofs[j], sk(i, j) - nuk * mk(i, j));
            }
        }
    }
    const int n = sys.num_trial();
    trial_forms f;
    f.mass.resize(n, n);
    f.stiffness.resize(n, n);
    f.a.resize(n, n);
    f.mass.setFromTriplets(tm.begin(), tm.end());
    f.stiffness.setFromTriplets(ts.begin(), ts.end());
    f.a.setFromTriplets(ta.begin(), ta.end());
    return f;
}

} // namespace dpgfeast
