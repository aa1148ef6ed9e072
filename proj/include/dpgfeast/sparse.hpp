#pragma once

// Complex sparse storage, Hermitian positive definite solves and small dense
// Hermitian generalized eigenproblems.

#include <algorithm>
#include <complex>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/OrderingMethods>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "errors.hpp"

namespace dpgfeast {

using cplx = std::complex<double>;
using sparse_complex = Eigen::SparseMatrix<cplx>;
using sparse_real = Eigen::SparseMatrix<double>;
using triplet = Eigen::Triplet<cplx>;

/// Sums duplicate entries. The result does not depend on the order of the
/// input stream: entries are sorted (row, column, value) before summation.
inline sparse_complex assemble(int n, std::vector<triplet> triplets)
{
    for (const auto& t : triplets)
        if (t.row() < 0 || t.row() >= n || t.col() < 0 || t.col() >= n)
            throw error("assemble: index (" + std::to_string(t.row()) + ", " + std::to_string(t.col()) +
                        ") out of range for dimension " + std::to_string(n));
    std::sort(triplets.begin(), triplets.end(), [](const triplet& a, const triplet& b) {
        return std::make_tuple(a.col(), a.row(), a.value().real(), a.value().imag()) <
               std::make_tuple(b.col(), b.row(), b.value().real(), b.value().imag());
    });
    sparse_complex a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    return a;
}

/// max |A - A^H| <= rel_tol * max |A|.
template <typename Sparse>
bool is_hermitian(const Sparse& a, double rel_tol = 1e-12)
{
    if (a.rows() != a.cols())
        return false;
    using scalar = typename Sparse::Scalar;
    Eigen::SparseMatrix<scalar> d = Eigen::SparseMatrix<scalar>(a.adjoint()) - a;
    double amax = 0.0, dmax = 0.0;
    for (int k = 0; k < a.outerSize(); ++k)
        for (typename Sparse::InnerIterator it(a, k); it; ++it)
            amax = std::max(amax, std::abs(it.value()));
    for (int k = 0; k < d.outerSize(); ++k)
        for (typename Eigen::SparseMatrix<scalar>::InnerIterator it(d, k); it; ++it)
            dmax = std::max(dmax, std::abs(it.value()));
    return dmax <= rel_tol * amax;
}

/// Sparse LDL^H factorization with approximate minimum degree ordering:
/// P A P^T = L D L^H.
class hpd_factorization
{
public:
    using ldlt_type = Eigen::SimplicialLDLT<sparse_complex, Eigen::Lower, Eigen::AMDOrdering<int>>;

    explicit hpd_factorization(const sparse_complex& a)
        : ldlt_(std::make_unique<ldlt_type>())
        , n_(static_cast<int>(a.rows()))
    {
        ldlt_->compute(a);
        const auto& d = ldlt_->vectorD();
        if (ldlt_->info() != Eigen::Success && d.size() == 0)
            throw non_positive_pivot(0, 0.0);
        const auto& perm = ldlt_->permutationP();
        for (int i = 0; i < d.size(); ++i) {
            double v = d[i].real();
            if (!(v > 0.0) || ldlt_->info() != Eigen::Success) {
                // report the row in the caller's numbering
                int row = 0;
                for (int k = 0; k < perm.size(); ++k)
                    if (perm.indices()[k] == i)
                        row = k;
                throw non_positive_pivot(static_cast<std::size_t>(row), v);
            }
        }
    }

    int size() const noexcept { return n_; }

    Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs) const
    {
        if (rhs.rows() != n_)
            throw error("solve: right-hand side has " + std::to_string(rhs.rows()) + " rows, expected " +
                        std::to_string(n_));
        return ldlt_->solve(rhs);
    }

    /// Diagonal of D (real, positive).
    Eigen::VectorXd pivots() const { return ldlt_->vectorD().real(); }
    sparse_complex lower() const { return ldlt_->matrixL(); }
    const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>& permutation() const
    {
        return ldlt_->permutationP();
    }

private:
    std::unique_ptr<ldlt_type> ldlt_;
    int n_;
};

inline hpd_factorization factor_hpd(const sparse_complex& a) { return hpd_factorization(a); }

enum class solver_kind
{
    direct,
    conjugate_gradient,
};

/// A reusable solver for one HPD matrix: either the direct factorization or
/// Jacobi-preconditioned conjugate gradients.
class hpd_solver
{
public:
    hpd_solver(const sparse_complex& a, solver_kind kind, double cg_tolerance = 1e-13)
        : kind_(kind)
    {
        if (kind == solver_kind::direct) {
            direct_ = std::make_unique<hpd_factorization>(a);
        } else {
            cg_ = std::make_unique<cg_type>();
            cg_->setTolerance(cg_tolerance);
            cg_->setMaxIterations(std::max<Eigen::Index>(1000, 10 * a.rows()));
            cg_->compute(a);
        }
    }

    Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs) const
    {
        if (direct_)
            return direct_->solve(rhs);
        Eigen::MatrixXcd x(rhs.rows(), rhs.cols());
        for (Eigen::Index j = 0; j < rhs.cols(); ++j)
            x.col(j) = cg_->solve(rhs.col(j));
        return x;
    }

    solver_kind kind() const noexcept { return kind_; }

private:
    using cg_type = Eigen::ConjugateGradient<sparse_complex, Eigen::Lower | Eigen::Upper,
                                             Eigen::DiagonalPreconditioner<cplx>>;
    solver_kind kind_;
    std::unique_ptr<hpd_factorization> direct_;
    std::unique_ptr<cg_type> cg_;
};

struct generalized_eigen
{
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXcd vectors; // M-orthonormal columns
};

/// Solves A v = lambda M v for Hermitian A and Hermitian positive definite M.
/// Throws rank_deficient_mass when M has eigenvalues below
/// rank_tol * max eigenvalue; the exception carries the numerical rank.
inline generalized_eigen dense_hermitian_geig(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& m,
                                              double rank_tol = 1e-12)
{
    const Eigen::Index n = m.rows();
    if (a.rows() != n || a.cols() != n || m.cols() != n)
        throw error("dense_hermitian_geig: dimension mismatch");
    const Eigen::MatrixXcd mh = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> me(mh);
    const Eigen::VectorXd& d = me.eigenvalues();
    const double dmax = n > 0 ? d.maxCoeff() : 0.0;
    const auto rank = static_cast<std::size_t>((d.array() > rank_tol * dmax).count());
    if (rank < static_cast<std::size_t>(n) || !(dmax > 0.0))
        throw rank_deficient_mass(rank);

    // M = Q diag(d) Q^H, T = Q diag(d)^{-1/2}: T^H M T = I
    const Eigen::MatrixXcd t = me.eigenvectors() * d.cwiseSqrt().cwiseInverse().asDiagonal();
    Eigen::MatrixXcd c = t.adjoint() * a * t;
    c = 0.5 * (c + c.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ce(c);
    return {ce.eigenvalues(), t * ce.eigenvectors()};
}

} // namespace dpgfeast
