#pragma once

// Rational spectral filters from trapezoidal quadrature on a circle, and the
// filtered subspace iteration E^l = S_N^h E^{l-1} with Rayleigh-Ritz
// extraction on the real form a(u, v) = (grad u, grad v) - (nu u, v).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpg.hpp"
#include "elements.hpp"
#include "errors.hpp"
#include "mesh.hpp"
#include "sparse.hpp"

namespace dpgfeast {

/// r_N(x) = w_N + sum_k w_k / (z_k - x) with nodes on the circle |z - y| = gamma.
struct rational_filter
{
    double center = 0.0;
    double radius = 1.0;
    int n = 8;
    double phi = 0.0;
    std::vector<cplx> nodes;
    std::vector<cplx> weights;
    cplx tail_weight = 0.0; // w_N

    cplx operator()(double x) const
    {
        cplx r = tail_weight;
        for (std::size_t k = 0; k < nodes.size(); ++k)
            r += weights[k] / (nodes[k] - x);
        return r;
    }

    bool inside(double x) const { return std::abs(x - center) < radius; }
};

/// Butterworth-type filter: z_k = y + gamma e^{i(theta_k + phi)},
/// w_k = gamma e^{i(theta_k + phi)} / N, theta_k = 2 pi k / N, phi = +-pi/N.
inline rational_filter build_filter(double y, double gamma, int n, int phi_sign = 1)
{
    if (!(gamma > 0.0))
        throw config_error("build_filter: radius must be positive");
    if (n < 2 || n % 2 != 0)
        throw config_error("build_filter: node count must be even and >= 2");
    if (phi_sign != 1 && phi_sign != -1)
        throw config_error("build_filter: phi sign must be +1 or -1");
    rational_filter f;
    f.center = y;
    f.radius = gamma;
    f.n = n;
    f.phi = phi_sign * std::numbers::pi / n;
    for (int k = 0; k < n; ++k) {
        const cplx e = std::polar(gamma, 2.0 * std::numbers::pi * k / n + f.phi);
        f.nodes.push_back(y + e);
        f.weights.push_back(e / static_cast<double>(n));
    }
    return f;
}

inline cplx eval_filter(const rational_filter& f, double x) { return f(x); }

struct filter_quantities
{
    double w_sum = 0.0;     // W = sum_{k=0}^{N} |w_k|
    double kappa_hat = 0.0; // sup_O |r_N| / inf_I |r_N|
};

/// W and the contraction factor for I = [y - gamma, y + gamma] and
/// O = {|x - y| >= (1 + delta) gamma}, both by sampling. I is sampled
/// uniformly (endpoints included); O on a logarithmic bracket reaching
/// 1e4 (1 + delta) gamma on each side.
inline filter_quantities filter_diagnostics(const rational_filter& f, double y, double gamma, double delta,
                                            int samples = 10000)
{
    if (!(delta > 0.0))
        throw config_error("filter_diagnostics: delta must be positive");
    filter_quantities out;
    for (const auto& w : f.weights)
        out.w_sum += std::abs(w);
    out.w_sum += std::abs(f.tail_weight);

    double inf_inside = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= samples; ++i) {
        double x = y - gamma + 2.0 * gamma * i / samples;
        inf_inside = std::min(inf_inside, std::abs(f(x)));
    }
    double sup_outside = 0.0;
    const double near = (1.0 + delta) * gamma;
    for (int i = 0; i <= samples; ++i) {
        double d = near * std::pow(1e4, static_cast<double>(i) / samples);
        sup_outside = std::max({sup_outside, std::abs(f(y + d)), std::abs(f(y - d))});
    }
    out.kappa_hat = sup_outside / inf_inside;
    return out;
}

struct feast_options
{
    int m0 = 7;
    double tol = 1e-12;
    int max_iter = 100;
    std::uint64_t seed = 1;
    int threads = 1;
    solver_kind solver = solver_kind::direct;
    /// Interval whose Ritz values are reported and tracked for convergence;
    /// defaults to the contour's real diameter.
    std::optional<std::pair<double, double>> report_interval;
    double rank_tol = 1e-12;
    /// Iterations with an unchanged in-interval count before the block is
    /// truncated to the in-interval Ritz vectors.
    int settle_iterations = 3;
};

struct iteration_record
{
    std::vector<double> ritz_values; // all Ritz values of the iterate, ascending
    int inside_count = 0;
    int subspace_dim = 0;
    bool truncated = false; // block already reduced to the in-interval vectors
    double max_change = std::numeric_limits<double>::infinity();
};

struct spectral_cluster
{
    std::vector<double> ritz_values; // ascending, inside the report interval
    Eigen::MatrixXcd vectors;        // matching M-orthonormal trial coefficient columns
    std::vector<iteration_record> history;
    bool converged = false;
    int iterations = 0;
    int truncated_at = 0; // iteration after which the block was truncated (0: never)
};

/// Deterministic start block: doubles in [-1, 1) built from the raw
/// mt19937_64 stream so the values do not depend on the standard library's
/// distribution implementation.
inline Eigen::MatrixXcd random_block(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    Eigen::MatrixXcd y(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) {
            double v = static_cast<double>(gen() >> 11) * 0x1.0p-53;
            y(i, j) = 2.0 * v - 1.0;
        }
    return y;
}

/// Ritz pairs of `a` on span(q) with respect to `mass`. A numerically
/// singular Gram matrix is handled by dropping the weakest directions.
inline generalized_eigen rayleigh_ritz(const Eigen::MatrixXcd& q, const sparse_real& a, const sparse_real& mass,
                                       double rank_tol = 1e-12)
{
    const Eigen::MatrixXcd aq = a.cast<cplx>() * q;
    const Eigen::MatrixXcd mq = mass.cast<cplx>() * q;
    Eigen::MatrixXcd as = q.adjoint() * aq;
    Eigen::MatrixXcd ms = q.adjoint() * mq;
    try {
        auto ge = dense_hermitian_geig(as, ms, rank_tol);
        ge.vectors = q * ge.vectors;
        return ge;
    } catch (const rank_deficient_mass& e) {
        // keep the dominant directions of the mass Gram matrix
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> me(0.5 * (ms + ms.adjoint()));
        const Eigen::Index r = static_cast<Eigen::Index>(e.rank());
        if (r == 0)
            throw;
        const Eigen::MatrixXcd t = me.eigenvectors().rightCols(r) *
                                   me.eigenvalues().tail(r).cwiseSqrt().cwiseInverse().asDiagonal();
        Eigen::MatrixXcd c = t.adjoint() * as * t;
        c = 0.5 * (c + c.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ce(c);
        return {ce.eigenvalues(), q * (t * ce.eigenvectors())};
    }
}

/// Runs `task(k)` for k in [0, count) on up to `threads` workers.
template <typename Task>
void parallel_for(int count, int threads, Task&& task)
{
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int k = 0; k < count; ++k)
            task(k);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int k = next++; k < count; k = next++) {
                try {
                    task(k);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

/// FEAST driver on one mesh: the DPG operators for all contour nodes are
/// assembled and factored once and reused by every iteration.
class feast_solver
{
public:
    feast_solver(const mesh& m, const fe_system& sys, rational_filter filter, reaction nu, feast_options opts = {})
        : filter_(std::move(filter))
        , nu_(std::move(nu))
        , opts_(opts)
        , disc_(std::make_shared<dpg_discretization>(m, sys))
        , forms_(assemble_trial_forms(m, sys, nu_))
    {
        const int nn = static_cast<int>(filter_.nodes.size());
        ops_.resize(nn);
        factor_seconds_.assign(nn, 0.0);
        solve_seconds_.assign(nn, 0.0);
        parallel_for(nn, opts_.threads, [&](int k) {
            auto t0 = std::chrono::steady_clock::now();
            ops_[k] = std::make_unique<dpg_operator>(disc_, filter_.nodes[k], nu_, opts_.solver);
            factor_seconds_[k] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        });
    }

    const rational_filter& filter() const noexcept { return filter_; }
    const trial_forms& forms() const noexcept { return forms_; }
    const dpg_discretization& discretization() const noexcept { return *disc_; }
    const dpg_operator& node_operator(int k) const { return *ops_[k]; }
    const std::vector<double>& factor_seconds() const noexcept { return factor_seconds_; }
    const std::vector<double>& solve_seconds() const noexcept { return solve_seconds_; }

    /// S_N^h y = w_N y + sum_k w_k R_h(z_k) y, summed in node order.
    Eigen::MatrixXcd apply_filter(const Eigen::MatrixXcd& y)
    {
        const int nn = static_cast<int>(ops_.size());
        std::vector<Eigen::MatrixXcd> parts(nn);
        parallel_for(nn, opts_.threads, [&](int k) {
            auto t0 = std::chrono::steady_clock::now();
            parts[k] = filter_.weights[k] * ops_[k]->apply(y, false).u;
            solve_seconds_[k] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        });
        Eigen::MatrixXcd out = filter_.tail_weight * y;
        for (const auto& p : parts)
            out += p;
        return out;
    }

    /// Filtered subspace iteration with Rayleigh-Ritz extraction. The m0-column
    /// start block is truncated to the in-interval Ritz vectors once their
    /// count has settled; convergence is only declared after truncation.
    spectral_cluster run()
    {
        const auto [lo, hi] = opts_.report_interval.value_or(
            std::make_pair(filter_.center - filter_.radius, filter_.center + filter_.radius));
        auto in_range = [lo = lo, hi = hi](double x) { return x > lo && x < hi; };

        const int n = disc_->system().num_trial();
        const int m0 = std::min(opts_.m0, n);
        if (m0 < 1)
            throw error("feast: empty trial space");

        Eigen::MatrixXcd y =
            rayleigh_ritz(random_block(n, m0, opts_.seed), forms_.a, forms_.mass, opts_.rank_tol).vectors;
        spectral_cluster out;
        std::vector<double> previous;
        std::vector<Eigen::Index> inside_columns;
        int stable = 0;
        for (int it = 1; it <= opts_.max_iter; ++it) {
            auto rr = rayleigh_ritz(apply_filter(y), forms_.a, forms_.mass, opts_.rank_tol);
            y = std::move(rr.vectors);

            iteration_record rec;
            rec.subspace_dim = static_cast<int>(y.cols());
            rec.truncated = out.truncated_at > 0;
            std::vector<double> inside;
            inside_columns.clear();
            for (Eigen::Index i = 0; i < rr.values.size(); ++i) {
                rec.ritz_values.push_back(rr.values[i]);
                if (in_range(rr.values[i])) {
                    inside.push_back(rr.values[i]);
                    inside_columns.push_back(i);
                }
            }
            rec.inside_count = static_cast<int>(inside.size());
            if (!inside.empty() && inside.size() == previous.size()) {
                rec.max_change = 0.0;
                for (std::size_t i = 0; i < inside.size(); ++i)
                    rec.max_change = std::max(rec.max_change, std::abs(inside[i] - previous[i]) / std::abs(inside[i]));
            }
            stable = (!inside.empty() && inside.size() == previous.size()) ? stable + 1 : 0;
            out.history.push_back(rec);
            out.iterations = it;
            previous = std::move(inside);

            if (rec.truncated) {
                if (rec.max_change < opts_.tol) {
                    out.converged = true;
                    break;
                }
            } else if (stable + 1 >= opts_.settle_iterations) {
                Eigen::MatrixXcd kept(n, static_cast<Eigen::Index>(inside_columns.size()));
                for (std::size_t j = 0; j < inside_columns.size(); ++j)
                    kept.col(static_cast<Eigen::Index>(j)) = y.col(inside_columns[j]);
                y = std::move(kept);
                out.truncated_at = it;
            }
        }

        if (previous.empty())
            throw no_eigenvalues_in_contour();
        if (!out.converged)
            throw not_converged(out.iterations, out.history.back().max_change);

        out.ritz_values = previous;
        out.vectors.resize(n, static_cast<Eigen::Index>(inside_columns.size()));
        for (std::size_t j = 0; j < inside_columns.size(); ++j)
            out.vectors.col(static_cast<Eigen::Index>(j)) = y.col(inside_columns[j]);
        return out;
    }

private:
    rational_filter filter_;
    reaction nu_;
    feast_options opts_;
    std::shared_ptr<dpg_discretization> disc_;
    trial_forms forms_;
    std::vector<std::unique_ptr<dpg_operator>> ops_;
    std::vector<double> factor_seconds_;
    std::vector<double> solve_seconds_;
};

inline spectral_cluster feast_iterate(const mesh& m, const fe_system& sys, const rational_filter& filter,
                                      const reaction& nu, int m0, double tol, int max_iter, std::uint64_t seed)
{
    feast_options opts;
    opts.m0 = m0;
    opts.tol = tol;
    opts.max_iter = max_iter;
    opts.seed = seed;
    feast_solver solver(m, sys, filter, nu, opts);
    return solver.run();
}

} // namespace dpgfeast
