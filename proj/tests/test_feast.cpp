#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "dpgfeast/analysis.hpp"
#include "dpgfeast/feast.hpp"

using namespace dpgfeast;

namespace {

double butterworth(double x, double y, double gamma, int n) { return 1.0 / (1.0 + std::pow((x - y) / gamma, n)); }

} // namespace

TEST(Filter, TwoNodeExample)
{
    const auto f = build_filter(0.0, 1.0, 2);
    ASSERT_EQ(f.nodes.size(), 2u);
    EXPECT_NEAR(std::abs(f.nodes[0] - cplx(0.0, 1.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(f.nodes[1] - cplx(0.0, -1.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(f.weights[0] - cplx(0.0, 0.5)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(f.weights[1] - cplx(0.0, -0.5)), 0.0, 1e-15);
}

TEST(Filter, BenchmarkNodes)
{
    const auto f = build_filter(20.0, 45.0, 8);
    EXPECT_NEAR(f.nodes[0].real(), 61.5746, 5e-5);
    EXPECT_NEAR(f.nodes[0].imag(), 17.2207, 1e-4);
    EXPECT_NEAR(f.weights[0].real(), 5.19682, 5e-6);
    EXPECT_NEAR(f.weights[0].imag(), 2.15259, 5e-6);
}

TEST(Filter, Invariants)
{
    for (int sign : {1, -1})
        for (int n : {2, 4, 8, 16})
            for (auto [y, gamma] : {std::pair{0.0, 1.0}, std::pair{20.0, 45.0}, std::pair{-2.9e6, 2.5e3}}) {
                const auto f = build_filter(y, gamma, n, sign);
                cplx sum = 0.0;
                for (std::size_t k = 0; k < f.nodes.size(); ++k) {
                    EXPECT_NEAR(std::abs(f.nodes[k] - y), gamma, 1e-13 * gamma);
                    EXPECT_GT(std::abs(f.nodes[k].imag()), 1e-3 * gamma);
                    sum += f.weights[k];
                }
                EXPECT_LE(std::abs(sum), 1e-13 * gamma);
                EXPECT_EQ(f.tail_weight, cplx(0.0));
                EXPECT_NEAR(filter_diagnostics(f, y, gamma, 1.0, 200).w_sum, gamma, 1e-12 * gamma);
            }
}

TEST(Filter, RejectsInvalidInput)
{
    EXPECT_THROW(build_filter(0.0, 1.0, 7), config_error);
    EXPECT_THROW(build_filter(0.0, 1.0, 0), config_error);
    EXPECT_THROW(build_filter(0.0, 0.0, 8), config_error);
    EXPECT_THROW(build_filter(0.0, -1.0, 8), config_error);
    EXPECT_THROW(build_filter(0.0, 1.0, 8, 0), config_error);
    const auto f = build_filter(0.0, 1.0, 8);
    EXPECT_THROW(filter_diagnostics(f, 0.0, 1.0, 0.0), config_error);
}

TEST(Filter, ButterworthIdentities)
{
    const double y = 20.0, gamma = 45.0;
    for (int sign : {1, -1}) {
        const auto f = build_filter(y, gamma, 8, sign);
        EXPECT_NEAR(std::abs(eval_filter(f, y) - 1.0), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(eval_filter(f, y + gamma) - 0.5), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(eval_filter(f, y - gamma) - 0.5), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(eval_filter(f, y + 2 * gamma) - 1.0 / 257), 0.0, 1e-12);
        for (int n : {2, 4, 8, 16}) {
            const auto g = build_filter(y, gamma, n, sign);
            for (double x = y - 4 * gamma; x <= y + 4 * gamma; x += 0.37 * gamma)
                EXPECT_NEAR(std::abs(g(x) - butterworth(x, y, gamma, n)), 0.0, 1e-12);
        }
    }
}

TEST(Filter, ContractionFactor)
{
    const auto f = build_filter(20.0, 45.0, 8);
    const auto q = filter_diagnostics(f, 20.0, 45.0, 1.0);
    EXPECT_NEAR(q.kappa_hat, 2.0 / 257, 1e-12);
    EXPECT_NEAR(q.w_sum, 45.0, 1e-12);
    EXPECT_NEAR(filter_diagnostics(f, 20.0, 45.0, 1e-8).kappa_hat, 1.0, 1e-6);
}

TEST(Feast, EmptyContour)
{
    const mesh m = make_unit_square(4);
    const fe_system sys(m, 1, 3);
    EXPECT_THROW(feast_iterate(m, sys, build_filter(-100.0, 10.0, 8), reaction{}, 7, 1e-12, 20, 1),
                 no_eigenvalues_in_contour);
}

TEST(Feast, NotConverged)
{
    const mesh m = make_unit_square(4);
    const fe_system sys(m, 2, 3);
    try {
        feast_iterate(m, sys, build_filter(20.0, 45.0, 8), reaction{}, 7, 1e-12, 3, 1);
        FAIL();
    } catch (const not_converged& e) {
        EXPECT_EQ(e.iterations(), 3);
    }
}

TEST(Feast, SquareCluster)
{
    const mesh m = make_unit_square(8);
    const fe_system sys(m, 2, 3);
    feast_options opts;
    opts.threads = 2;
    feast_solver solver(m, sys, build_filter(20.0, 45.0, 8), reaction{}, opts);
    const auto c = solver.run();
    ASSERT_TRUE(c.converged);
    ASSERT_EQ(c.ritz_values.size(), 3u);
    const auto ref = reference_square().values;
    EXPECT_LT(hausdorff(c.ritz_values, ref), 0.1);

    // M-orthonormal Ritz vectors
    const Eigen::MatrixXcd g = c.vectors.adjoint() * (solver.forms().mass.cast<cplx>() * c.vectors);
    EXPECT_LE((g - Eigen::MatrixXcd::Identity(3, 3)).norm(), 1e-10);

    // the in-interval count is constant over the final three iterations
    ASSERT_GE(c.history.size(), 3u);
    for (std::size_t i = c.history.size() - 3; i < c.history.size(); ++i)
        EXPECT_EQ(c.history[i].inside_count, 3);

    // telemetry contracts by the filter factor once the block has been truncated
    const double kappa =
        filter_diagnostics(solver.filter(), 20.0, 45.0, (8.0 * std::numbers::pi * std::numbers::pi - 20.0) / 45.0 - 1.0)
            .kappa_hat;
    for (std::size_t i = 1; i < c.history.size(); ++i) {
        if (!c.history[i - 1].truncated || !std::isfinite(c.history[i - 1].max_change))
            continue;
        EXPECT_LE(c.history[i].max_change, std::max(5.0 * kappa * c.history[i - 1].max_change, 1e-12))
            << "iteration " << i + 1;
    }
}

TEST(Feast, ThreadCountDoesNotChangeResults)
{
    const mesh m = make_unit_square(8);
    const fe_system sys(m, 2, 3);
    feast_options a, b;
    a.threads = 1;
    b.threads = 3;
    const auto ca = feast_solver(m, sys, build_filter(20.0, 45.0, 8), reaction{}, a).run();
    const auto cb = feast_solver(m, sys, build_filter(20.0, 45.0, 8), reaction{}, b).run();
    ASSERT_EQ(ca.ritz_values.size(), cb.ritz_values.size());
    for (std::size_t i = 0; i < ca.ritz_values.size(); ++i)
        EXPECT_EQ(ca.ritz_values[i], cb.ritz_values[i]);
    EXPECT_EQ(ca.iterations, cb.iterations);
}

TEST(Feast, FilterActsOnEigenvectorsByFilterValue)
{
    // || S e_h - r_N(lambda_h) e_h || / || r_N(lambda_h) e_h || decreases under refinement
    std::vector<double> deviation;
    for (int n : {4, 8, 16}) {
        const mesh m = make_unit_square(n);
        const fe_system sys(m, 2, 3);
        feast_solver solver(m, sys, build_filter(20.0, 45.0, 8), reaction{});
        const auto c = solver.run();
        const Eigen::VectorXcd e = c.vectors.col(0);
        const cplx r = eval_filter(solver.filter(), c.ritz_values[0]);
        const Eigen::VectorXcd d = solver.apply_filter(e) - r * e;
        const auto& s = solver.forms().stiffness;
        const double num = std::sqrt((d.adjoint() * (s.cast<cplx>() * d))(0).real());
        const double den = std::abs(r) * std::sqrt((e.adjoint() * (s.cast<cplx>() * e))(0).real());
        deviation.push_back(num / den);
    }
    EXPECT_GT(deviation[0], deviation[1]);
    EXPECT_GT(deviation[1], deviation[2]);
    EXPECT_LT(deviation[2], 1e-2);
}

TEST(Feast, RitzValuesAreRealAndInterior)
{
    const mesh m = make_lshape(4);
    const fe_system sys(m, 2, 1);
    const auto c = feast_iterate(m, sys, build_filter(15.0, 8.0, 8), reaction{}, 7, 1e-12, 100, 5);
    ASSERT_EQ(c.ritz_values.size(), 3u);
    for (double v : c.ritz_values) {
        EXPECT_GT(v, 7.0);
        EXPECT_LT(v, 23.0);
    }
}

TEST(Feast, TinyTrialSpace)
{
    // m0 is capped by the trial dimension
    const mesh m = make_unit_square(2);
    const fe_system sys(m, 1, 3);
    const auto c = feast_iterate(m, sys, build_filter(20.0, 45.0, 8), reaction{}, 7, 1e-12, 50, 1);
    ASSERT_EQ(c.ritz_values.size(), 1u);
}

TEST(Feast, RandomBlockIsDeterministic)
{
    EXPECT_EQ(random_block(20, 3, 42), random_block(20, 3, 42));
    EXPECT_NE(random_block(20, 3, 42), random_block(20, 3, 43));
    EXPECT_LE(random_block(50, 4, 1).cwiseAbs().maxCoeff(), 1.0);
}
