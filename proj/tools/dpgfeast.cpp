#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dpgfeast/dpgfeast.hpp"

namespace {

using namespace dpgfeast;

struct common_flags
{
    std::string config;
    std::string mesh;
    std::string out;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, common_flags& f)
{
    app->add_option("--config", f.config, "JSON study configuration");
    app->add_option("--mesh", f.mesh, "ASCII mesh file (selects the external_mesh domain)");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--threads", f.threads, "worker threads for the contour nodes");
    app->add_option("--seed", f.seed, "seed of the start block");
}

study_config resolve(const common_flags& f)
{
    study_config c = f.config.empty() ? study_config{} : load_config(f.config);
    if (!f.mesh.empty()) {
        c.domain = domain_kind::external_mesh;
        c.mesh_path = f.mesh;
    }
    if (!f.out.empty())
        c.out_dir = f.out;
    if (f.threads)
        c.threads = *f.threads;
    if (f.seed)
        c.seed = *f.seed;
    validate(c);
    return c;
}

int run_solve(const common_flags& f, int level, std::optional<int> p)
{
    study_config c = resolve(f);
    const level_result r = solve_level(c, p.value_or(c.p.front()), level);
    std::printf("domain %s  p %d  level %d  h %.6g  trial dofs %d  condensed dofs %d\n", to_string(c.domain).c_str(),
                r.p, r.level, r.h, r.trial_dofs, r.condensed_dofs);
    std::printf("iterations %d (truncated after %d)  final relative change %.3e\n", r.iterations, r.truncated_at,
                r.final_change);
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        std::printf("lambda_%zu = %.15g", i + 1, r.values[i]);
        if (i < r.errors.size())
            std::printf("   err %.3e", r.errors[i]);
        std::printf("\n");
    }
    if (r.hausdorff)
        std::printf("hausdorff %.3e\n", *r.hausdorff);
    if (r.d_h)
        std::printf("d_h %.3e\n", *r.d_h);
    for (std::size_t k = 0; k < r.node_solve_seconds.size(); ++k)
        std::printf("node %zu: factor %.3f s, solves %.3f s\n", k, r.node_factor_seconds[k], r.node_solve_seconds[k]);
    return 0;
}

int run_study_command(const common_flags& f)
{
    const study_config c = resolve(f);
    const study_report r = run_study(c);
    std::cout << "wrote " << r.csv_path.string() << ", " << r.metadata_path.string() << ", "
              << r.timings_path.string() << " (config " << r.hash << ")\n";
    return 0;
}

int run_filter_info(const common_flags& f, std::optional<double> y, std::optional<double> gamma, std::optional<int> n,
                    double delta, int samples)
{
    study_config c = f.config.empty() ? study_config{} : load_config(f.config);
    if (y)
        c.contour.y = *y;
    if (gamma)
        c.contour.gamma = *gamma;
    if (n)
        c.contour.n = *n;
    if (!f.mesh.empty()) {
        c.domain = domain_kind::external_mesh;
        c.mesh_path = f.mesh;
    }
    validate(c);
    const problem_setup s = setup_problem(c, 0);
    const auto& fl = s.filter;
    std::printf("center %.15g  radius %.15g  N %d  phi %.15g\n", fl.center, fl.radius, fl.n, fl.phi);
    for (std::size_t k = 0; k < fl.nodes.size(); ++k)
        std::printf("z_%zu = %.15g %+.15gi   w_%zu = %.15g %+.15gi\n", k, fl.nodes[k].real(), fl.nodes[k].imag(), k,
                    fl.weights[k].real(), fl.weights[k].imag());
    std::printf("w_N = %.15g %+.15gi\n", fl.tail_weight.real(), fl.tail_weight.imag());
    const auto q = filter_diagnostics(fl, fl.center, fl.radius, delta);
    std::printf("W = %.15g\nkappa_hat(delta = %g) = %.15g\n", q.w_sum, delta, q.kappa_hat);
    for (int i = 0; i <= samples; ++i) {
        const double x = fl.center - 3.0 * fl.radius + 6.0 * fl.radius * i / samples;
        const cplx r = fl(x);
        std::printf("r_N(%.10g) = %.15g %+.3ei\n", x, r.real(), r.imag());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"FEAST filtered subspace iteration with DPG resolvents"};
    app.require_subcommand(1);

    common_flags solve_flags, study_flags, filter_flags;
    int level = 0;
    std::optional<int> degree;
    auto* solve = app.add_subcommand("solve", "run FEAST on one mesh level and print the Ritz values");
    add_common(solve, solve_flags);
    solve->add_option("--level", level, "refinement level")->check(CLI::NonNegativeNumber);
    solve->add_option("--p", degree, "polynomial degree (default: first configured degree)");

    auto* study = app.add_subcommand("study", "convergence sweep; writes CSV, metadata and timings");
    add_common(study, study_flags);

    std::optional<double> y, gamma;
    std::optional<int> n;
    double delta = 1.0;
    int samples = 12;
    auto* filter = app.add_subcommand("filter-info", "print filter nodes, weights, W, kappa_hat and samples of r_N");
    add_common(filter, filter_flags);
    filter->add_option("--y", y, "contour center");
    filter->add_option("--gamma", gamma, "contour radius");
    filter->add_option("--N", n, "number of quadrature nodes");
    filter->add_option("--delta", delta, "separation for kappa_hat");
    filter->add_option("--samples", samples, "number of r_N sample intervals")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*solve)
            return run_solve(solve_flags, level, degree);
        if (*study)
            return run_study_command(study_flags);
        return run_filter_info(filter_flags, y, gamma, n, delta, samples);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const mesh_error& e) {
        std::cerr << "mesh error: " << e.what() << '\n';
        return 2;
    } catch (const error& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
