#pragma once

// Study configuration, convergence sweeps over mesh levels and degrees, and
// CSV / JSON reports.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "analysis.hpp"
#include "dpg.hpp"
#include "elements.hpp"
#include "errors.hpp"
#include "feast.hpp"
#include "mesh.hpp"

namespace dpgfeast {

enum class domain_kind
{
    square,
    lshape,
    disc_fiber,
    external_mesh,
};

inline std::string to_string(domain_kind d)
{
    switch (d) {
    case domain_kind::square: return "square";
    case domain_kind::lshape: return "lshape";
    case domain_kind::disc_fiber: return "disc_fiber";
    case domain_kind::external_mesh: return "external_mesh";
    }
    return "";
}

inline domain_kind parse_domain(const std::string& s)
{
    if (s == "square")
        return domain_kind::square;
    if (s == "lshape")
        return domain_kind::lshape;
    if (s == "disc_fiber")
        return domain_kind::disc_fiber;
    if (s == "external_mesh")
        return domain_kind::external_mesh;
    throw config_error("unknown domain '" + s + "'");
}

/// Step-index fiber scaled to the unit disc (radius r_clad). Guided modes
/// satisfy Delta phi + nu phi = lambda phi with nu = (k n r_clad)^2 per region.
struct fiber_parameters
{
    double wavelength = 1.064e-6;
    double n_core = 1.45097;
    double n_clad = 1.44973;
    double r_core = 0.0125e-3;
    double clad_ratio = 16.0;

    double wavenumber() const { return 2.0 * std::numbers::pi / wavelength; }
    double r_clad() const { return clad_ratio * r_core; }
    double nu_core() const { return std::pow(wavenumber() * n_core * r_clad(), 2); }
    double nu_clad() const { return std::pow(wavenumber() * n_clad * r_clad(), 2); }
    std::pair<double, double> guided_interval() const { return {nu_clad(), nu_core()}; }
};

struct contour_spec
{
    std::optional<double> y;
    std::optional<double> gamma;
    int n = 8;
    int phi_sign = 1;
};

struct study_config
{
    domain_kind domain = domain_kind::square;
    std::vector<int> p{1};
    int dp = 3;
    int refinements = 4;

    int base_n = 4;          // square and L-shape: cells per unit length on level 0
    int n_boundary = 16;     // disc: outer circle segments on level 0
    double grading = 8.0;    // disc: core refinement factor
    std::string mesh_path;   // external mesh

    contour_spec contour;
    std::map<int, double> nu;
    fiber_parameters fiber;
    std::vector<double> reference; // external mesh only

    int m0 = 0; // 0: expected cluster size + 4
    double tol = 1e-12;
    int max_iter = 100;
    std::uint64_t seed = 1;
    int threads = 1;
    solver_kind solver = solver_kind::direct;

    std::string out_dir = ".";
    std::string csv_name = "study.csv";
    std::string metadata_name = "metadata.json";
    std::string timings_name = "timings.json";
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback)
{
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("config field '") + key + "': " + e.what());
    }
}

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object())
        throw config_error(where + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw config_error("unknown config field '" + where + "." + key + "'");
}

} // namespace detail

inline void validate(const study_config& c)
{
    if (c.p.empty())
        throw config_error("p: at least one degree required");
    for (int p : c.p)
        if (p < 1 || p > 8)
            throw config_error("p: degrees must lie in [1, 8]");
    if (c.dp < 1 || c.dp > 6)
        throw config_error("dp must lie in [1, 6]");
    if (c.refinements < 1)
        throw config_error("refinements must be >= 1");
    if (c.base_n < 1)
        throw config_error("mesh.n must be >= 1");
    if (c.contour.gamma && !(*c.contour.gamma > 0.0))
        throw config_error("contour radius must be positive");
    if (c.contour.n < 2 || c.contour.n % 2 != 0)
        throw config_error("contour.N must be even and >= 2");
    if (c.contour.phi_sign != 1 && c.contour.phi_sign != -1)
        throw config_error("contour.phi_sign must be +1 or -1");
    if (c.domain != domain_kind::disc_fiber && (!c.contour.y || !c.contour.gamma))
        throw config_error("contour.y and contour.gamma are required for domain " + to_string(c.domain));
    if (c.domain == domain_kind::disc_fiber && !c.nu.empty() && c.nu.size() != 2)
        throw config_error("disc_fiber needs exactly two regions in nu");
    if (c.domain == domain_kind::external_mesh && c.mesh_path.empty())
        throw config_error("external_mesh needs mesh.path or --mesh");
    if (c.m0 < 0 || c.max_iter < 1 || !(c.tol > 0.0) || c.threads < 1)
        throw config_error("feast: m0 >= 0, max_iter >= 1, tol > 0 and threads >= 1 required");
}

inline study_config parse_config(const nlohmann::json& j)
{
    using detail::get_or;
    detail::check_keys(j, {"domain", "p", "dp", "refinements", "mesh", "contour", "nu", "fiber", "reference", "feast",
                           "outputs"},
                       "config");
    study_config c;
    c.domain = parse_domain(get_or<std::string>(j, "domain", "square"));
    if (j.contains("p")) {
        if (j["p"].is_array())
            c.p = get_or<std::vector<int>>(j, "p", {});
        else
            c.p = {get_or<int>(j, "p", 1)};
    }
    c.dp = get_or(j, "dp", c.dp);
    c.refinements = get_or(j, "refinements", c.refinements);

    if (j.contains("mesh")) {
        const auto& m = j["mesh"];
        detail::check_keys(m, {"n", "n_boundary", "grading", "path"}, "mesh");
        c.base_n = get_or(m, "n", c.base_n);
        c.n_boundary = get_or(m, "n_boundary", c.n_boundary);
        c.grading = get_or(m, "grading", c.grading);
        c.mesh_path = get_or(m, "path", c.mesh_path);
    }
    if (j.contains("contour")) {
        const auto& k = j["contour"];
        detail::check_keys(k, {"y", "gamma", "N", "phi_sign"}, "contour");
        if (k.contains("y"))
            c.contour.y = get_or(k, "y", 0.0);
        if (k.contains("gamma"))
            c.contour.gamma = get_or(k, "gamma", 0.0);
        c.contour.n = get_or(k, "N", c.contour.n);
        c.contour.phi_sign = get_or(k, "phi_sign", c.contour.phi_sign);
    }
    if (j.contains("nu")) {
        if (!j["nu"].is_object())
            throw config_error("nu must map region tags to numbers");
        for (const auto& [tag, value] : j["nu"].items()) {
            std::size_t used = 0;
            int t = 0;
            try {
                t = std::stoi(tag, &used);
            } catch (const std::exception&) {
            }
            if (used != tag.size() || !value.is_number())
                throw config_error("nu: expected integer region tag with a numeric value, got '" + tag + "'");
            c.nu[t] = value.get<double>();
        }
    }
    if (j.contains("fiber")) {
        const auto& f = j["fiber"];
        detail::check_keys(f, {"wavelength", "n_core", "n_clad", "r_core", "clad_ratio"}, "fiber");
        c.fiber.wavelength = get_or(f, "wavelength", c.fiber.wavelength);
        c.fiber.n_core = get_or(f, "n_core", c.fiber.n_core);
        c.fiber.n_clad = get_or(f, "n_clad", c.fiber.n_clad);
        c.fiber.r_core = get_or(f, "r_core", c.fiber.r_core);
        c.fiber.clad_ratio = get_or(f, "clad_ratio", c.fiber.clad_ratio);
    }
    c.reference = get_or(j, "reference", c.reference);
    if (j.contains("feast")) {
        const auto& f = j["feast"];
        detail::check_keys(f, {"m0", "tol", "max_iter", "seed", "threads", "solver"}, "feast");
        c.m0 = get_or(f, "m0", c.m0);
        c.tol = get_or(f, "tol", c.tol);
        c.max_iter = get_or(f, "max_iter", c.max_iter);
        c.seed = get_or(f, "seed", c.seed);
        c.threads = get_or(f, "threads", c.threads);
        const auto solver = get_or<std::string>(f, "solver", "direct");
        if (solver == "direct")
            c.solver = solver_kind::direct;
        else if (solver == "cg")
            c.solver = solver_kind::conjugate_gradient;
        else
            throw config_error("feast.solver must be 'direct' or 'cg'");
    }
    if (j.contains("outputs")) {
        const auto& o = j["outputs"];
        detail::check_keys(o, {"dir", "csv", "metadata", "timings"}, "outputs");
        c.out_dir = get_or(o, "dir", c.out_dir);
        c.csv_name = get_or(o, "csv", c.csv_name);
        c.metadata_name = get_or(o, "metadata", c.metadata_name);
        c.timings_name = get_or(o, "timings", c.timings_name);
    }
    return c;
}

inline study_config load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

/// Everything that determines the numerical results (not threads or paths).
inline nlohmann::json canonical_json(const study_config& c)
{
    nlohmann::json j;
    j["domain"] = to_string(c.domain);
    j["p"] = c.p;
    j["dp"] = c.dp;
    j["refinements"] = c.refinements;
    j["mesh"] = {{"n", c.base_n}, {"n_boundary", c.n_boundary}, {"grading", c.grading}, {"path", c.mesh_path}};
    j["contour"] = {{"N", c.contour.n}, {"phi_sign", c.contour.phi_sign}};
    if (c.contour.y)
        j["contour"]["y"] = *c.contour.y;
    if (c.contour.gamma)
        j["contour"]["gamma"] = *c.contour.gamma;
    nlohmann::json nu = nlohmann::json::object();
    for (const auto& [tag, v] : c.nu)
        nu[std::to_string(tag)] = v;
    j["nu"] = nu;
    j["fiber"] = {{"wavelength", c.fiber.wavelength},
                  {"n_core", c.fiber.n_core},
                  {"n_clad", c.fiber.n_clad},
                  {"r_core", c.fiber.r_core},
                  {"clad_ratio", c.fiber.clad_ratio}};
    j["reference"] = c.reference;
    j["feast"] = {{"m0", c.m0},
                  {"tol", c.tol},
                  {"max_iter", c.max_iter},
                  {"seed", c.seed},
                  {"solver", c.solver == solver_kind::direct ? "direct" : "cg"}};
    return j;
}

/// 64-bit FNV-1a of the canonical configuration, as 16 hex digits.
inline std::string config_hash(const study_config& c)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// A spectral problem on one mesh, ready for feast_solver.
struct problem_setup
{
    mesh m;
    reaction nu;
    rational_filter filter;
    std::pair<double, double> report_interval;
    /// Ritz values of the operator are mapped to reported values by x -> sign * x.
    double sign = 1.0;
    std::vector<double> reference;
    int m0 = 7;
};

inline mesh build_mesh(const study_config& c, int level)
{
    switch (c.domain) {
    case domain_kind::square: return refine_uniform(make_unit_square(c.base_n), level);
    case domain_kind::lshape: return refine_uniform(make_lshape(c.base_n), level);
    case domain_kind::disc_fiber:
        return refine_uniform(make_disc_fiber(c.n_boundary, 1.0 / c.fiber.clad_ratio, c.grading), level);
    case domain_kind::external_mesh: return refine_uniform(read_mesh(c.mesh_path), level);
    }
    throw config_error("unknown domain");
}

/// Reported spectral parameter of the fiber is lambda = -x for eigenvalues x
/// of -Delta - nu, so the contour and report interval are mirrored.
inline problem_setup setup_problem(const study_config& c, int level)
{
    validate(c);
    problem_setup s{build_mesh(c, level), reaction{c.nu}, {}, {}, 1.0, {}, 7};
    double y = c.contour.y.value_or(0.0), gamma = c.contour.gamma.value_or(0.0);
    switch (c.domain) {
    case domain_kind::square: s.reference = reference_square().values; break;
    case domain_kind::lshape: s.reference = reference_lshape().values; break;
    case domain_kind::external_mesh: s.reference = c.reference; break;
    case domain_kind::disc_fiber: {
        s.reference = reference_fiber().values;
        s.sign = -1.0;
        if (c.nu.empty())
            s.nu = reaction({{core_tag, c.fiber.nu_core()}, {cladding_tag, c.fiber.nu_clad()}});
        const auto [lo, hi] = c.fiber.guided_interval();
        if (!c.contour.y)
            y = 0.5 * (lo + hi);
        if (!c.contour.gamma)
            gamma = 1.02 * 0.5 * (hi - lo);
        s.report_interval = {-hi, -lo};
        s.filter = build_filter(-y, gamma, c.contour.n, c.contour.phi_sign);
        s.m0 = c.m0 > 0 ? c.m0 : static_cast<int>(s.reference.size()) + 4;
        return s;
    }
    }
    s.filter = build_filter(y, gamma, c.contour.n, c.contour.phi_sign);
    s.report_interval = {y - gamma, y + gamma};
    s.m0 = c.m0 > 0 ? c.m0 : static_cast<int>(s.reference.size()) + 4;
    return s;
}

struct level_result
{
    int p = 0;
    int level = 0;
    double h = 0.0;      // nominal mesh size
    double h_core = 0.0; // largest core diameter (fiber)
    int triangles = 0;
    int trial_dofs = 0;
    int condensed_dofs = 0;
    std::vector<double> values; // reported Ritz values, ascending
    std::vector<double> errors; // |value - reference|, paired in ascending order
    std::vector<double> relative_errors;
    std::optional<double> hausdorff;
    std::optional<double> d_h;
    int iterations = 0;
    int truncated_at = 0;
    double final_change = 0.0;
    double setup_seconds = 0.0;
    double solve_seconds = 0.0;
    std::vector<double> node_factor_seconds;
    std::vector<double> node_solve_seconds;
};

/// Annotates library errors with the level and degree they occurred at.
class study_failure : public error
{
public:
    study_failure(int p, int level, const std::string& what)
        : error("p=" + std::to_string(p) + ", level=" + std::to_string(level) + ": " + what)
    {}
};

inline double nominal_h(const study_config& c, const mesh& m, int level)
{
    if (c.domain == domain_kind::square || c.domain == domain_kind::lshape)
        return std::ldexp(1.0 / c.base_n, -level);
    return m.h_max();
}

inline level_result solve_level(const study_config& c, int p, int level)
{
    level_result r;
    r.p = p;
    r.level = level;
    const auto t0 = std::chrono::steady_clock::now();
    problem_setup s = setup_problem(c, level);
    try {
        fe_system sys(s.m, p, c.dp);
        r.h = nominal_h(c, s.m, level);
        if (c.domain == domain_kind::disc_fiber)
            r.h_core = s.m.h_max(core_tag);
        r.triangles = static_cast<int>(s.m.num_triangles());
        r.trial_dofs = sys.num_trial();
        r.condensed_dofs = sys.num_condensed();

        feast_options opts;
        opts.m0 = s.m0;
        opts.tol = c.tol;
        opts.max_iter = c.max_iter;
        opts.seed = c.seed;
        opts.threads = c.threads;
        opts.solver = c.solver;
        opts.report_interval = s.report_interval;
        feast_solver solver(s.m, sys, s.filter, s.nu, opts);
        const auto t1 = std::chrono::steady_clock::now();
        auto cluster = solver.run();
        const auto t2 = std::chrono::steady_clock::now();
        r.setup_seconds = std::chrono::duration<double>(t1 - t0).count();
        r.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
        r.node_factor_seconds = solver.factor_seconds();
        r.node_solve_seconds = solver.solve_seconds();
        r.iterations = cluster.iterations;
        r.truncated_at = cluster.truncated_at;
        r.final_change = cluster.history.back().max_change;

        for (double x : cluster.ritz_values)
            r.values.push_back(s.sign * x);
        std::sort(r.values.begin(), r.values.end());
        if (!s.reference.empty()) {
            r.hausdorff = hausdorff(r.values, s.reference);
            for (std::size_t i = 0; i < std::min(r.values.size(), s.reference.size()); ++i) {
                r.errors.push_back(std::abs(r.values[i] - s.reference[i]));
                r.relative_errors.push_back(r.errors.back() / std::abs(s.reference[i]));
            }
        }
        if (c.domain == domain_kind::square) {
            const auto ref = reference_square();
            Eigen::MatrixXcd ie(sys.num_trial(), static_cast<Eigen::Index>(ref.eigenfunctions.size()));
            for (std::size_t i = 0; i < ref.eigenfunctions.size(); ++i)
                ie.col(static_cast<Eigen::Index>(i)) = interpolate(s.m, sys, ref.eigenfunctions[i]).cast<cplx>();
            r.d_h = eigenspace_distance(cluster.vectors, ie, solver.forms().stiffness).d_h;
        }
    } catch (const config_error&) {
        throw;
    } catch (const error& e) {
        throw study_failure(p, level, e.what());
    }
    return r;
}

struct study_report
{
    std::vector<level_result> levels; // ordered by p, then level
    std::string hash;
    std::filesystem::path csv_path;
    std::filesystem::path metadata_path;
    std::filesystem::path timings_path;
};

namespace detail {

inline std::string fmt(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

inline std::optional<double> rate(const std::optional<double>& coarse, const std::optional<double>& fine)
{
    if (!coarse || !fine || !(*coarse > 0.0) || !(*fine > 0.0))
        return std::nullopt;
    return noc({*coarse, *fine})[0];
}

inline std::optional<double> at(const std::vector<double>& v, std::size_t i)
{
    return i < v.size() ? std::optional<double>(v[i]) : std::nullopt;
}

} // namespace detail

inline void write_square_csv(std::ostream& out, const std::vector<level_result>& rows, const std::string& hash)
{
    out << "p,level,h,lambda_1,lambda_2,lambda_3,err_1,err_2,err_3,hausdorff,d_h,noc_hausdorff,iters,config_hash\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        std::optional<double> rate;
        if (i > 0 && rows[i - 1].p == r.p)
            rate = detail::rate(rows[i - 1].hausdorff, r.hausdorff);
        out << r.p << ',' << r.level << ',' << detail::fmt(r.h);
        for (std::size_t k = 0; k < 3; ++k)
            out << ',' << detail::fmt(detail::at(r.values, k));
        for (std::size_t k = 0; k < 3; ++k)
            out << ',' << detail::fmt(detail::at(r.errors, k));
        out << ',' << detail::fmt(r.hausdorff) << ',' << detail::fmt(r.d_h) << ',' << detail::fmt(rate) << ','
            << r.iterations << ',' << hash << '\n';
    }
}

inline void write_fiber_csv(std::ostream& out, const std::vector<level_result>& rows, const std::string& hash)
{
    out << "level,h_core";
    for (int k = 1; k <= 6; ++k)
        out << ",e_" << k;
    for (int k = 1; k <= 6; ++k)
        out << ",noc_" << k;
    out << ",iters,config_hash\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out << r.level << ',' << detail::fmt(r.h_core);
        for (std::size_t k = 0; k < 6; ++k)
            out << ',' << detail::fmt(detail::at(r.relative_errors, k));
        for (std::size_t k = 0; k < 6; ++k) {
            std::optional<double> rate;
            if (i > 0 && rows[i - 1].p == r.p)
                rate = detail::rate(detail::at(rows[i - 1].relative_errors, k), detail::at(r.relative_errors, k));
            out << ',' << detail::fmt(rate);
        }
        out << ',' << r.iterations << ',' << hash << '\n';
    }
}

inline nlohmann::json metadata_json(const study_config& c, const std::vector<level_result>& rows)
{
    nlohmann::json j;
    j["config"] = canonical_json(c);
    j["config_hash"] = config_hash(c);
    const problem_setup s0 = setup_problem(c, 0);
    j["filter"] = {{"center", s0.filter.center},
                   {"radius", s0.filter.radius},
                   {"N", s0.filter.n},
                   {"phi", s0.filter.phi},
                   {"value_sign", s0.sign},
                   {"report_interval", {s0.report_interval.first, s0.report_interval.second}}};
    j["feast"] = {{"m0", s0.m0},
                  {"tol", c.tol},
                  {"max_iter", c.max_iter},
                  {"seed", c.seed},
                  {"settle_iterations", feast_options{}.settle_iterations}};
    j["dp"] = c.dp;
    j["reference"] = s0.reference;
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& r : rows)
        levels.push_back({{"p", r.p},
                          {"level", r.level},
                          {"h", r.h},
                          {"triangles", r.triangles},
                          {"trial_dofs", r.trial_dofs},
                          {"condensed_dofs", r.condensed_dofs},
                          {"ritz_values", r.values},
                          {"found", r.values.size()},
                          {"iterations", r.iterations},
                          {"truncated_at", r.truncated_at},
                          {"final_change", r.final_change}});
    j["levels"] = levels;
    return j;
}

inline nlohmann::json timings_json(const std::vector<level_result>& rows)
{
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& r : rows)
        levels.push_back({{"p", r.p},
                          {"level", r.level},
                          {"setup_seconds", r.setup_seconds},
                          {"solve_seconds", r.solve_seconds},
                          {"node_factor_seconds", r.node_factor_seconds},
                          {"node_solve_seconds", r.node_solve_seconds}});
    return {{"levels", levels}};
}

/// Sweeps p and levels 0..refinements, then writes the CSV, metadata and
/// timings files into c.out_dir.
inline study_report run_study(const study_config& c)
{
    validate(c);
    study_report report;
    report.hash = config_hash(c);
    for (int p : c.p)
        for (int level = 0; level <= c.refinements; ++level)
            report.levels.push_back(solve_level(c, p, level));

    const std::filesystem::path dir(c.out_dir);
    std::filesystem::create_directories(dir);
    report.csv_path = dir / c.csv_name;
    report.metadata_path = dir / c.metadata_name;
    report.timings_path = dir / c.timings_name;

    std::ofstream csv(report.csv_path, std::ios::binary);
    if (c.domain == domain_kind::disc_fiber)
        write_fiber_csv(csv, report.levels, report.hash);
    else
        write_square_csv(csv, report.levels, report.hash);
    std::ofstream(report.metadata_path, std::ios::binary) << metadata_json(c, report.levels).dump(2) << '\n';
    std::ofstream(report.timings_path, std::ios::binary) << timings_json(report.levels).dump(2) << '\n';
    if (!csv)
        throw error("cannot write " + report.csv_path.string());
    return report;
}

} // namespace dpgfeast
