#pragma once

// The five gm commands. Each produces a JSON report, a set of CSV fields
// and an exit code: 0 all checks passed, 1 configuration error, 2 solver
// failure, 3 a checked property failed.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "gm/degree.hpp"
#include "gm/grid.hpp"
#include "gm/linear.hpp"
#include "gm/model.hpp"
#include "gm/nodal_solver.hpp"
#include "gm/sign_solver.hpp"
#include "gm/subsup.hpp"
#include "gm_config.hpp"

namespace gm::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kConfigError = 1, kSolverFailure = 2, kPropertyFailed = 3 };

struct CommandResult {
    json report;
    std::vector<std::pair<std::string, Field>> fields;
    int exit_code = kOk;
};

namespace detail {

inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json grid_json(const Grid& g) {
    json j;
    j["dim"] = g.dim();
    j["extents"] = g.dim() == 1 ? json::array({g.extent(0)}) : json::array({g.extent(0), g.extent(1)});
    j["nodes"] = g.dim() == 1 ? json::array({g.nodes(0)}) : json::array({g.nodes(0), g.nodes(1)});
    return j;
}

inline json params_json(const ProblemParams& p) {
    return json{{"alpha1", p.alpha1}, {"alpha2", p.alpha2}, {"beta1", p.beta1},
                {"beta2", p.beta2},   {"rho", p.rho},       {"scale1", p.scale1},
                {"scale2", p.scale2}, {"alpha_condition", p.alpha_condition()}};
}

inline json field_summary(const Field& f) {
    return json{{"min", f.min()}, {"max", f.max()}, {"sup_norm", f.sup_norm()}};
}

inline json certificate_json(const CertifiedRectangles& cr, double lower_bound) {
    json checks = json::array();
    for (const auto& c : cr.certificate.checks) {
        checks.push_back({{"id", c.id}, {"passed", c.passed}, {"worst_node", c.worst_node}, {"margin", number(c.margin)}});
    }
    return json{{"C", cr.constants.C},
                {"c0", cr.constants.c0},
                {"C_lower_bound", lower_bound},
                {"doublings", cr.doublings},
                {"checks", checks},
                {"failed", cr.certificate.failed_ids()},
                {"passed", cr.certificate.passed()},
                {"proof_side_condition", cr.certificate.proof_side_condition},
                {"proof_side_condition_holds", cr.certificate.proof_side_condition_holds}};
}

inline json solution_json(const Solution& s) {
    return json{{"converged", s.converged},  {"iterations", s.iterations},     {"residual", number(s.residual())},
                {"u", field_summary(s.u)},   {"v", field_summary(s.v)}};
}

inline json estimate_json(const DegreeEstimate& e) {
    json zeros = json::array();
    for (const auto& z : e.zeros) {
        zeros.push_back({{"x", std::vector<double>(z.x.data(), z.x.data() + z.x.size())},
                         {"determinant", z.determinant},
                         {"regular", z.regular},
                         {"residual", z.residual}});
    }
    return json{{"admissible", true},           {"value", e.value},
                {"zeros", zeros},               {"starts", e.starts},
                {"converged", e.converged},     {"irregular", e.irregular},
                {"boundary_margin", e.boundary_margin}, {"note", e.note},
                {"kind", "estimate"}};
}

struct Setup {
    Grid grid;
    NeumannOperator op;
    EigenPair eig;
};

inline Setup setup(const Grid& g, const RunConfig& cfg) {
    NeumannOperator op = assemble_neumann_operator(g);
    EigenPair eig = principal_eigenpair(op, cfg.eig_tol);
    spdlog::debug("eigenpair: lambda1 = {:.17g} after {} iterations", eig.lambda1, eig.iterations);
    return {g, std::move(op), std::move(eig)};
}

inline CertifiedRectangles certified(const Setup& s, const RunConfig& cfg) {
    if (cfg.C) {
        return certify_with_constants(s.op, s.eig, cfg.params, Constants{*cfg.C, cfg.c0.value_or(2.0)}, cfg.linear_tol);
    }
    return certify_with_doubling(s.op, s.eig, cfg.params, cfg.max_doublings, std::nullopt, cfg.c0, cfg.linear_tol);
}

inline Field cosine_profile(const Grid& g) {
    return Field::from_function(g, [&](double x, double y) {
        const double cx = std::cos(std::numbers::pi * x / g.extent(0));
        return g.dim() == 2 ? cx * std::cos(std::numbers::pi * y / g.extent(1)) : cx;
    });
}

}  // namespace detail

inline CommandResult cmd_eigen(const RunConfig& cfg) {
    const detail::Setup s = detail::setup(cfg.grid(), cfg);
    CommandResult r;
    r.report["command"] = "eigen";
    r.report["grid"] = detail::grid_json(s.grid);
    r.report["lambda1"] = s.eig.lambda1;
    r.report["mu_bar"] = s.eig.mu_bar();
    r.report["mu_underbar"] = s.eig.mu_underbar();
    r.report["phi1_relative_deviation"] = (s.eig.mu_bar() - s.eig.mu_underbar()) / s.eig.mu_bar();
    r.report["residual"] = s.eig.residual;
    r.report["iterations"] = s.eig.iterations;
    r.fields.emplace_back("phi1", s.eig.phi1);
    return r;
}

inline CommandResult cmd_certify(const RunConfig& cfg) {
    const detail::Setup s = detail::setup(cfg.grid(), cfg);
    CommandResult r;
    r.report["command"] = "certify";
    r.report["grid"] = detail::grid_json(s.grid);
    r.report["params"] = detail::params_json(cfg.params);
    const double bound = constant_lower_bound(cfg.params, s.eig.lambda1, s.eig.mu_bar());
    try {
        const CertifiedRectangles cr = detail::certified(s, cfg);
        r.report["certificate"] = detail::certificate_json(cr, bound);
        r.fields.emplace_back("w", cr.aux.w);
        r.fields.emplace_back("y", cr.aux.y);
        r.fields.emplace_back("z", cr.aux.z);
        if (!cr.certificate.passed()) r.exit_code = kPropertyFailed;
    } catch (const EnvelopeError& e) {
        r.report["certificate"] = {{"passed", false},
                                   {"envelope_failure", {{"inequality", e.inequality()}, {"node", e.node()}, {"margin", e.margin()}}}};
        r.exit_code = kPropertyFailed;
    }
    return r;
}

inline CommandResult cmd_solve_sign(const RunConfig& cfg) {
    const detail::Setup s = detail::setup(cfg.grid(), cfg);
    const ProblemParams& p = cfg.params;
    CommandResult r;
    r.report["command"] = "solve-sign";
    r.report["grid"] = detail::grid_json(s.grid);
    r.report["params"] = detail::params_json(p);
    const CertifiedRectangles cr = detail::certified(s, cfg);
    r.report["certificate"] =
        detail::certificate_json(cr, constant_lower_bound(p, s.eig.lambda1, s.eig.mu_bar()));
    if (!cr.certificate.passed()) {
        r.exit_code = kPropertyFailed;
        return r;
    }

    SignSolveOptions opts{cfg.tol, cfg.max_iter, cfg.relaxation, true, cfg.linear_tol};
    const Solution pos = solve_positive(s.op, p, cr.rectangles.positive, opts);
    const Solution neg = negate(pos);
    const double neg_residual = residual(s.op, p, neg.u, neg.v).norm();

    auto side = [&](const Solution& sol, const RectanglePair& rect, int sign, double res) {
        const SeparationReport su = check_separation(sol.u, cr.aux.z, sign);
        const SeparationReport sv = check_separation(sol.v, cr.aux.z, sign);
        const ContainmentReport c = check_containment(sol, rect, 1e-12);
        json j = detail::solution_json(sol);
        j["residual"] = detail::number(res);
        j["separation_u"] = {{"margin", su.margin}, {"worst_node", su.worst_node}, {"passed", su.passed}};
        j["separation_v"] = {{"margin", sv.margin}, {"worst_node", sv.worst_node}, {"passed", sv.passed}};
        j["in_rectangle"] = c.in_rectangle;
        j["in_zero_to_upper"] = c.in_zero_to_upper;
        return std::pair{j, su.passed && sv.passed};
    };
    auto [jp, ok_p] = side(pos, cr.rectangles.positive, +1, pos.residual());
    auto [jn, ok_n] = side(neg, cr.rectangles.negative, -1, neg_residual);
    r.report["positive"] = jp;
    r.report["negative"] = jn;
    r.fields.emplace_back("u_plus", pos.u);
    r.fields.emplace_back("v_plus", pos.v);
    r.fields.emplace_back("u_minus", neg.u);
    r.fields.emplace_back("v_minus", neg.v);
    if (!pos.converged) {
        r.exit_code = kSolverFailure;
    } else if (!(ok_p && ok_n)) {
        r.exit_code = kPropertyFailed;
    }
    return r;
}

inline CommandResult cmd_solve_nodal(const RunConfig& cfg) {
    const ProblemParams& p = cfg.params;
    if (p.beta1 != 0.0) throw ConfigError("solve-nodal requires beta1 = 0");
    const detail::Setup s = detail::setup(cfg.grid(), cfg);
    CommandResult r;
    r.report["command"] = "solve-nodal";
    r.report["grid"] = detail::grid_json(s.grid);
    r.report["params"] = detail::params_json(p);
    const CertifiedRectangles cr = detail::certified(s, cfg);
    r.report["certificate"] =
        detail::certificate_json(cr, constant_lower_bound(p, s.eig.lambda1, s.eig.mu_bar()));
    if (!cr.certificate.passed()) {
        r.exit_code = kPropertyFailed;
        return r;
    }

    const NodalRegion region{cr.aux.z, cr.aux.z, cr.constants.C * cr.aux.y.sup_norm(), p.rho};
    const ContinuationSchedule schedule{cfg.epsilons, cfg.nodal_tol, true};
    RegularizedOptions ropts;
    ropts.tol = cfg.nodal_tol;
    ropts.linear_tol = cfg.linear_tol;

    std::optional<FieldPair> start;
    std::optional<FieldPair> target;
    bool opposite_sign_found = false;
    if (cfg.manufactured) {
        Field u_star = 0.5 * detail::cosine_profile(s.grid);
        for (std::size_t k = 0; k < u_star.size(); ++k) u_star[k] *= cr.aux.z[k];
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        Field su = u_star, sv = u_star;
        for (std::size_t k = 0; k < su.size(); ++k) su[k] *= 1.0 + 0.1 * unit(rng);
        for (std::size_t k = 0; k < sv.size(); ++k) sv[k] *= 1.0 + 0.1 * unit(rng);
        target = FieldPair{u_star, u_star};
        start = FieldPair{su, sv};
        r.report["mode"] = "manufactured";
    } else {
        r.report["mode"] = "multistart";
        const auto seeds = multistart_seeds(region, cfg.nodal_seeds, cfg.seed);
        const auto found = multistart(s.op, p, region, schedule.epsilons.front(), seeds, ropts);
        json table = json::array();
        for (const auto& c : found) {
            const SynchronyReport rep = sign_synchrony_report(c.result.solution.u, c.result.solution.v);
            if (rep.min_product < -1e-8) opposite_sign_found = true;
            table.push_back({{"seed", c.seed_id},
                             {"class", to_string(c.kind)},
                             {"residual", c.result.solution.residual()},
                             {"min_uv", rep.min_product},
                             {"u", detail::field_summary(c.result.solution.u)},
                             {"v", detail::field_summary(c.result.solution.v)}});
            if (!start && c.kind == SolutionClass::NodalSynchronized) {
                start = FieldPair{c.result.solution.u, c.result.solution.v};
            }
        }
        r.report["multistart"] = {{"epsilon", schedule.epsilons.front()}, {"seeds", seeds.size()}, {"solutions", table}};
    }
    if (!start) {
        r.report["nodal_branch"] = "no nodal branch found";
        r.exit_code = kPropertyFailed;
        return r;
    }

    const NodalCandidate cand = continuation(s.op, p, region, schedule, *start, ropts, target);
    json steps = json::array();
    for (const auto& st : cand.steps) {
        steps.push_back({{"epsilon", st.epsilon},
                         {"residual", detail::number(st.residual)},
                         {"iterations", st.iterations},
                         {"converged", st.converged},
                         {"distance_to_previous", detail::number(st.distance_to_previous)},
                         {"min_denominator", st.min_denominator},
                         {"in_ball", st.in_ball},
                         {"retries", st.retries}});
    }
    const SynchronyReport rep = sign_synchrony_report(cand.u_star, cand.v_star);
    json cj{{"complete", cand.complete}, {"failed_epsilon", cand.failed_epsilon ? json(*cand.failed_epsilon) : json(nullptr)},
            {"steps", steps}};
    if (target) {
        cj["recovery_error"] = std::max(sup_distance(cand.u_star, target->u), sup_distance(cand.v_star, target->v));
    }
    r.report["candidate"] = cj;
    r.report["sign_synchrony"] = {{"min_uv", rep.min_product},
                                  {"fraction_u_positive", rep.fraction_u_positive},
                                  {"sup_u", rep.sup_u},
                                  {"sup_v", rep.sup_v},
                                  {"u_changes_sign", rep.u_changes_sign},
                                  {"v_changes_sign", rep.v_changes_sign},
                                  {"nodal", rep.nodal()},
                                  {"passed", rep.passed}};
    if (cand.complete && !target) {
        const double eps = schedule.epsilons.back();
        r.report["singular_mass"] = {{"epsilon", eps},
                                     {"mu", cfg.mu},
                                     {"values", singular_mass_diagnostic(p, eps, cand.u_star, cand.v_star, cfg.mu)}};
    }
    r.fields.emplace_back("u_star", cand.u_star);
    r.fields.emplace_back("v_star", cand.v_star);
    if (!cand.complete) {
        r.exit_code = kSolverFailure;
    } else if (!rep.passed || !rep.nodal() || opposite_sign_found) {
        r.exit_code = kPropertyFailed;
    }
    return r;
}

inline CommandResult cmd_degree(const RunConfig& cfg) {
    const ProblemParams& p = cfg.params;
    if (p.beta1 != 0.0) throw ConfigError("degree requires beta1 = 0");
    const Grid g = cfg.dim == 1 ? build_grid_1d(cfg.length_x, cfg.degree_nodes)
                                : build_grid_2d(cfg.length_x, cfg.length_y, cfg.degree_nodes, cfg.degree_nodes);
    if (2 * g.size() > kMaxDegreeUnknowns) {
        throw ConfigError("degree.nodes gives " + std::to_string(2 * g.size()) + " unknowns; the limit is " +
                          std::to_string(kMaxDegreeUnknowns));
    }
    try {
        check_epsilon(cfg.degree_epsilon);
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    const detail::Setup s = detail::setup(g, cfg);
    CommandResult r;
    r.report["command"] = "degree";
    r.report["grid"] = detail::grid_json(g);
    r.report["params"] = detail::params_json(p);

    const NoSolutionWitness w = check_no_solution_t0(s.op);
    r.report["no_solution_t0"] = w.no_solution;
    r.report["no_solution_witness"] = {{"magnitude", w.magnitude}, {"nodes", w.nodes}, {"identity_defect", w.identity_defect}};

    const CertifiedRectangles cr = certify_with_doubling(s.op, s.eig, p, cfg.max_doublings, std::nullopt, cfg.c0, cfg.linear_tol);
    const double eps = cfg.degree_epsilon;
    const Field upper = cr.constants.C * cr.aux.y;
    TruncationEnv env{eps, upper, upper, s.eig.phi1, 1.0};
    const NodalRegion nodal{cr.aux.z, cr.aux.z, cr.constants.C * cr.aux.y.sup_norm(), p.rho};
    const double radius = nodal.radius(eps);
    const auto d = static_cast<Eigen::Index>(2 * g.size());
    const Region outer = Region::symmetric(d, radius);
    Region annulus = outer;
    annulus.hole_lower = -stack(cr.aux.z, cr.aux.z);
    annulus.hole_upper = stack(cr.aux.z, cr.aux.z);
    r.report["epsilon"] = eps;
    r.report["radius"] = radius;

    DegreeOptions dopts;
    dopts.n_starts = cfg.degree_starts;
    dopts.rng_seed = cfg.seed;
    dopts.tol = cfg.degree_tol;

    std::vector<double> t_grid;
    for (std::size_t i = 0; i < cfg.t_steps; ++i) t_grid.push_back(static_cast<double>(i) / static_cast<double>(cfg.t_steps - 1));

    auto family_json = [&](MapKind kind, const Region& region, const std::vector<Eigen::VectorXd>& extra) {
        const CompactMap base = make_compact_map(s.op, kind, p, env, s.eig.lambda1, 0.0);
        const SweepTrace trace =
            homotopy_sweep([&](double t) { return as_vector_map(base.at(t)); }, t_grid, region, dopts.boundary_per_face, cfg.seed);
        json j{{"kind", to_string(kind)}, {"t", trace.t}, {"margins", trace.margin}, {"min_margin", trace.min_margin}};
        for (double t : {0.0, 1.0}) {
            const std::string key = t == 0.0 ? "t0" : "t1";
            try {
                j[key] = detail::estimate_json(estimate_degree(as_vector_map(base.at(t)), region, dopts, extra));
            } catch (const AdmissibilityError& e) {
                j[key] = {{"admissible", false}, {"boundary_margin", e.margin()}, {"note", e.what()}};
            }
        }
        return j;
    };
    const json h = family_json(MapKind::H, outer, {});
    const json n = family_json(MapKind::N, annulus, {stack(s.eig.phi1, s.eig.phi1)});
    r.report["H"] = h;
    r.report["N"] = n;

    const bool h0_ok = h["t0"]["admissible"].get<bool>() && h["t0"]["value"].get<int>() == 0 && h["t0"]["zeros"].empty();
    bool n_ok = true;
    for (const char* key : {"t0", "t1"}) {
        if (n[key]["admissible"].get<bool>() && n[key]["value"].get<int>() == 0) n_ok = false;
    }
    if (!w.no_solution || !h0_ok || !n_ok) r.exit_code = kPropertyFailed;
    return r;
}

inline CommandResult run(const std::string& command, const RunConfig& cfg) {
    if (command == "eigen") return cmd_eigen(cfg);
    if (command == "certify") return cmd_certify(cfg);
    if (command == "solve-sign") return cmd_solve_sign(cfg);
    if (command == "solve-nodal") return cmd_solve_nodal(cfg);
    if (command == "degree") return cmd_degree(cfg);
    throw ConfigError("unknown command " + command);
}

/// Writes report.json and one CSV per field into `dir`.
inline void write_outputs(const CommandResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "report.json");
        out << r.report.dump(2) << '\n';
    }
    for (const auto& [name, field] : r.fields) {
        std::ofstream out(dir / (name + ".csv"));
        write_csv(out, field);
    }
}

/// Loads, runs and writes; maps exceptions to exit codes. Writes a report
/// with an "error" entry on failure when possible.
inline int execute(const std::string& command, const std::string& config_path, const std::filesystem::path& out_dir) {
    RunConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kConfigError;
    }
    CommandResult result;
    try {
        result = run(command, cfg);
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kConfigError;
    } catch (const InvalidArgument& e) {
        spdlog::error("{}", e.what());
        return kConfigError;
    } catch (const Error& e) {
        spdlog::error("solver failure: {}", e.what());
        result.report = {{"command", command}, {"error", e.what()}};
        result.exit_code = kSolverFailure;
    }
    write_outputs(result, out_dir);
    spdlog::info("{}: exit code {}", command, result.exit_code);
    return result.exit_code;
}

}  // namespace gm::cli
