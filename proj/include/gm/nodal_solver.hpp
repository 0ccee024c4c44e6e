#pragma once

// Regularized solves inside the thin region between the positive and
// negative rectangles, continuation in epsilon, and the sign diagnostics of
// the resulting candidate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gm/grid.hpp"
#include "gm/linear.hpp"
#include "gm/model.hpp"
#include "gm/newton.hpp"
#include "gm/sign_solver.hpp"

namespace gm {

struct ContinuationSchedule {
    std::vector<double> epsilons;
    double tol = 1e-10;
    bool warm_start = true;

    /// first, first/2, ..., `steps` values.
    static ContinuationSchedule halving(double first = 0.5, std::size_t steps = 6) {
        ContinuationSchedule s;
        for (std::size_t i = 0; i < steps; ++i) s.epsilons.push_back(first / std::pow(2.0, static_cast<double>(i)));
        return s;
    }

    void validate() const {
        if (epsilons.empty()) throw InvalidArgument("continuation schedule is empty");
        for (std::size_t i = 0; i < epsilons.size(); ++i) {
            check_epsilon(epsilons[i]);
            if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
                throw InvalidArgument("continuation schedule must be strictly decreasing");
            }
        }
        if (!(tol > 0.0)) throw InvalidArgument("continuation tolerance must be positive");
    }
};

/// The set M_R: |u| <= u_bound, |v| <= v_bound nodewise, plus an L2 ball whose
/// radius 2 (3 eps / 2 + C ||y||_inf + rho + 1) dominates every truncated right-hand side.
struct NodalRegion {
    Field u_bound;
    Field v_bound;
    double c_y_sup = 0.0;  // C ||y||_inf
    double rho = 1.0;

    double radius(double epsilon) const { return 2.0 * (1.5 * epsilon + c_y_sup + rho + 1.0); }

    bool contains(const Field& u, const Field& v, double slack = 0.0) const {
        for (std::size_t k = 0; k < u.size(); ++k) {
            if (std::abs(u[k]) > u_bound[k] + slack || std::abs(v[k]) > v_bound[k] + slack) return false;
        }
        return true;
    }

    void project(Eigen::VectorXd& x) const {
        const auto n = static_cast<Eigen::Index>(u_bound.size());
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto i = static_cast<std::size_t>(k);
            x[k] = clamp_sym(x[k], u_bound[i]);
            x[n + k] = clamp_sym(x[n + k], v_bound[i]);
        }
    }
};

/// L2 norm of the pair, ||u||_2 + ||v||_2 under the trapezoid rule.
inline double pair_l2_norm(const Field& u, const Field& v) {
    const double a = integrate(u.map([](double s) { return s * s; }));
    const double b = integrate(v.map([](double s) { return s * s; }));
    return std::sqrt(a + b);
}

struct RegularizedOptions {
    double tol = 1e-10;
    std::size_t max_newton = 60;
    std::size_t picard_sweeps = 40;
    std::size_t rounds = 3;  // Newton / Picard alternations
    std::size_t max_sign_refresh = 20;
    double linear_tol = 1e-10;
};

struct RegularizedSolution {
    Solution solution;
    double epsilon = 0.0;
    double min_denominator = std::numeric_limits<double>::infinity();  // over every evaluated iterate
    double l2_norm = 0.0;
    bool in_ball = false;
};

namespace detail {

// Regularized right-hand sides with the sign factors frozen to (su, sv), and
// their diagonal derivatives. Agrees with rhs_Peps wherever sgn(u) = su and sgn(v) = sv.
struct FrozenSigns {
    Eigen::VectorXd su, sv;

    static FrozenSigns of(const Eigen::VectorXd& x, Eigen::Index n) {
        auto sg = [](double s) { return sgn(s); };
        return {x.head(n).unaryExpr(sg), x.tail(n).unaryExpr(sg)};
    }
    bool operator==(const FrozenSigns&) const = default;
};

inline void frozen_rhs(const ProblemParams& p, double epsilon, const FrozenSigns& s, const Eigen::VectorXd& x,
                       Eigen::VectorXd& g1, Eigen::VectorXd& g2, RhsDerivatives* d) {
    const Eigen::Index n = s.su.size();
    g1.resize(n);
    g2.resize(n);
    if (d) *d = {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        const double u = x[k], v = x[n + k];
        const double au = std::abs(u);
        const double shifted = v + epsilon * (0.5 + s.sv[k]);
        const double den = std::max(std::abs(shifted), 0.5 * epsilon);
        const double pw1 = std::pow(au, p.alpha1), pw2 = std::pow(au, p.alpha2), dn = std::pow(den, p.beta2);
        g1[k] = p.scale1 * s.sv[k] * (pw1 + p.rho);
        g2[k] = p.scale2 * s.su[k] * pw2 / dn;
        if (d) {
            const double af = std::max(au, 1e-14);
            d->g1_u[k] = p.scale1 * s.sv[k] * p.alpha1 * std::pow(af, p.alpha1 - 1.0) * sgn(u);
            d->g2_u[k] = p.scale2 * s.su[k] * p.alpha2 * std::pow(af, p.alpha2 - 1.0) * sgn(u) / dn;
            if (p.beta2 != 0.0 && std::abs(shifted) > 0.5 * epsilon) {
                d->g2_v[k] = -p.scale2 * s.su[k] * pw2 * p.beta2 * sgn(shifted) / (dn * den);
            }
        }
    }
}

}  // namespace detail

/// Solves A u = g1_eps + c1, A v = g2_eps + c2 inside the region (forcing c optional).
///
/// Damped Newton runs on the system with the sign factors frozen to the
/// pattern of the current iterate; the pattern is refreshed until it is
/// self-consistent. Projected Picard sweeps serve as fallback between rounds.
/// Convergence is judged on the true regularized residual.
inline RegularizedSolution solve_regularized(const NeumannOperator& op, const ProblemParams& p,
                                             const NodalRegion& region, double epsilon, const FieldPair& seed,
                                             const RegularizedOptions& opts = {},
                                             const FieldPair* forcing = nullptr) {
    p.validate();
    p.require_beta1_zero();
    check_epsilon(epsilon);
    if (!region.contains(seed.u, seed.v, 1e-12)) throw InvalidArgument("seed lies outside the region");

    const Grid& g = op.grid();
    const auto n = static_cast<Eigen::Index>(g.size());
    const Eigen::MatrixXd a = op.dense();
    double min_den = std::numeric_limits<double>::infinity();
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(n), c2 = Eigen::VectorXd::Zero(n);
    if (forcing) {
        c1 = forcing->u.values();
        c2 = forcing->v.values();
    }

    auto track = [&](const Eigen::VectorXd& x) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double v = x[n + k];
            const double d = std::abs(v + gamma_eps(epsilon, v));
            min_den = std::min(min_den, d);
            if (d < 0.5 * epsilon * (1.0 - 1e-12)) {
                throw std::logic_error("regularized denominator fell below epsilon/2");
            }
        }
    };
    auto true_residual = [&](const Eigen::VectorXd& x) {
        auto [u, v] = unstack(g, x);
        return residual_regularized(op, p, epsilon, u, v, forcing);
    };
    auto project = [&](Eigen::VectorXd& x) { region.project(x); };

    Eigen::VectorXd x = stack(seed.u, seed.v);
    region.project(x);
    std::vector<double> history;
    std::size_t iterations = 0;
    NewtonOptions nopts{opts.tol, opts.max_newton};
    bool converged = false;
    for (std::size_t round = 0; round < opts.rounds && !converged; ++round) {
        detail::FrozenSigns signs = detail::FrozenSigns::of(x, n);
        for (std::size_t refresh = 0; refresh < opts.max_sign_refresh; ++refresh) {
            VectorMap f = [&](const Eigen::VectorXd& y) {
                track(y);
                Eigen::VectorXd g1, g2;
                detail::frozen_rhs(p, epsilon, signs, y, g1, g2, nullptr);
                Eigen::VectorXd r(2 * n);
                r << op.apply(Eigen::VectorXd(y.head(n))) - g1 - c1, op.apply(Eigen::VectorXd(y.tail(n))) - g2 - c2;
                return r;
            };
            MatrixMap jac = [&](const Eigen::VectorXd& y) {
                Eigen::VectorXd g1, g2;
                RhsDerivatives d;
                detail::frozen_rhs(p, epsilon, signs, y, g1, g2, &d);
                return coupled_jacobian(a, d);
            };
            NewtonResult nr = damped_newton(f, jac, x, nopts, project);
            iterations += nr.iterations;
            x = nr.x;
            const double r = true_residual(x).norm();
            history.push_back(r);
            if (r <= opts.tol) {
                converged = true;
                break;
            }
            detail::FrozenSigns next = detail::FrozenSigns::of(x, n);
            if (next == signs) break;
            signs = std::move(next);
        }
        if (converged || round + 1 == opts.rounds) break;

        // Picard fallback: Gauss-Seidel sweeps through A^-1, projected.
        for (std::size_t s = 0; s < opts.picard_sweeps; ++s) {
            auto [u, v] = unstack(g, x);
            track(x);
            Field rhs_u = rhs_Peps(p, epsilon, u, v).u;
            if (forcing) rhs_u += forcing->u;
            u = solve_linear(op, rhs_u, opts.linear_tol);
            Field rhs_v = rhs_Peps(p, epsilon, u, v).v;
            if (forcing) rhs_v += forcing->v;
            v = solve_linear(op, rhs_v, opts.linear_tol);
            x = stack(u, v);
            region.project(x);
            ++iterations;
        }
    }

    track(x);
    auto [u, v] = unstack(g, x);
    Residual r = residual_regularized(op, p, epsilon, u, v, forcing);
    history.push_back(r.norm());
    RegularizedSolution out{detail::finish(u, v, r, iterations, r.norm() <= opts.tol, std::move(history)),
                            epsilon, min_den, pair_l2_norm(u, v), false};
    out.in_ball = out.l2_norm <= region.radius(epsilon);
    return out;
}

struct ContinuationStep {
    double epsilon = 0.0;
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double distance_to_previous = std::numeric_limits<double>::quiet_NaN();  // sup norm over (u, v)
    double min_denominator = 0.0;
    bool in_ball = false;
    std::size_t retries = 0;
};

struct NodalCandidate {
    Field u_star;
    Field v_star;
    std::vector<ContinuationStep> steps;
    bool complete = false;
    std::optional<double> failed_epsilon;
};

/// Warm-started chain of regularized solves along the schedule. With a
/// manufactured target, the forcing is recomputed at every epsilon so that the
/// target solves each regularized problem exactly.
inline NodalCandidate continuation(const NeumannOperator& op, const ProblemParams& p, const NodalRegion& region,
                                   const ContinuationSchedule& schedule, const FieldPair& seed,
                                   RegularizedOptions opts = {},
                                   const std::optional<FieldPair>& manufactured = std::nullopt) {
    schedule.validate();
    opts.tol = schedule.tol;
    NodalCandidate cand{seed.u, seed.v, {}, false, std::nullopt};
    std::vector<FieldPair> converged_history;  // most recent last
    FieldPair current = seed;

    for (double eps : schedule.epsilons) {
        std::optional<FieldPair> forcing;
        if (manufactured) forcing = manufacture_regularized(op, p, eps, manufactured->u, manufactured->v);
        const FieldPair* fptr = forcing ? &*forcing : nullptr;

        const FieldPair start = schedule.warm_start ? current : seed;
        RegularizedSolution rs = solve_regularized(op, p, region, eps, start, opts, fptr);
        std::size_t retries = 0;
        if (!rs.solution.converged) {
            // Retry from up to three earlier converged states.
            for (auto it = converged_history.rbegin(); it != converged_history.rend() && retries < 3; ++it) {
                ++retries;
                RegularizedSolution again = solve_regularized(op, p, region, eps, *it, opts, fptr);
                if (again.solution.converged) {
                    rs = std::move(again);
                    break;
                }
            }
        }

        ContinuationStep step;
        step.epsilon = eps;
        step.residual = rs.solution.residual();
        step.iterations = rs.solution.iterations;
        step.converged = rs.solution.converged;
        step.min_denominator = rs.min_denominator;
        step.in_ball = rs.in_ball;
        step.retries = retries;
        if (!converged_history.empty()) {
            const FieldPair& prev = converged_history.back();
            step.distance_to_previous =
                std::max(sup_distance(prev.u, rs.solution.u), sup_distance(prev.v, rs.solution.v));
        }
        cand.steps.push_back(step);
        if (!rs.solution.converged) {
            cand.failed_epsilon = eps;
            cand.u_star = rs.solution.u;
            cand.v_star = rs.solution.v;
            return cand;
        }
        current = {rs.solution.u, rs.solution.v};
        converged_history.push_back(current);
    }
    cand.u_star = current.u;
    cand.v_star = current.v;
    cand.complete = true;
    return cand;
}

struct SynchronyReport {
    double min_product = 0.0;      // min over nodes of u v
    double fraction_u_positive = 0.0;
    double sup_u = 0.0;
    double sup_v = 0.0;
    bool u_changes_sign = false;
    bool v_changes_sign = false;
    bool synchronized = false;     // min(u v) >= -tol
    bool nontrivial = false;       // both sup norms > tol
    bool passed = false;           // synchronized && nontrivial

    bool nodal() const { return u_changes_sign && v_changes_sign; }
};

/// A component "changes sign" when it takes values below -10 tol and above +10 tol.
inline SynchronyReport sign_synchrony_report(const Field& u, const Field& v, double tol = 1e-8) {
    detail::check_same_grid(u, v);
    SynchronyReport r;
    r.min_product = std::numeric_limits<double>::infinity();
    std::size_t positive = 0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        r.min_product = std::min(r.min_product, u[k] * v[k]);
        if (u[k] > 0.0) ++positive;
    }
    r.fraction_u_positive = static_cast<double>(positive) / static_cast<double>(u.size());
    r.sup_u = u.sup_norm();
    r.sup_v = v.sup_norm();
    const double band = 10.0 * tol;
    r.u_changes_sign = u.min() < -band && u.max() > band;
    r.v_changes_sign = v.min() < -band && v.max() > band;
    r.synchronized = r.min_product >= -tol;
    r.nontrivial = r.sup_u > tol && r.sup_v > tol;
    r.passed = r.synchronized && r.nontrivial;
    return r;
}

/// For each mu, the trapezoid integral of |g2_eps| over the nodes where |v| <= mu.
inline std::vector<double> singular_mass_diagnostic(const ProblemParams& p, double epsilon, const Field& u,
                                                    const Field& v, const std::vector<double>& mu_list) {
    const Field g2 = rhs_Peps(p, epsilon, u, v).v;
    const Grid& g = u.grid();
    std::vector<double> out;
    out.reserve(mu_list.size());
    for (double mu : mu_list) {
        if (!(mu > 0.0)) throw InvalidArgument("mu must be positive");
        double s = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (std::abs(v[k]) <= mu) s += g.weight(k) * std::abs(g2[k]);
        }
        out.push_back(s);
    }
    return out;
}

enum class SolutionClass { Positive, Negative, NodalSynchronized, Other };

inline const char* to_string(SolutionClass c) {
    switch (c) {
        case SolutionClass::Positive: return "positive";
        case SolutionClass::Negative: return "negative";
        case SolutionClass::NodalSynchronized: return "nodal_synchronized";
        case SolutionClass::Other: return "other";
    }
    return "other";
}

inline SolutionClass classify(const Field& u, const Field& v, double tol = 1e-8) {
    if (u.min() > 0.0 && v.min() > 0.0) return SolutionClass::Positive;
    if (u.max() < 0.0 && v.max() < 0.0) return SolutionClass::Negative;
    const SynchronyReport r = sign_synchrony_report(u, v, tol);
    if (r.passed && r.nodal()) return SolutionClass::NodalSynchronized;
    return SolutionClass::Other;
}

/// Deterministic seeds inside the region: signed cosine modes with u = v and
/// u = -v, scaled to half the bounds, followed by uniform random fields.
inline std::vector<FieldPair> multistart_seeds(const NodalRegion& region, std::size_t count, std::uint64_t rng_seed) {
    const Grid& g = region.u_bound.grid();
    std::vector<std::array<int, 2>> modes;
    if (g.dim() == 1) {
        modes = {{1, 0}, {2, 0}, {3, 0}, {4, 0}};
    } else {
        modes = {{1, 0}, {0, 1}, {1, 1}, {2, 0}};
    }
    auto mode_field = [&](std::array<int, 2> m, const Field& bound, double amp) {
        Field f = Field::from_function(g, [&](double x, double y) {
            const double cx = std::cos(m[0] * std::numbers::pi * x / g.extent(0));
            const double cy = g.dim() == 2 ? std::cos(m[1] * std::numbers::pi * y / g.extent(1)) : 1.0;
            return amp * cx * cy;
        });
        for (std::size_t k = 0; k < f.size(); ++k) f[k] *= bound[k];
        return f;
    };
    std::vector<FieldPair> seeds;
    for (auto m : modes) {
        for (double s : {0.5, -0.5}) {
            if (seeds.size() < count) seeds.push_back({mode_field(m, region.u_bound, s), mode_field(m, region.v_bound, s)});
        }
    }
    for (std::size_t i = 0; i < 2 && i < modes.size(); ++i) {
        if (seeds.size() < count) {
            seeds.push_back({mode_field(modes[i], region.u_bound, 0.5), mode_field(modes[i], region.v_bound, -0.5)});
        }
    }
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    while (seeds.size() < count) {
        Field u(g), v(g);
        for (std::size_t k = 0; k < g.size(); ++k) u[k] = unit(rng) * region.u_bound[k];
        for (std::size_t k = 0; k < g.size(); ++k) v[k] = unit(rng) * region.v_bound[k];
        seeds.push_back({std::move(u), std::move(v)});
    }
    return seeds;
}

struct ClassifiedSolution {
    std::size_t seed_id = 0;
    SolutionClass kind = SolutionClass::Other;
    RegularizedSolution result;
};

/// Runs every seed (in parallel), keeps the converged ones, drops duplicates
/// (sup distance <= dedup_tol, lowest seed id wins) and classifies the rest.
inline std::vector<ClassifiedSolution> multistart(const NeumannOperator& op, const ProblemParams& p,
                                                  const NodalRegion& region, double epsilon,
                                                  const std::vector<FieldPair>& seeds,
                                                  const RegularizedOptions& opts = {}, double dedup_tol = 1e-6,
                                                  unsigned threads = 0) {
    std::vector<std::optional<RegularizedSolution>> results(seeds.size());
    auto work = [&](std::size_t i) { results[i] = solve_regularized(op, p, region, epsilon, seeds[i], opts); };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    if (threads <= 1 || seeds.size() <= 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = t; i < seeds.size(); i += threads) work(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<ClassifiedSolution> out;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const RegularizedSolution& r = *results[i];
        if (!r.solution.converged) continue;
        const bool duplicate = std::any_of(out.begin(), out.end(), [&](const ClassifiedSolution& c) {
            return std::max(sup_distance(c.result.solution.u, r.solution.u),
                            sup_distance(c.result.solution.v, r.solution.v)) <= dedup_tol;
        });
        if (duplicate) continue;
        out.push_back({i, classify(r.solution.u, r.solution.v), r});
    }
    return out;
}

}  // namespace gm
