#pragma once

// Constant-sign solutions inside the certified rectangle.
//
// The positive solution is computed by clamped Gauss-Seidel Picard sweeps
// (u <- A^-1 g1(u, v), then v <- A^-1 g2(u_new, v)), each iterate projected
// into the rectangle. The negative solution follows from odd symmetry.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "gm/grid.hpp"
#include "gm/linear.hpp"
#include "gm/model.hpp"
#include "gm/newton.hpp"
#include "gm/subsup.hpp"

namespace gm {

struct Solution {
    Field u;
    Field v;
    double residual_u = std::numeric_limits<double>::infinity();
    double residual_v = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> residual_history;

    double residual() const { return std::max(residual_u, residual_v); }
};

struct SignSolveOptions {
    double tol = 1e-8;
    std::size_t max_iter = 10000;
    double relaxation = 1.0;  // initial omega in (0, 1]
    bool newton_polish = true;
    double linear_tol = 1e-11;
};

namespace detail {

inline Solution finish(Field u, Field v, const Residual& r, std::size_t it, bool converged,
                       std::vector<double> history) {
    return Solution{std::move(u), std::move(v), r.norm1, r.norm2, it, converged, std::move(history)};
}

}  // namespace detail

/// Polishes (u, v) with damped Newton on the unclamped singular system.
inline std::optional<Solution> newton_polish(const NeumannOperator& op, const ProblemParams& p, const Field& u0,
                                             const Field& v0, double tol, std::size_t max_iter = 50) {
    const Grid& g = op.grid();
    const Eigen::MatrixXd a = op.dense();
    VectorMap f = [&](const Eigen::VectorXd& x) {
        auto [u, v] = unstack(g, x);
        Residual r = residual(op, p, u, v);
        return stack(r.r1, r.r2);
    };
    MatrixMap jac = [&](const Eigen::VectorXd& x) {
        auto [u, v] = unstack(g, x);
        return coupled_jacobian(a, rhs_derivatives(p, u, v));
    };
    NewtonResult nr;
    try {
        nr = damped_newton(f, jac, stack(u0, v0), NewtonOptions{tol, max_iter});
    } catch (const SingularityError&) {
        return std::nullopt;
    }
    if (!nr.converged) return std::nullopt;
    auto [u, v] = unstack(g, nr.x);
    Residual r = residual(op, p, u, v);
    return detail::finish(std::move(u), std::move(v), r, nr.iterations, r.norm() <= tol, nr.history);
}

/// Positive solution inside the rectangle `rect`, starting from its midpoint unless a seed is given.
inline Solution solve_positive(const NeumannOperator& op, const ProblemParams& p, const RectanglePair& rect,
                               const SignSolveOptions& opts = {}, const FieldPair* seed = nullptr) {
    p.validate();
    if (!(opts.relaxation > 0.0 && opts.relaxation <= 1.0)) throw InvalidArgument("relaxation must lie in (0,1]");
    Field u = seed ? rect.u.clamp(seed->u) : rect.u.midpoint();
    Field v = seed ? rect.v.clamp(seed->v) : rect.v.midpoint();

    double omega = opts.relaxation;
    std::vector<double> history;
    Residual r = residual(op, p, u, v);
    history.push_back(r.norm());
    std::size_t it = 0;
    while (r.norm() > opts.tol && it < opts.max_iter) {
        ++it;
        const Field u_hat = solve_linear(op, rhs_P(p, u, v).u, opts.linear_tol);
        Field u_new = rect.u.clamp(u + omega * (u_hat - u));
        const Field v_hat = solve_linear(op, rhs_P(p, u_new, v).v, opts.linear_tol);
        Field v_new = rect.v.clamp(v + omega * (v_hat - v));
        Residual r_new = residual(op, p, u_new, v_new);
        if (r_new.norm() > r.norm()) omega = std::max(omega * 0.5, 1.0 / 1024.0);
        u = std::move(u_new);
        v = std::move(v_new);
        r = std::move(r_new);
        history.push_back(r.norm());
    }
    if (r.norm() <= opts.tol) return detail::finish(std::move(u), std::move(v), r, it, true, std::move(history));

    if (opts.newton_polish) {
        if (auto polished = newton_polish(op, p, u, v, opts.tol)) {
            if (rect.u.contains(polished->u) && rect.v.contains(polished->v)) {
                polished->iterations += it;
                history.insert(history.end(), polished->residual_history.begin(), polished->residual_history.end());
                polished->residual_history = std::move(history);
                return std::move(*polished);
            }
        }
    }
    return detail::finish(std::move(u), std::move(v), r, it, false, std::move(history));
}

/// (-u, -v), which solves the system whenever (u, v) does.
inline Solution negate(const Solution& s) {
    Solution out = s;
    out.u = -s.u;
    out.v = -s.v;
    return out;
}

inline constexpr double kStrictSeparation = 1e-12;

struct SeparationReport {
    double margin = 0.0;
    std::size_t worst_node = 0;
    bool passed = false;
};

/// Strict separation from the subsolution: min(u - z) for a positive
/// solution (sign = +1) or min(-z - u) for a negative one (sign = -1).
inline SeparationReport check_separation(const Field& u, const Field& z, int sign = +1) {
    SeparationReport rep{std::numeric_limits<double>::infinity(), 0, false};
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double m = sign > 0 ? u[k] - z[k] : -z[k] - u[k];
        if (m < rep.margin) {
            rep.margin = m;
            rep.worst_node = k;
        }
    }
    rep.passed = rep.margin > kStrictSeparation;
    return rep;
}

struct ContainmentReport {
    bool in_rectangle = false;        // [lower, upper] of the certified rectangle
    bool in_zero_to_upper = false;    // [0, upper] (or [lower, 0] for a negative rectangle)
};

inline ContainmentReport check_containment(const Solution& s, const RectanglePair& rect, double slack = 0.0) {
    ContainmentReport c;
    c.in_rectangle = rect.u.contains(s.u, slack) && rect.v.contains(s.v, slack);
    auto between = [&](const Field& f, const OrderedRectangle& r) {
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double lo = std::min(0.0, r.lower[k]), hi = std::max(0.0, r.upper[k]);
            if (f[k] < lo - slack || f[k] > hi + slack) return false;
        }
        return true;
    };
    c.in_zero_to_upper = between(s.u, rect.u) && between(s.v, rect.v);
    return c;
}

}  // namespace gm
