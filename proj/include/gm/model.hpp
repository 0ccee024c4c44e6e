#pragma once

// Problem data, sign couplings, nonlinear right-hand sides and truncations
// for the sign-coupled activator-inhibitor system
//
//   -Δu + u = f1(v) (|u|^a1 / |v|^b1 + rho)
//   -Δv + v = f2(u)  |u|^a2 / |v|^b2
//
// with zero-flux boundaries. All powers act on absolute values, f_i(s) is
// scale_i * sgn(s), and sgn(0) = +1.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "gm/error.hpp"
#include "gm/grid.hpp"

namespace gm {

struct ProblemParams {
    double alpha1 = 0.5;
    double alpha2 = 0.5;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double rho = 1.0;
    double scale1 = 1.0;  // |f1|
    double scale2 = 1.0;  // |f2|
    // Use (alpha1, beta1) in the second homotopy nonlinearity as literally typeset,
    // instead of (alpha2, beta2).
    bool literal_homotopy_exponents = false;

    /// max{alpha1 + 2 beta1, alpha2 + beta2 / 2}; must be < 1.
    double alpha_condition() const { return std::max(alpha1 + 2.0 * beta1, alpha2 + 0.5 * beta2); }

    /// The variant max{alpha1 + 2 beta1, alpha2 - beta2} used in the supersolution argument.
    double proof_side_condition() const { return std::max(alpha1 + 2.0 * beta1, alpha2 - beta2); }

    void validate() const {
        auto in_open_unit = [](double x) { return x > 0.0 && x < 1.0; };
        auto in_half_open_unit = [](double x) { return x >= 0.0 && x < 1.0; };
        if (!in_open_unit(alpha1) || !in_open_unit(alpha2)) {
            throw InvalidArgument("alpha1 and alpha2 must lie in (0,1)");
        }
        if (!in_half_open_unit(beta1) || !in_half_open_unit(beta2)) {
            throw InvalidArgument("beta1 and beta2 must lie in [0,1)");
        }
        if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidArgument("rho must be positive");
        if (!(scale1 > 0.0) || !(scale2 > 0.0)) throw InvalidArgument("coupling scales must be positive");
        if (!(alpha_condition() < 1.0)) {
            throw InvalidArgument("exponents violate max{alpha1 + 2 beta1, alpha2 + beta2/2} < 1 (value " +
                                  std::to_string(alpha_condition()) + ")");
        }
    }

    /// The nodal pipeline needs the cooperative form beta1 = 0.
    void require_beta1_zero() const {
        if (beta1 != 0.0) throw InvalidArgument("this computation requires beta1 = 0");
    }
};

inline double sgn(double s) noexcept { return s >= 0.0 ? 1.0 : -1.0; }
inline double f1(double s) noexcept { return sgn(s); }
inline double f2(double s) noexcept { return sgn(s); }

inline void check_epsilon(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0,1)");
}

inline double gamma_eps(double epsilon, double s) {
    check_epsilon(epsilon);
    return epsilon * (0.5 + sgn(s));
}

inline double clamp_sym(double s, double bound) { return std::clamp(s, -bound, bound); }

inline double trunc_T1(double u, double ubar) {
    if (!(ubar > 0.0)) throw InvalidArgument("truncation bound must be positive");
    return clamp_sym(u, ubar);
}

inline double trunc_T2(double epsilon, double v, double vbar) {
    if (!(vbar > 0.0)) throw InvalidArgument("truncation bound must be positive");
    return gamma_eps(epsilon, v) + clamp_sym(v, vbar);
}

/// Piecewise-linear truncation around phi: 3s/2 above phi, (1/2 + sgn s) phi in between, s/2 below -phi.
inline double chi_hat(double phi, double s) {
    if (!(phi > 0.0)) throw InvalidArgument("chi_hat needs a positive phi");
    if (s >= phi) return 1.5 * s;
    if (s <= -phi) return 0.5 * s;
    return (0.5 + sgn(s)) * phi;
}

/// Cutoff: 1 on [-mu, mu], linear ramp to 0 at |s| = 2 mu.
inline double chi_mu(double mu, double s) {
    if (!(mu > 0.0)) throw InvalidArgument("chi_mu needs mu > 0");
    const double a = std::abs(s);
    if (a >= 2.0 * mu) return 0.0;
    if (a <= mu) return 1.0;
    return 2.0 - a / mu;
}

struct FieldPair {
    Field u;
    Field v;
};

namespace detail {

inline void check_same_grid(const Field& a, const Field& b) {
    if (!(a.grid() == b.grid())) throw InvalidArgument("fields live on different grids");
}

}  // namespace detail

/// Nonlinear right-hand sides of the singular system; zero denominators are an error.
inline FieldPair rhs_P(const ProblemParams& p, const Field& u, const Field& v) {
    detail::check_same_grid(u, v);
    Field g1(u.grid()), g2(u.grid());
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double au = std::abs(u[k]);
        const double av = std::abs(v[k]);
        if (av == 0.0 && (p.beta1 > 0.0 || p.beta2 > 0.0)) {
            throw SingularityError("inhibitor vanishes where a negative power is taken", k);
        }
        g1[k] = p.scale1 * f1(v[k]) * (std::pow(au, p.alpha1) / std::pow(av, p.beta1) + p.rho);
        g2[k] = p.scale2 * f2(u[k]) * std::pow(au, p.alpha2) / std::pow(av, p.beta2);
    }
    return {std::move(g1), std::move(g2)};
}

/// Right-hand sides of the regularized system (beta1 = 0, |v| replaced by |v + gamma_eps(v)|).
inline FieldPair rhs_Peps(const ProblemParams& p, double epsilon, const Field& u, const Field& v) {
    p.require_beta1_zero();
    check_epsilon(epsilon);
    detail::check_same_grid(u, v);
    Field g1(u.grid()), g2(u.grid());
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double au = std::abs(u[k]);
        const double den = std::abs(v[k] + gamma_eps(epsilon, v[k]));
        if (den == 0.0) throw SingularityError("regularized denominator vanishes", k);
        g1[k] = p.scale1 * f1(v[k]) * (std::pow(au, p.alpha1) + p.rho);
        g2[k] = p.scale2 * f2(u[k]) * std::pow(au, p.alpha2) / std::pow(den, p.beta2);
    }
    return {std::move(g1), std::move(g2)};
}

/// Data shared by the truncated homotopy right-hand sides.
struct TruncationEnv {
    double epsilon = 0.5;
    Field ubar;
    Field vbar;
    Field phi1;
    double mu_chi = 1.0;

    void validate() const {
        check_epsilon(epsilon);
        if (!(mu_chi > 0.0)) throw InvalidArgument("mu_chi must be positive");
        if (ubar.min() <= 0.0 || vbar.min() <= 0.0) throw InvalidArgument("truncation bounds must be positive");
        if (phi1.min() <= 0.0) throw InvalidArgument("phi1 must be positive");
    }
};

namespace detail {

inline void check_t(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("homotopy parameter t must lie in [0,1]");
}

// t * (truncated coupled nonlinearity), shared by both homotopies.
inline void truncated_terms(const ProblemParams& p, const TruncationEnv& env, double u, double v, std::size_t k,
                            double& h1, double& h2) {
    const double t1 = std::abs(clamp_sym(u, env.ubar[k]));
    const double t2 = std::abs(gamma_eps(env.epsilon, v) + clamp_sym(v, env.vbar[k]));
    h1 = p.scale1 * f1(v) * (std::pow(t1, p.alpha1) + p.rho);
    const double num = p.literal_homotopy_exponents ? p.alpha1 : p.alpha2;
    const double den = p.literal_homotopy_exponents ? p.beta1 : p.beta2;
    h2 = p.scale2 * f2(u) * std::pow(t1, num) / std::pow(t2, den);
}

}  // namespace detail

/// Homotopy from the decoupled (u+ + 1, v+ + 1) problem (t = 0) to the truncated system (t = 1).
inline FieldPair rhs_F(const ProblemParams& p, const TruncationEnv& env, double t, const Field& u, const Field& v) {
    detail::check_t(t);
    detail::check_same_grid(u, v);
    Field g1(u.grid()), g2(u.grid());
    for (std::size_t k = 0; k < u.size(); ++k) {
        double h1, h2;
        detail::truncated_terms(p, env, u[k], v[k], k, h1, h2);
        g1[k] = t * h1 + (1.0 - t) * (std::max(u[k], 0.0) + 1.0);
        g2[k] = t * h2 + (1.0 - t) * (std::max(v[k], 0.0) + 1.0);
    }
    return {std::move(g1), std::move(g2)};
}

/// Homotopy from the chi_hat eigen-problem (t = 0) to the truncated system (t = 1).
inline FieldPair rhs_Fhat(const ProblemParams& p, const TruncationEnv& env, double lambda1, double t,
                          const Field& u, const Field& v) {
    detail::check_t(t);
    detail::check_same_grid(u, v);
    Field g1(u.grid()), g2(u.grid());
    const double c = (2.0 / 3.0) * (1.0 - t) * lambda1;
    for (std::size_t k = 0; k < u.size(); ++k) {
        double h1, h2;
        detail::truncated_terms(p, env, u[k], v[k], k, h1, h2);
        g1[k] = t * h1 + c * chi_hat(env.phi1[k], u[k]);
        g2[k] = t * h2 + c * chi_hat(env.phi1[k], v[k]);
    }
    return {std::move(g1), std::move(g2)};
}


/// Diagonal partial derivatives of (g1, g2) with respect to (u, v). The sign
/// factors are treated as locally constant; |u| is floored at 1e-14 so the
/// derivative of |u|^a stays finite at zero nodes. With an epsilon the
/// regularized denominators |v + gamma_eps(v)| are used.
struct RhsDerivatives {
    Eigen::VectorXd g1_u, g1_v, g2_u, g2_v;
};

inline RhsDerivatives rhs_derivatives(const ProblemParams& p, const Field& u, const Field& v,
                                      std::optional<double> epsilon = std::nullopt) {
    const auto n = static_cast<Eigen::Index>(u.size());
    RhsDerivatives d{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    constexpr double kFloor = 1e-14;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        const double su = sgn(u[i]), sv = sgn(v[i]);
        const double au = std::max(std::abs(u[i]), kFloor);
        const double shifted = epsilon ? v[i] + gamma_eps(*epsilon, v[i]) : v[i];
        const double den = std::abs(shifted);
        const double sden = sgn(shifted);
        const double b1 = epsilon ? 0.0 : p.beta1;
        const double den1 = std::pow(den, b1);
        const double den2 = std::pow(den, p.beta2);
        d.g1_u[k] = p.scale1 * sv * p.alpha1 * std::pow(au, p.alpha1 - 1.0) * su / den1;
        d.g1_v[k] = b1 == 0.0 ? 0.0
                              : -p.scale1 * sv * std::pow(std::abs(u[i]), p.alpha1) * b1 * sden / (den1 * den);
        d.g2_u[k] = p.scale2 * su * p.alpha2 * std::pow(au, p.alpha2 - 1.0) * su / den2;
        d.g2_v[k] = p.beta2 == 0.0
                        ? 0.0
                        : -p.scale2 * su * std::pow(std::abs(u[i]), p.alpha2) * p.beta2 * sden / (den2 * den);
    }
    return d;
}

/// Dense Jacobian of (A u - g1, A v - g2) in the stacked unknown (u, v).
inline Eigen::MatrixXd coupled_jacobian(const Eigen::MatrixXd& a, const RhsDerivatives& d) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    j.topLeftCorner(n, n) = a;
    j.bottomRightCorner(n, n) = a;
    j.topLeftCorner(n, n).diagonal() -= d.g1_u;
    j.topRightCorner(n, n).diagonal() -= d.g1_v;
    j.bottomLeftCorner(n, n).diagonal() -= d.g2_u;
    j.bottomRightCorner(n, n).diagonal() -= d.g2_v;
    return j;
}

/// Stacks two fields into one vector (u first).
inline Eigen::VectorXd stack(const Field& u, const Field& v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(u.size() + v.size()));
    x << u.values(), v.values();
    return x;
}

inline FieldPair unstack(const Grid& g, const Eigen::VectorXd& x) {
    const auto n = static_cast<Eigen::Index>(g.size());
    return {Field(g, Eigen::VectorXd(x.head(n))), Field(g, Eigen::VectorXd(x.tail(n)))};
}

struct Residual {
    Field r1;
    Field r2;
    double norm1 = 0.0;
    double norm2 = 0.0;

    double norm() const { return std::max(norm1, norm2); }
};

inline Residual make_residual(const NeumannOperator& op, const Field& u, const Field& v, const FieldPair& g,
                              const FieldPair* forcing = nullptr) {
    Field r1 = op.apply(u) - g.u;
    Field r2 = op.apply(v) - g.v;
    if (forcing) {
        r1 -= forcing->u;
        r2 -= forcing->v;
    }
    const double n1 = r1.sup_norm(), n2 = r2.sup_norm();
    return {std::move(r1), std::move(r2), n1, n2};
}

/// r = (A u - g1, A v - g2) for the singular system.
inline Residual residual(const NeumannOperator& op, const ProblemParams& p, const Field& u, const Field& v,
                         const FieldPair* forcing = nullptr) {
    return make_residual(op, u, v, rhs_P(p, u, v), forcing);
}

inline Residual residual_regularized(const NeumannOperator& op, const ProblemParams& p, double epsilon,
                                     const Field& u, const Field& v, const FieldPair* forcing = nullptr) {
    return make_residual(op, u, v, rhs_Peps(p, epsilon, u, v), forcing);
}

/// Additive forcings that make (u_star, v_star) an exact solution of the singular system.
inline FieldPair manufacture(const NeumannOperator& op, const ProblemParams& p, const Field& u_star,
                             const Field& v_star) {
    FieldPair g = rhs_P(p, u_star, v_star);
    return {op.apply(u_star) - g.u, op.apply(v_star) - g.v};
}

/// Same for the regularized system at a given epsilon.
inline FieldPair manufacture_regularized(const NeumannOperator& op, const ProblemParams& p, double epsilon,
                                         const Field& u_star, const Field& v_star) {
    FieldPair g = rhs_Peps(p, epsilon, u_star, v_star);
    return {op.apply(u_star) - g.u, op.apply(v_star) - g.v};
}

}  // namespace gm
