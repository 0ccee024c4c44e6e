#pragma once

// Ordered sub/supersolution rectangles and their nodewise certificates.
//
// With w, y, z solving A w = 1, A y = 1 + rho, A z = C^-2, the positive
// rectangle is [z, C y] for both components and the negative one is its
// negation. Each supersolution/subsolution inequality is checked at the
// worst corner of the rectangle, node by node.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gm/error.hpp"
#include "gm/grid.hpp"
#include "gm/linear.hpp"
#include "gm/model.hpp"

namespace gm {

struct Constants {
    double C = 2.0;
    double c0 = 2.0;
};

/// Lower bound max{1, 1/sqrt(lambda1 mu_bar), 1/sqrt(rho)} that C must strictly exceed.
inline double constant_lower_bound(const ProblemParams& p, double lambda1, double mu_bar) {
    if (!(lambda1 > 0.0) || !(mu_bar > 0.0)) throw InvalidArgument("lambda1 and mu_bar must be positive");
    return std::max({1.0, 1.0 / std::sqrt(lambda1 * mu_bar), 1.0 / std::sqrt(p.rho)});
}

/// Initial constants: C = 2 * lower bound, c0 = 2. A forced C must exceed the lower bound.
inline Constants choose_constants(const ProblemParams& p, double lambda1, double mu_bar,
                                  std::optional<double> forced_C = std::nullopt,
                                  std::optional<double> forced_c0 = std::nullopt) {
    const double bound = constant_lower_bound(p, lambda1, mu_bar);
    Constants k{2.0 * bound, 2.0};
    if (forced_C) {
        if (!(*forced_C > bound)) {
            throw InvalidArgument("C = " + std::to_string(*forced_C) + " does not exceed the required bound " +
                                  std::to_string(bound));
        }
        k.C = *forced_C;
    }
    if (forced_c0) {
        if (!(*forced_c0 > 1.0)) throw InvalidArgument("c0 must exceed 1");
        k.c0 = *forced_c0;
    }
    return k;
}

struct AuxiliarySolutions {
    Field w;
    Field y;
    Field z;
    double c0 = 2.0;
    double C = 2.0;
};

namespace detail {

inline void check_envelope(const std::string& name, const Field& lower, const Field& upper, double slack) {
    for (std::size_t k = 0; k < lower.size(); ++k) {
        const double margin = upper[k] - lower[k];
        if (margin < -slack) throw EnvelopeError(name, k, margin);
    }
}

}  // namespace detail

/// Solves for w, y, z and verifies the three envelopes against phi1 nodewise.
inline AuxiliarySolutions build_auxiliary(const NeumannOperator& op, const EigenPair& eig, const ProblemParams& p,
                                          double C, double c0, double tol = kDefaultLinearTol) {
    if (!(C > 1.0)) throw InvalidArgument("C must exceed 1");
    if (!(c0 > 1.0)) throw InvalidArgument("c0 must exceed 1");
    const Grid& g = op.grid();
    Field w = solve_linear(op, Field(g, 1.0), tol);
    Field y = solve_linear(op, Field(g, 1.0 + p.rho), tol);
    Field z = solve_linear(op, Field(g, 1.0 / (C * C)), tol);

    const Field& phi = eig.phi1;
    const double slack = 10.0 * tol;
    detail::check_envelope("w >= phi1/c0", (1.0 / c0) * phi, w, slack);
    detail::check_envelope("w <= c0 phi1", w, c0 * phi, slack);
    detail::check_envelope("y >= phi1/c0", (1.0 / c0) * phi, y, slack);
    detail::check_envelope("y <= (1+rho) c0 phi1", y, (1.0 + p.rho) * c0 * phi, slack);
    detail::check_envelope("z >= phi1/(c0 C^2)", (1.0 / (c0 * C * C)) * phi, z, slack);
    detail::check_envelope("z <= y", z, y, slack);
    return {std::move(w), std::move(y), std::move(z), c0, C};
}

struct OrderedRectangle {
    Field lower;
    Field upper;

    bool contains(const Field& f, double slack = 0.0) const {
        for (std::size_t k = 0; k < f.size(); ++k) {
            if (f[k] < lower[k] - slack || f[k] > upper[k] + slack) return false;
        }
        return true;
    }

    Field clamp(const Field& f) const {
        Field out = f;
        for (std::size_t k = 0; k < f.size(); ++k) out[k] = std::clamp(f[k], lower[k], upper[k]);
        return out;
    }

    Field midpoint() const { return 0.5 * (lower + upper); }
};

/// One rectangle per component.
struct RectanglePair {
    OrderedRectangle u;
    OrderedRectangle v;
};

struct Rectangles {
    RectanglePair positive;
    RectanglePair negative;
};

/// Positive rectangle [z, C y]^2 and its nodewise negation.
inline Rectangles build_rectangles(const AuxiliarySolutions& aux, double C) {
    Field upper = C * aux.y;
    for (std::size_t k = 0; k < upper.size(); ++k) {
        if (aux.z[k] > upper[k]) throw InvalidArgument("rectangle ordering violated at node " + std::to_string(k));
    }
    OrderedRectangle pos{aux.z, upper};
    OrderedRectangle neg{-upper, -aux.z};
    return {{pos, pos}, {neg, neg}};
}

/// Identifiers of the six certified inequalities.
namespace ineq {
inline constexpr const char* kSuperU = "super_u";          // A ubar >= g1(ubar, v) for v in [vl, vbar]
inline constexpr const char* kSuperV = "super_v";          // A vbar >= g2(u, vbar) for u in [ul, ubar]
inline constexpr const char* kSubURho = "sub_u_rho";       // A ul = C^-2 <= rho
inline constexpr const char* kSubVChain = "sub_v_chain";   // A vl = C^-2 <= case-split bound <= z^(a2-b2)
inline constexpr const char* kSubU = "sub_u";              // A ul <= g1(ul, v) for v in [vl, vbar]
inline constexpr const char* kSubV = "sub_v";              // A vl <= g2(u, vl) for u in [ul, ubar]
}  // namespace ineq

struct InequalityCheck {
    std::string id;
    bool passed = true;
    std::size_t worst_node = 0;
    double margin = std::numeric_limits<double>::infinity();
};

struct Certificate {
    std::vector<InequalityCheck> checks;
    bool proof_side_condition_holds = true;  // max{a1 + 2 b1, a2 - b2} < 1
    double proof_side_condition = 0.0;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const InequalityCheck& c) { return c.passed; });
    }

    const InequalityCheck& at(const std::string& id) const {
        for (const auto& c : checks) {
            if (c.id == id) return c;
        }
        throw InvalidArgument("no inequality named " + id);
    }

    std::vector<std::string> failed_ids() const {
        std::vector<std::string> out;
        for (const auto& c : checks) {
            if (!c.passed) out.push_back(c.id);
        }
        return out;
    }
};

namespace detail {

template <class MarginAt>
InequalityCheck check_nodewise(const char* id, std::size_t n, MarginAt&& margin_at) {
    InequalityCheck c{id, true, 0, std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < n; ++k) {
        const double m = margin_at(k);
        if (m < c.margin) {
            c.margin = m;
            c.worst_node = k;
        }
    }
    c.passed = c.margin >= 0.0;
    return c;
}

}  // namespace detail

/// Checks the supersolution and subsolution inequalities of the positive rectangle.
/// Failures are reported, never thrown.
inline Certificate certify(const NeumannOperator& op, const ProblemParams& p, const EigenPair& eig,
                           const AuxiliarySolutions& aux, const RectanglePair& rect) {
    const Field& ul = rect.u.lower;
    const Field& ub = rect.u.upper;
    const Field& vl = rect.v.lower;
    const Field& vb = rect.v.upper;
    const Field a_ub = op.apply(ub);
    const Field a_vb = op.apply(vb);
    const Field a_ul = op.apply(ul);
    const Field a_vl = op.apply(vl);
    const std::size_t n = ul.size();
    const double C = aux.C, c0 = aux.c0;
    const double a = p.alpha2 - p.beta2;
    const double mu_bar = eig.mu_bar(), mu_under = eig.mu_underbar();

    Certificate cert;
    cert.proof_side_condition = p.proof_side_condition();
    cert.proof_side_condition_holds = cert.proof_side_condition < 1.0;

    cert.checks.push_back(detail::check_nodewise(ineq::kSuperU, n, [&](std::size_t k) {
        return a_ub[k] - p.scale1 * (std::pow(ub[k], p.alpha1) / std::pow(vl[k], p.beta1) + p.rho);
    }));
    cert.checks.push_back(detail::check_nodewise(ineq::kSuperV, n, [&](std::size_t k) {
        return a_vb[k] - p.scale2 * std::pow(ub[k], p.alpha2) / std::pow(vb[k], p.beta2);
    }));
    cert.checks.push_back(detail::check_nodewise(ineq::kSubURho, n, [&](std::size_t k) {
        return p.scale1 * p.rho - a_ul[k];
    }));
    cert.checks.push_back(detail::check_nodewise(ineq::kSubVChain, n, [&](std::size_t k) {
        // Case split on the sign of a2 - b2: the mu-extreme bound, the same
        // bound with phi1 in place of the extreme, and the final z^(a2-b2).
        const double phi = eig.phi1[k];
        const double by_mu = a >= 0.0 ? std::pow(mu_under / (c0 * C * C), a)
                                       : std::pow((1.0 + p.rho) * c0 * mu_bar, a);
        const double by_phi = a >= 0.0 ? std::pow(phi / (c0 * C * C), a)
                                        : std::pow((1.0 + p.rho) * c0 * phi, a);
        const double closing = std::pow(vl[k], a);
        return std::min({by_mu - a_vl[k], by_phi - by_mu, closing - by_phi});
    }));
    cert.checks.push_back(detail::check_nodewise(ineq::kSubU, n, [&](std::size_t k) {
        return p.scale1 * (std::pow(ul[k], p.alpha1) / std::pow(vb[k], p.beta1) + p.rho) - a_ul[k];
    }));
    cert.checks.push_back(detail::check_nodewise(ineq::kSubV, n, [&](std::size_t k) {
        return p.scale2 * std::pow(ul[k], p.alpha2) / std::pow(vl[k], p.beta2) - a_vl[k];
    }));
    return cert;
}

/// Result of the constant search: constants, auxiliary fields, rectangles and the final certificate.
struct CertifiedRectangles {
    Constants constants;
    std::size_t doublings = 0;
    AuxiliarySolutions aux;
    Rectangles rectangles;
    Certificate certificate;
};

/// Starts from choose_constants and doubles c0 (envelope failure) or C
/// (certificate failure) until everything passes or max_doublings is spent.
/// When C is forced it is never enlarged.
inline CertifiedRectangles certify_with_doubling(const NeumannOperator& op, const EigenPair& eig,
                                                 const ProblemParams& p, std::size_t max_doublings = 40,
                                                 std::optional<double> forced_C = std::nullopt,
                                                 std::optional<double> forced_c0 = std::nullopt,
                                                 double tol = kDefaultLinearTol) {
    Constants k = choose_constants(p, eig.lambda1, eig.mu_bar(), forced_C, forced_c0);
    std::size_t doublings = 0;
    std::optional<CertifiedRectangles> last;
    for (;;) {
        std::optional<AuxiliarySolutions> aux;
        try {
            aux = build_auxiliary(op, eig, p, k.C, k.c0, tol);
        } catch (const EnvelopeError&) {
            if (doublings >= max_doublings || forced_c0) throw;
            k.c0 *= 2.0;
            ++doublings;
            continue;
        }
        Rectangles rects = build_rectangles(*aux, k.C);
        Certificate cert = certify(op, p, eig, *aux, rects.positive);
        last = CertifiedRectangles{k, doublings, std::move(*aux), std::move(rects), std::move(cert)};
        if (last->certificate.passed() || doublings >= max_doublings || forced_C) return std::move(*last);
        k.C *= 2.0;
        ++doublings;
    }
}

/// Builds auxiliaries and certifies with the constants taken as given (no bound check, no doubling).
inline CertifiedRectangles certify_with_constants(const NeumannOperator& op, const EigenPair& eig,
                                                  const ProblemParams& p, Constants k,
                                                  double tol = kDefaultLinearTol) {
    AuxiliarySolutions aux = build_auxiliary(op, eig, p, k.C, k.c0, tol);
    Rectangles rects = build_rectangles(aux, k.C);
    Certificate cert = certify(op, p, eig, aux, rects.positive);
    return {k, 0, std::move(aux), std::move(rects), std::move(cert)};
}

}  // namespace gm
