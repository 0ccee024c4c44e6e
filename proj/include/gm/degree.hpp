#pragma once

// Finite-dimensional degree estimates for the fixed-point maps
// (u, v) -> (u, v) - A^-1 F(t, u, v), and the exact discrete proof that the
// t = 0 problem A u = u+ + 1 has no solution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "gm/error.hpp"
#include "gm/grid.hpp"
#include "gm/model.hpp"
#include "gm/newton.hpp"

namespace gm {

inline constexpr std::size_t kMaxDegreeUnknowns = 16;

enum class MapKind { H, N };

inline const char* to_string(MapKind k) { return k == MapKind::H ? "H" : "N"; }

/// H: F = rhs_F (t = 0 is A u = u+ + 1). N: F = rhs_Fhat (t = 0 is the chi_hat eigen-problem).
struct CompactMap {
    MapKind kind = MapKind::H;
    double t = 0.0;
    ProblemParams params;
    TruncationEnv env;
    double lambda1 = 1.0;
    std::shared_ptr<const Eigen::PartialPivLU<Eigen::MatrixXd>> a_lu;
    std::shared_ptr<const Grid> grid;

    double epsilon() const { return env.epsilon; }
    std::size_t unknowns() const { return 2 * grid->size(); }

    CompactMap at(double t_new) const {
        CompactMap m = *this;
        m.t = t_new;
        return m;
    }
};

inline CompactMap make_compact_map(const NeumannOperator& op, MapKind kind, const ProblemParams& p,
                                   TruncationEnv env, double lambda1, double t) {
    p.validate();
    env.validate();
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("homotopy parameter t must lie in [0,1]");
    return CompactMap{kind,
                      t,
                      p,
                      std::move(env),
                      lambda1,
                      std::make_shared<const Eigen::PartialPivLU<Eigen::MatrixXd>>(op.dense()),
                      std::make_shared<const Grid>(op.grid())};
}

/// (u - A^-1 F1, v - A^-1 F2).
inline FieldPair map_eval(const CompactMap& m, const Field& u, const Field& v) {
    const FieldPair f = m.kind == MapKind::H ? rhs_F(m.params, m.env, m.t, u, v)
                                             : rhs_Fhat(m.params, m.env, m.lambda1, m.t, u, v);
    const Eigen::VectorXd au = m.a_lu->solve(f.u.values());
    const Eigen::VectorXd av = m.a_lu->solve(f.v.values());
    return {Field(u.grid(), Eigen::VectorXd(u.values() - au)), Field(v.grid(), Eigen::VectorXd(v.values() - av))};
}

inline VectorMap as_vector_map(const CompactMap& m) {
    return [m](const Eigen::VectorXd& x) {
        auto [u, v] = unstack(*m.grid, x);
        auto [ru, rv] = map_eval(m, u, v);
        return stack(ru, rv);
    };
}

/// Closed outer box, optionally minus a closed inner box (the hole).
struct Region {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::optional<Eigen::VectorXd> hole_lower;
    std::optional<Eigen::VectorXd> hole_upper;

    static Region symmetric(Eigen::Index d, double radius) {
        return {Eigen::VectorXd::Constant(d, -radius), Eigen::VectorXd::Constant(d, radius), std::nullopt,
                std::nullopt};
    }

    Eigen::Index dim() const { return lower.size(); }
    bool has_hole() const { return hole_lower.has_value(); }

    void validate() const {
        if (lower.size() == 0 || lower.size() != upper.size()) throw InvalidArgument("region bounds malformed");
        if (((upper - lower).array() <= 0.0).any()) throw InvalidArgument("region box is empty");
        if (hole_lower.has_value() != hole_upper.has_value()) throw InvalidArgument("hole needs both bounds");
        if (has_hole()) {
            if (hole_lower->size() != lower.size() || hole_upper->size() != lower.size()) {
                throw InvalidArgument("hole dimension mismatch");
            }
            if ((hole_lower->array() <= lower.array()).any() || (hole_upper->array() >= upper.array()).any() ||
                ((*hole_upper - *hole_lower).array() <= 0.0).any()) {
                throw InvalidArgument("hole must be a nonempty box inside the outer box");
            }
        }
    }

    bool in_hole(const Eigen::VectorXd& x) const {
        if (!has_hole()) return false;
        return (x.array() >= hole_lower->array()).all() && (x.array() <= hole_upper->array()).all();
    }

    /// Open region: interior of the outer box, outside the closed hole.
    bool contains(const Eigen::VectorXd& x) const {
        return (x.array() > lower.array()).all() && (x.array() < upper.array()).all() && !in_hole(x);
    }
};

/// Deterministic boundary samples: for each face of the outer box (and of the
/// hole), its center, the two extreme points of the face, and `per_face`
/// uniform points.
inline std::vector<Eigen::VectorXd> boundary_samples(const Region& r, std::size_t per_face, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    auto faces = [&](const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
        const Eigen::VectorXd mid = 0.5 * (lo + hi);
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            for (double side : {lo[i], hi[i]}) {
                Eigen::VectorXd c = mid;
                c[i] = side;
                out.push_back(c);
                Eigen::VectorXd a = lo, b = hi;
                a[i] = side;
                b[i] = side;
                out.push_back(a);
                out.push_back(b);
                for (std::size_t s = 0; s < per_face; ++s) {
                    Eigen::VectorXd x(lo.size());
                    for (Eigen::Index j = 0; j < lo.size(); ++j) x[j] = lo[j] + unit(rng) * (hi[j] - lo[j]);
                    x[i] = side;
                    out.push_back(x);
                }
            }
        }
    };
    faces(r.lower, r.upper);
    if (r.has_hole()) faces(*r.hole_lower, *r.hole_upper);
    return out;
}

/// Minimum sup norm of f over the boundary samples.
inline double boundary_margin(const VectorMap& f, const Region& r, std::size_t per_face = 8, std::uint64_t seed = 1) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : boundary_samples(r, per_face, seed)) m = std::min(m, f(x).cwiseAbs().maxCoeff());
    return m;
}

struct DegreeZero {
    Eigen::VectorXd x;
    double determinant = 0.0;
    bool regular = false;
    double residual = 0.0;
};

struct DegreeEstimate {
    int value = 0;
    std::vector<DegreeZero> zeros;
    std::size_t starts = 0;
    std::size_t converged = 0;
    std::size_t irregular = 0;
    double boundary_margin = 0.0;
    std::string note;
};

struct DegreeOptions {
    std::size_t n_starts = 64;
    std::uint64_t rng_seed = 1;
    double tol = 1e-10;
    double det_threshold = 1e-8;
    std::size_t boundary_per_face = 8;
    std::size_t max_newton = 100;
    unsigned threads = 0;
};

/// Multistart estimate of the Brouwer degree of f on the region: the sum of
/// sign(det J) over the distinct regular zeros found. An estimate, not a proof.
inline DegreeEstimate estimate_degree(const VectorMap& f, const Region& region, const DegreeOptions& opts,
                                      const std::vector<Eigen::VectorXd>& extra_starts = {}) {
    region.validate();
    const Eigen::Index d = region.dim();
    if (static_cast<std::size_t>(d) > kMaxDegreeUnknowns) {
        throw InvalidArgument("degree estimation is limited to " + std::to_string(kMaxDegreeUnknowns) + " unknowns");
    }
    DegreeEstimate est;
    est.boundary_margin = boundary_margin(f, region, opts.boundary_per_face, opts.rng_seed);
    if (!(est.boundary_margin > opts.tol)) {
        throw AdmissibilityError("map vanishes on the region boundary (sampled)", est.boundary_margin);
    }

    std::vector<Eigen::VectorXd> starts = extra_starts;
    std::mt19937_64 rng(opts.rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t attempts = 0;
    while (starts.size() < extra_starts.size() + opts.n_starts && attempts < 1000 * (opts.n_starts + 1)) {
        ++attempts;
        Eigen::VectorXd x(d);
        for (Eigen::Index j = 0; j < d; ++j) x[j] = region.lower[j] + unit(rng) * (region.upper[j] - region.lower[j]);
        if (region.contains(x)) starts.push_back(std::move(x));
    }
    est.starts = starts.size();

    MatrixMap jac = [&f](const Eigen::VectorXd& x) { return fd_jacobian(f, x); };
    NewtonOptions nopts{opts.tol, opts.max_newton};
    nopts.min_norm_solve = true;
    std::vector<std::optional<Eigen::VectorXd>> roots(starts.size());
    auto work = [&](std::size_t i) {
        NewtonResult nr = damped_newton(f, jac, starts[i], nopts);
        if (nr.converged && region.contains(nr.x)) roots[i] = nr.x;
    };
    const unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    if (threads <= 1) {
        for (std::size_t i = 0; i < starts.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = t; i < starts.size(); i += threads) work(i);
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

    std::vector<Eigen::VectorXd> found;
    for (auto& r : roots) {
        if (r) found.push_back(*r);
    }
    est.converged = found.size();
    std::sort(found.begin(), found.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    });
    const double distinct = 100.0 * opts.tol;
    for (const auto& x : found) {
        const bool dup = std::any_of(est.zeros.begin(), est.zeros.end(), [&](const DegreeZero& z) {
            return (z.x - x).cwiseAbs().maxCoeff() <= distinct;
        });
        if (dup) continue;
        DegreeZero z;
        z.x = x;
        z.residual = f(x).cwiseAbs().maxCoeff();
        z.determinant = fd_jacobian(f, x).determinant();
        z.regular = std::abs(z.determinant) > opts.det_threshold;
        if (z.regular) {
            est.value += z.determinant > 0.0 ? 1 : -1;
        } else {
            ++est.irregular;
        }
        est.zeros.push_back(std::move(z));
    }
    est.note = "estimate from " + std::to_string(est.starts) + " starts, " + std::to_string(est.converged) +
               " converged, " + std::to_string(est.zeros.size()) + " distinct (" + std::to_string(est.irregular) +
               " irregular, excluded)";
    return est;
}

struct SweepTrace {
    std::vector<double> t;
    std::vector<double> margin;
    double min_margin = std::numeric_limits<double>::infinity();
};

/// Sampled boundary margin of family(t) for every t in t_grid. Zero margins are reported, not thrown.
inline SweepTrace homotopy_sweep(const std::function<VectorMap(double)>& family, const std::vector<double>& t_grid,
                                 const Region& region, std::size_t per_face = 8, std::uint64_t seed = 1) {
    region.validate();
    if (t_grid.empty()) throw InvalidArgument("t grid is empty");
    SweepTrace tr;
    for (double t : t_grid) {
        if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("t grid must lie in [0,1]");
        const double m = boundary_margin(family(t), region, per_face, seed);
        tr.t.push_back(t);
        tr.margin.push_back(m);
        tr.min_margin = std::min(tr.min_margin, m);
    }
    return tr;
}

/// Witness for the absence of solutions of A u = u+ + 1. With trapezoid
/// weights w, sum_i w_i (A u)_i = sum_i w_i u_i holds exactly, so a solution
/// would satisfy -sum_i w_i u-_i = sum_i w_i = |Omega| > 0, which is impossible.
struct NoSolutionWitness {
    bool no_solution = false;
    double magnitude = 0.0;       // |Omega| = sum of weights
    std::size_t nodes = 0;        // unweighted contradiction size
    double identity_defect = 0.0; // max defect of the weighted summation identity, relative to sum |w A u|
};

inline NoSolutionWitness check_no_solution_t0(const NeumannOperator& op, std::size_t probes = 8,
                                              std::uint64_t seed = 7) {
    const Eigen::VectorXd& w = op.weights();
    NoSolutionWitness out;
    out.nodes = op.size();
    out.magnitude = w.sum();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const auto n = static_cast<Eigen::Index>(op.size());
    for (std::size_t s = 0; s < probes; ++s) {
        Eigen::VectorXd u(n);
        for (Eigen::Index k = 0; k < n; ++k) u[k] = s == 0 ? 1.0 : unit(rng);
        const Eigen::VectorXd au = op.apply(u);
        const double lhs = w.dot(au);
        const double rhs = w.dot(u);
        const double scale = std::max(w.cwiseProduct(au).cwiseAbs().sum(), w.cwiseProduct(u).cwiseAbs().sum());
        out.identity_defect = std::max(out.identity_defect, std::abs(lhs - rhs) / scale);
    }
    out.no_solution = out.magnitude > 0.0 && out.identity_defect <= 1e-13;
    return out;
}

}  // namespace gm
