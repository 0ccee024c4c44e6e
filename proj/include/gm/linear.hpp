#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gm/error.hpp"
#include "gm/grid.hpp"

namespace gm {

inline constexpr double kDefaultLinearTol = 1e-10;

struct LinearOptions {
    double tol = kDefaultLinearTol;  // on ||A x - f||_inf
    std::size_t max_iter = 0;        // 0 selects 10 n + 1000
};

struct LinearSolveStats {
    std::size_t iterations = 0;
    double residual = 0.0;
};

/// Solves A x = f by Jacobi-preconditioned conjugate gradients on K x = W f.
/// The stopping test is on the true residual of A, in the sup norm. When the
/// iteration stagnates at the rounding floor 16 eps (||A|| ||x|| + ||f||), all
/// in the sup norm, and that floor exceeds tol, the best iterate is returned.
inline Eigen::VectorXd solve_linear(const NeumannOperator& op, const Eigen::VectorXd& rhs,
                                    const LinearOptions& opts = {}, LinearSolveStats* stats = nullptr,
                                    const Eigen::VectorXd* guess = nullptr) {
    if (!(opts.tol > 0.0)) throw InvalidArgument("linear tolerance must be positive");
    const auto n = static_cast<Eigen::Index>(op.size());
    if (rhs.size() != n) throw InvalidArgument("right-hand side has wrong size");

    const StiffnessMatrix& k = op.stiffness();
    const Eigen::VectorXd& w = op.weights();
    const std::size_t max_iter = opts.max_iter ? opts.max_iter : 10 * op.size() + 1000;

    Eigen::VectorXd inv_diag(n);
    for (Eigen::Index i = 0; i < n; ++i) inv_diag[i] = 1.0 / k.diagonal(static_cast<std::size_t>(i));
    // Off-diagonal entries of K are nonpositive, so |K| 1 = 2 diag(K) - K 1.
    Eigen::VectorXd row_abs;
    k.multiply(Eigen::VectorXd::Ones(n), row_abs);
    row_abs = (2.0 * inv_diag.cwiseInverse() - row_abs).cwiseQuotient(w);
    const double a_norm = row_abs.maxCoeff();
    const double f_norm = rhs.cwiseAbs().maxCoeff();
    auto floor_of = [&](const Eigen::VectorXd& y) {
        return 16.0 * std::numeric_limits<double>::epsilon() * (a_norm * y.cwiseAbs().maxCoeff() + f_norm);
    };

    Eigen::VectorXd x = guess ? *guess : Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd b = rhs.cwiseProduct(w);
    Eigen::VectorXd r, q;
    k.multiply(x, q);
    r = b - q;

    auto true_residual = [&](const Eigen::VectorXd& res) { return res.cwiseQuotient(w).cwiseAbs().maxCoeff(); };

    std::vector<double> history;
    double res_inf = true_residual(r);
    history.push_back(res_inf);
    if (res_inf <= opts.tol) {
        if (stats) *stats = {0, res_inf};
        return x;
    }

    Eigen::VectorXd best_x = x;
    double best_res = res_inf;
    std::size_t since_best = 0;
    auto accept_floor = [&](std::size_t it) {
        Eigen::VectorXd kx;
        k.multiply(best_x, kx);
        const double exact = true_residual(b - kx);
        if (exact > floor_of(best_x)) return false;
        if (stats) *stats = {it, exact};
        return true;
    };

    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    std::size_t it = 1;
    for (; it <= max_iter; ++it) {
        k.multiply(p, q);
        const double pq = p.dot(q);
        if (!(pq > 0.0)) break;
        const double step = rz / pq;
        x += step * p;
        r -= step * q;
        res_inf = true_residual(r);
        if (res_inf <= opts.tol) {
            // Confirm against the explicitly recomputed residual.
            Eigen::VectorXd kx;
            k.multiply(x, kx);
            Eigen::VectorXd exact = b - kx;
            res_inf = true_residual(exact);
            history.push_back(res_inf);
            if (res_inf <= opts.tol) {
                if (stats) *stats = {it, res_inf};
                return x;
            }
            r = exact;  // drifted; restart the recurrence
            z = inv_diag.cwiseProduct(r);
            p = z;
            rz = r.dot(z);
            continue;
        }
        history.push_back(res_inf);
        if (res_inf < best_res) {
            best_res = res_inf;
            best_x = x;
            since_best = 0;
        } else if (++since_best >= 50 && best_res <= floor_of(best_x) && accept_floor(it)) {
            return best_x;
        }
        z = inv_diag.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    if (best_res <= floor_of(best_x) && accept_floor(it)) return best_x;
    std::string what = "conjugate gradients did not reach tolerance " + std::to_string(opts.tol) +
                       " (last residual " + std::to_string(history.back()) + ")";
    throw ConvergenceError(what, std::move(history));
}

inline Field solve_linear(const NeumannOperator& op, const Field& rhs, double tol = kDefaultLinearTol) {
    return Field(rhs.grid(), solve_linear(op, rhs.values(), LinearOptions{tol, 0}));
}

/// Principal eigenpair of A, with phi1 scaled to sup norm 1.
struct EigenPair {
    double lambda1 = 0.0;
    Field phi1;
    double residual = 0.0;
    std::size_t iterations = 0;

    double mu_bar() const { return phi1.max(); }
    double mu_underbar() const { return phi1.min(); }
};

/// Inverse power iteration started from the constant field.
inline EigenPair principal_eigenpair(const NeumannOperator& op, double tol = kDefaultLinearTol,
                                     std::size_t max_iter = 500) {
    if (!(tol > 0.0)) throw InvalidArgument("eigen tolerance must be positive");
    const Eigen::VectorXd& w = op.weights();
    const LinearOptions inner{tol * 0.1, 0};

    Eigen::VectorXd x = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.size()));
    std::vector<double> history;
    for (std::size_t it = 0; it <= max_iter; ++it) {
        const Eigen::VectorXd ax = op.apply(x);
        // Rayleigh quotient in the W inner product, where A is self-adjoint.
        const double lambda = x.dot(w.cwiseProduct(ax)) / x.dot(w.cwiseProduct(x));
        const double res = (ax - lambda * x).cwiseAbs().maxCoeff();
        history.push_back(res);
        if (res <= tol) {
            if (x.minCoeff() <= 0.0) {
                throw ConvergenceError("principal eigenvector changes sign", std::move(history));
            }
            return EigenPair{lambda, Field(op.grid(), x), res, it};
        }
        if (it == max_iter) break;
        Eigen::VectorXd next = solve_linear(op, x, inner);
        const Eigen::Index imax = [&] {
            Eigen::Index i;
            next.cwiseAbs().maxCoeff(&i);
            return i;
        }();
        x = next / next[imax];
    }
    throw ConvergenceError("inverse iteration did not converge", std::move(history));
}

}  // namespace gm
