#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace gm {

using VectorMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using MatrixMap = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct NewtonOptions {
    double tol = 1e-10;            // on the sup norm of the residual
    std::size_t max_iter = 100;
    double min_step = 1.0 / 1024;  // smallest backtracking factor
    bool min_norm_solve = false;   // use a rank-revealing solve (singular Jacobians)
    double divergence_bound = std::numeric_limits<double>::infinity();
};

struct NewtonResult {
    Eigen::VectorXd x;
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

/// Central-difference Jacobian with relative step h * max(1, |x_j|).
inline Eigen::MatrixXd fd_jacobian(const VectorMap& f, const Eigen::VectorXd& x, double h = 1e-6) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd j(n, n);
    Eigen::VectorXd xp = x, xm = x;
    for (Eigen::Index c = 0; c < n; ++c) {
        const double step = h * std::max(1.0, std::abs(x[c]));
        xp[c] = x[c] + step;
        xm[c] = x[c] - step;
        const Eigen::VectorXd fp = f(xp), fm = f(xm);
        if (c == 0) j.resize(fp.size(), n);
        j.col(c) = (fp - fm) / (2.0 * step);
        xp[c] = x[c];
        xm[c] = x[c];
    }
    return j;
}

/// Damped Newton with sup-norm backtracking. `project` (optional) maps each
/// trial point back into an admissible set before it is evaluated.
inline NewtonResult damped_newton(const VectorMap& f, const MatrixMap& jac, Eigen::VectorXd x,
                                  const NewtonOptions& opts,
                                  const std::function<void(Eigen::VectorXd&)>& project = {}) {
    if (project) project(x);
    Eigen::VectorXd fx = f(x);
    double norm = fx.cwiseAbs().maxCoeff();
    NewtonResult out;
    out.history.push_back(norm);
    for (std::size_t it = 0; it < opts.max_iter && norm > opts.tol; ++it) {
        const Eigen::MatrixXd j = jac(x);
        Eigen::VectorXd dx;
        if (opts.min_norm_solve) {
            dx = j.completeOrthogonalDecomposition().solve(-fx);
        } else {
            dx = j.partialPivLu().solve(-fx);
            if (!dx.allFinite()) dx = j.completeOrthogonalDecomposition().solve(-fx);
        }
        if (!dx.allFinite()) break;

        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd trial;
        Eigen::VectorXd ftrial;
        double tnorm = norm;
        while (step >= opts.min_step) {
            trial = x + step * dx;
            if (project) project(trial);
            ftrial = f(trial);
            tnorm = ftrial.allFinite() ? ftrial.cwiseAbs().maxCoeff() : std::numeric_limits<double>::infinity();
            if (tnorm < (1.0 - 1e-4 * step) * norm) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        out.iterations = it + 1;
        if (!accepted) break;
        x = std::move(trial);
        fx = std::move(ftrial);
        norm = tnorm;
        out.history.push_back(norm);
        if (x.cwiseAbs().maxCoeff() > opts.divergence_bound) break;
    }
    out.x = std::move(x);
    out.residual = norm;
    out.converged = norm <= opts.tol;
    return out;
}

}  // namespace gm
