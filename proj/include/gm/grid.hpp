#pragma once

// Uniform box grids, nodal fields, and the Neumann operator -Δ_h + I.
//
// Nodes are numbered x-fastest: index = i + nx * j. Boundary conditions are
// zero-flux, realized with mirrored ghost nodes. The mirrored operator A has
// rows summing to exactly one (constants are fixed points) and is symmetric
// with respect to the trapezoid-weighted inner product; the stored stiffness
// K = W A is the symmetric positive definite matrix used by the solvers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gm/error.hpp"

namespace gm {

class Grid {
public:
    Grid(int dim, std::array<double, 2> extents, std::array<std::size_t, 2> nodes)
        : dim_(dim), extents_(extents), nodes_(nodes) {
        if (dim != 1 && dim != 2) {
            throw InvalidArgument("grid dimension must be 1 or 2, got " + std::to_string(dim));
        }
        if (dim == 1) {
            extents_[1] = 0.0;
            nodes_[1] = 1;
        }
        for (int a = 0; a < dim; ++a) {
            if (!(extents_[a] > 0.0) || !std::isfinite(extents_[a])) {
                throw InvalidArgument("grid extents must be positive and finite");
            }
            if (nodes_[a] < 3) {
                throw InvalidArgument("grid needs at least 3 nodes per axis");
            }
            spacing_[a] = extents_[a] / static_cast<double>(nodes_[a] - 1);
        }
        if (dim == 1) spacing_[1] = 1.0;
    }

    int dim() const noexcept { return dim_; }
    double extent(int axis) const { return extents_.at(axis); }
    std::size_t nodes(int axis) const { return nodes_.at(axis); }
    double spacing(int axis) const { return spacing_.at(axis); }
    std::size_t size() const noexcept { return nodes_[0] * nodes_[1]; }

    /// Product of the spacings over the active axes.
    double cell_measure() const noexcept {
        return dim_ == 1 ? spacing_[0] : spacing_[0] * spacing_[1];
    }

    /// Lebesgue measure of the box.
    double volume() const noexcept { return dim_ == 1 ? extents_[0] : extents_[0] * extents_[1]; }

    std::size_t index(std::size_t i, std::size_t j = 0) const noexcept { return i + nodes_[0] * j; }

    std::array<std::size_t, 2> multi_index(std::size_t k) const noexcept {
        return {k % nodes_[0], k / nodes_[0]};
    }

    /// Coordinates of node k; the second entry is zero in 1D.
    std::array<double, 2> coordinate(std::size_t k) const noexcept {
        const auto [i, j] = multi_index(k);
        return {spacing_[0] * static_cast<double>(i),
                dim_ == 1 ? 0.0 : spacing_[1] * static_cast<double>(j)};
    }

    /// Trapezoid quadrature weight of node k (halved once per boundary axis).
    double weight(std::size_t k) const noexcept {
        const auto [i, j] = multi_index(k);
        double w = cell_measure();
        if (i == 0 || i + 1 == nodes_[0]) w *= 0.5;
        if (dim_ == 2 && (j == 0 || j + 1 == nodes_[1])) w *= 0.5;
        return w;
    }

    bool operator==(const Grid&) const = default;

private:
    int dim_;
    std::array<double, 2> extents_;
    std::array<std::size_t, 2> nodes_;
    std::array<double, 2> spacing_{1.0, 1.0};
};

inline Grid build_grid(int dim, std::span<const double> extents, std::span<const std::size_t> nodes) {
    if (dim != 1 && dim != 2) {
        throw InvalidArgument("grid dimension must be 1 or 2, got " + std::to_string(dim));
    }
    if (extents.size() < static_cast<std::size_t>(dim) || nodes.size() < static_cast<std::size_t>(dim)) {
        throw InvalidArgument("need one extent and one node count per axis");
    }
    std::array<double, 2> e{extents[0], dim == 2 ? extents[1] : 0.0};
    std::array<std::size_t, 2> n{nodes[0], dim == 2 ? nodes[1] : std::size_t{1}};
    return Grid(dim, e, n);
}

inline Grid build_grid_1d(double length, std::size_t nodes) {
    return Grid(1, {length, 0.0}, {nodes, 1});
}

inline Grid build_grid_2d(double lx, double ly, std::size_t nx, std::size_t ny) {
    return Grid(2, {lx, ly}, {nx, ny});
}

/// One real value per grid node.
class Field {
public:
    explicit Field(Grid grid, double value = 0.0)
        : grid_(std::move(grid)), values_(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid_.size()), value)) {}

    Field(Grid grid, Eigen::VectorXd values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (static_cast<std::size_t>(values_.size()) != grid_.size()) {
            throw InvalidArgument("field value count does not match grid node count");
        }
        if (!values_.allFinite()) throw InvalidArgument("field values must be finite");
    }

    template <class F>
    static Field from_function(const Grid& grid, F&& f) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto [x, y] = grid.coordinate(k);
            v[static_cast<Eigen::Index>(k)] = f(x, y);
        }
        return Field(grid, std::move(v));
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

    double operator[](std::size_t k) const { return values_[static_cast<Eigen::Index>(k)]; }
    double& operator[](std::size_t k) { return values_[static_cast<Eigen::Index>(k)]; }

    const Eigen::VectorXd& values() const noexcept { return values_; }
    Eigen::VectorXd& values() noexcept { return values_; }

    double max() const { return values_.maxCoeff(); }
    double min() const { return values_.minCoeff(); }
    double sup_norm() const { return values_.size() == 0 ? 0.0 : values_.cwiseAbs().maxCoeff(); }
    bool all_finite() const { return values_.allFinite(); }

    /// Nodewise map producing a new field on the same grid.
    template <class F>
    Field map(F&& f) const {
        Field out(grid_);
        for (Eigen::Index k = 0; k < values_.size(); ++k) out.values_[k] = f(values_[k]);
        return out;
    }

    Field operator-() const { return Field(grid_, Eigen::VectorXd(-values_)); }
    Field& operator+=(const Field& o) { check_same(o); values_ += o.values_; return *this; }
    Field& operator-=(const Field& o) { check_same(o); values_ -= o.values_; return *this; }
    Field& operator*=(double s) { values_ *= s; return *this; }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }
    friend Field operator*(Field a, double s) { return a *= s; }

private:
    void check_same(const Field& o) const {
        if (!(grid_ == o.grid_)) throw InvalidArgument("fields live on different grids");
    }

    Grid grid_;
    Eigen::VectorXd values_;
};

inline double sup_distance(const Field& a, const Field& b) { return (a - b).sup_norm(); }

/// Trapezoid-rule integral of a field over the grid box.
inline double integrate(const Field& f) {
    const Grid& g = f.grid();
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) s += g.weight(k) * f[k];
    return s;
}

/// Symmetric weighted graph Laplacian plus a diagonal mass term:
/// (K x)_r = sum_p conductance_p (x_r - x_col_p) + mass_r x_r.
/// Storing conductances instead of a diagonal keeps K·1 = mass exact in
/// floating point, which is what makes constants exact fixed points of A.
struct StiffnessMatrix {
    std::size_t rows = 0;
    std::vector<std::size_t> row_start;  // size rows + 1
    std::vector<std::size_t> col;
    std::vector<double> conductance;
    Eigen::VectorXd mass;

    void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
        y.resize(static_cast<Eigen::Index>(rows));
        for (std::size_t r = 0; r < rows; ++r) {
            const double xr = x[static_cast<Eigen::Index>(r)];
            double s = 0.0;
            for (std::size_t p = row_start[r]; p < row_start[r + 1]; ++p) {
                s += conductance[p] * (xr - x[static_cast<Eigen::Index>(col[p])]);
            }
            y[static_cast<Eigen::Index>(r)] = s + mass[static_cast<Eigen::Index>(r)] * xr;
        }
    }

    double diagonal(std::size_t r) const {
        double d = mass[static_cast<Eigen::Index>(r)];
        for (std::size_t p = row_start[r]; p < row_start[r + 1]; ++p) d += conductance[p];
        return d;
    }

    Eigen::MatrixXd to_dense() const {
        const auto n = static_cast<Eigen::Index>(rows);
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto ri = static_cast<Eigen::Index>(r);
            m(ri, ri) = diagonal(r);
            for (std::size_t p = row_start[r]; p < row_start[r + 1]; ++p) {
                m(ri, static_cast<Eigen::Index>(col[p])) -= conductance[p];
            }
        }
        return m;
    }
};

/// A = -Δ_h + I + diag(potential) with mirrored zero-flux boundary rows.
class NeumannOperator {
public:
    NeumannOperator(Grid grid, StiffnessMatrix stiffness, Eigen::VectorXd weights)
        : grid_(std::move(grid)), stiffness_(std::move(stiffness)), weights_(std::move(weights)) {}

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return grid_.size(); }

    /// Symmetric positive definite K = W A.
    const StiffnessMatrix& stiffness() const noexcept { return stiffness_; }

    /// Trapezoid weights W (diagonal).
    const Eigen::VectorXd& weights() const noexcept { return weights_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        Eigen::VectorXd y;
        stiffness_.multiply(x, y);
        return y.cwiseQuotient(weights_);
    }

    Field apply(const Field& f) const { return Field(f.grid(), apply(f.values())); }

    /// Dense A (not symmetric in the Euclidean sense).
    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd k = stiffness_.to_dense();
        for (Eigen::Index r = 0; r < k.rows(); ++r) k.row(r) /= weights_[r];
        return k;
    }

    Eigen::MatrixXd dense_stiffness() const { return stiffness_.to_dense(); }

private:
    Grid grid_;
    StiffnessMatrix stiffness_;
    Eigen::VectorXd weights_;
};

namespace detail {

// Mirrored second difference along one axis at position i of n: appends
// (neighbor offset, coefficient of -d²/dx² in the row) pairs.
inline void axis_stencil(std::size_t i, std::size_t n, double inv_h2,
                         std::vector<std::pair<long, double>>& out) {
    if (i == 0) {
        out.emplace_back(+1, 2.0 * inv_h2);
    } else if (i + 1 == n) {
        out.emplace_back(-1, 2.0 * inv_h2);
    } else {
        out.emplace_back(-1, inv_h2);
        out.emplace_back(+1, inv_h2);
    }
}

}  // namespace detail

/// Assembles -Δ_h + I (+ diag(potential) if given) with zero-flux boundaries.
inline NeumannOperator assemble_neumann_operator(const Grid& grid, const Field* potential = nullptr) {
    if (potential && !(potential->grid() == grid)) {
        throw InvalidArgument("potential lives on a different grid");
    }
    const std::size_t n = grid.size();
    StiffnessMatrix k;
    k.rows = n;
    k.row_start.reserve(n + 1);
    k.row_start.push_back(0);
    k.mass.resize(static_cast<Eigen::Index>(n));
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));

    std::vector<std::pair<long, double>> xs, ys;
    for (std::size_t node = 0; node < n; ++node) {
        const auto [i, j] = grid.multi_index(node);
        const double wk = grid.weight(node);
        w[static_cast<Eigen::Index>(node)] = wk;
        k.mass[static_cast<Eigen::Index>(node)] = wk * (1.0 + (potential ? (*potential)[node] : 0.0));

        xs.clear();
        ys.clear();
        const double hx = grid.spacing(0);
        detail::axis_stencil(i, grid.nodes(0), 1.0 / (hx * hx), xs);
        if (grid.dim() == 2) {
            const double hy = grid.spacing(1);
            detail::axis_stencil(j, grid.nodes(1), 1.0 / (hy * hy), ys);
        }

        // Columns in increasing order: y-, x-, x+, y+.
        auto push = [&](std::size_t c, double a) {
            k.col.push_back(c);
            k.conductance.push_back(wk * a);
        };
        for (auto [off, a] : ys) if (off < 0) push(grid.index(i, j - 1), a);
        for (auto [off, a] : xs) if (off < 0) push(grid.index(i - 1, j), a);
        for (auto [off, a] : xs) if (off > 0) push(grid.index(i + 1, j), a);
        for (auto [off, a] : ys) if (off > 0) push(grid.index(i, j + 1), a);
        k.row_start.push_back(k.col.size());
    }
    return NeumannOperator(grid, std::move(k), std::move(w));
}

/// CSV with a header line, then one row per node: coordinates then value.
inline void write_csv(std::ostream& os, const Field& f) {
    const Grid& g = f.grid();
    os << (g.dim() == 1 ? "x,value\n" : "x,y,value\n");
    char buf[128];
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto [x, y] = g.coordinate(k);
        if (g.dim() == 1) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, f[k]);
        } else {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x, y, f[k]);
        }
        os << buf;
    }
}

}  // namespace gm
