#pragma once

// INI run configuration for the gm command-line tool.
//
//   [grid]      dim, length_x, length_y, nodes_x, nodes_y
//   [params]    alpha1, alpha2, beta1, beta2, rho, scale1, scale2, literal_homotopy_exponents
//   [constants] C, c0 (optional overrides), max_doublings
//   [solver]    tol, linear_tol, max_iter, eig_tol, relaxation
//   [nodal]     epsilons, tol, seeds, mu, manufactured
//   [degree]    nodes, starts, tol, epsilon, t_steps
//   [run]       seed

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gm/error.hpp"
#include "gm/grid.hpp"
#include "gm/model.hpp"
#include "gm/nodal_solver.hpp"

namespace gm::cli {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct RunConfig {
    int dim = 1;
    double length_x = 1.0;
    double length_y = 1.0;
    std::size_t nodes_x = 101;
    std::size_t nodes_y = 1;

    ProblemParams params;

    std::optional<double> C;
    std::optional<double> c0;
    std::size_t max_doublings = 40;

    double tol = 1e-8;
    double linear_tol = 1e-10;
    std::size_t max_iter = 10000;
    double eig_tol = 1e-10;
    double relaxation = 1.0;

    std::vector<double> epsilons = ContinuationSchedule::halving().epsilons;
    double nodal_tol = 1e-10;
    std::size_t nodal_seeds = 16;
    std::vector<double> mu = {0.1, 0.01, 0.001};
    bool manufactured = false;

    std::size_t degree_nodes = 8;
    std::size_t degree_starts = 64;
    double degree_tol = 1e-10;
    double degree_epsilon = 0.5;
    std::size_t t_steps = 11;

    std::uint64_t seed = 1;

    Grid grid() const {
        return dim == 1 ? build_grid_1d(length_x, nodes_x) : build_grid_2d(length_x, length_y, nodes_x, nodes_y);
    }
};

namespace detail {

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        try {
            std::size_t used = 0;
            const std::string trimmed = item.substr(first);
            out.push_back(std::stod(trimmed, &used));
            if (trimmed.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(key);
        } catch (const std::exception&) {
            throw ConfigError("cannot parse list entry '" + item + "' in " + key);
        }
    }
    if (out.empty()) throw ConfigError(key + " is empty");
    return out;
}

template <class T>
T get(const boost::property_tree::ptree& pt, const std::string& key, T fallback) {
    try {
        return pt.get_child_optional(key) ? pt.get<T>(key) : fallback;
    } catch (const boost::property_tree::ptree_error& e) {
        throw ConfigError("bad value for " + key + ": " + e.what());
    }
}

template <class T>
std::optional<T> get_optional(const boost::property_tree::ptree& pt, const std::string& key) {
    try {
        if (!pt.get_child_optional(key)) return std::nullopt;
        return pt.get<T>(key);
    } catch (const boost::property_tree::ptree_error& e) {
        throw ConfigError("bad value for " + key + ": " + e.what());
    }
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    static const std::vector<std::string> sections = {"grid", "params", "constants", "solver", "nodal", "degree", "run"};
    for (const auto& [name, _] : pt) {
        if (std::find(sections.begin(), sections.end(), name) == sections.end()) {
            throw ConfigError("unknown section [" + name + "]");
        }
    }

    using detail::get;
    RunConfig c;
    c.dim = get(pt, "grid.dim", c.dim);
    c.length_x = get(pt, "grid.length_x", c.length_x);
    c.length_y = get(pt, "grid.length_y", c.length_y);
    c.nodes_x = get(pt, "grid.nodes_x", c.nodes_x);
    c.nodes_y = get(pt, "grid.nodes_y", c.dim == 2 ? c.nodes_x : std::size_t{1});

    ProblemParams& p = c.params;
    p.alpha1 = get(pt, "params.alpha1", p.alpha1);
    p.alpha2 = get(pt, "params.alpha2", p.alpha2);
    p.beta1 = get(pt, "params.beta1", p.beta1);
    p.beta2 = get(pt, "params.beta2", p.beta2);
    p.rho = get(pt, "params.rho", p.rho);
    p.scale1 = get(pt, "params.scale1", p.scale1);
    p.scale2 = get(pt, "params.scale2", p.scale2);
    p.literal_homotopy_exponents = get(pt, "params.literal_homotopy_exponents", p.literal_homotopy_exponents);

    c.C = detail::get_optional<double>(pt, "constants.C");
    c.c0 = detail::get_optional<double>(pt, "constants.c0");
    c.max_doublings = get(pt, "constants.max_doublings", c.max_doublings);

    c.tol = get(pt, "solver.tol", c.tol);
    c.linear_tol = get(pt, "solver.linear_tol", c.linear_tol);
    c.max_iter = get(pt, "solver.max_iter", c.max_iter);
    c.eig_tol = get(pt, "solver.eig_tol", c.eig_tol);
    c.relaxation = get(pt, "solver.relaxation", c.relaxation);

    if (auto s = detail::get_optional<std::string>(pt, "nodal.epsilons")) c.epsilons = detail::parse_list("nodal.epsilons", *s);
    c.nodal_tol = get(pt, "nodal.tol", c.nodal_tol);
    c.nodal_seeds = get(pt, "nodal.seeds", c.nodal_seeds);
    if (auto s = detail::get_optional<std::string>(pt, "nodal.mu")) c.mu = detail::parse_list("nodal.mu", *s);
    c.manufactured = get(pt, "nodal.manufactured", c.manufactured);

    c.degree_nodes = get(pt, "degree.nodes", c.degree_nodes);
    c.degree_starts = get(pt, "degree.starts", c.degree_starts);
    c.degree_tol = get(pt, "degree.tol", c.degree_tol);
    c.degree_epsilon = get(pt, "degree.epsilon", c.degree_epsilon);
    c.t_steps = get(pt, "degree.t_steps", c.t_steps);

    c.seed = get(pt, "run.seed", c.seed);

    if (c.dim != 1 && c.dim != 2) throw ConfigError("grid.dim must be 1 or 2");
    if (c.t_steps < 2) throw ConfigError("degree.t_steps must be at least 2");
    if (c.nodal_seeds == 0 || c.degree_starts == 0) throw ConfigError("seed counts must be positive");
    try {
        (void)c.grid();
        c.params.validate();
        ContinuationSchedule{c.epsilons, c.nodal_tol, true}.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    if (!(c.tol > 0.0 && c.linear_tol > 0.0 && c.eig_tol > 0.0 && c.degree_tol > 0.0)) {
        throw ConfigError("tolerances must be positive");
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration " + path);
    return parse_config(in);
}

}  // namespace gm::cli
