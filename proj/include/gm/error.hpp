#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A nonlinearity hit a zero denominator.
class SingularityError : public Error {
public:
    SingularityError(const std::string& what, std::size_t node)
        : Error(what + " (node " + std::to_string(node) + ")"), node_(node) {}

    std::size_t node() const noexcept { return node_; }

private:
    std::size_t node_;
};

/// An iterative method stopped before reaching its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : Error(what), history_(std::move(history)) {}

    const std::vector<double>& residual_history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

/// One of the envelope inequalities for the auxiliary solutions failed.
class EnvelopeError : public Error {
public:
    EnvelopeError(std::string inequality, std::size_t node, double margin)
        : Error("envelope '" + inequality + "' violated at node " + std::to_string(node) +
                " (margin " + std::to_string(margin) + ")"),
          inequality_(std::move(inequality)), node_(node), margin_(margin) {}

    const std::string& inequality() const noexcept { return inequality_; }
    std::size_t node() const noexcept { return node_; }
    double margin() const noexcept { return margin_; }

private:
    std::string inequality_;
    std::size_t node_;
    double margin_;
};

/// A map vanishes (within tolerance) on the boundary of the region a degree is requested on.
class AdmissibilityError : public Error {
public:
    AdmissibilityError(const std::string& what, double margin)
        : Error(what), margin_(margin) {}

    double margin() const noexcept { return margin_; }

private:
    double margin_;
};

}  // namespace gm
