#pragma once

#include <stdexcept>
#include <string>

namespace qcd {

// Raised when an argument violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A K-L divergence could not be shown finite and positive.
class DivergenceInfinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical search (root, bracket, bisection) did not converge.
class SearchFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A requested Monte Carlo quantity cannot be estimated with the given budget.
class Infeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

} // namespace qcd
