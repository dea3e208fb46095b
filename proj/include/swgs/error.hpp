#pragma once

#include <stdexcept>
#include <string>

namespace swgs {

// Invalid inputs to a domain type or operation (allocation, boundaries,
// schedules, dimensions).
class ConstraintError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The treatment effect cannot be estimated from the data available at an
// analysis (all-control or all-treated cells, rank-deficient normal equations).
class NonEstimableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class RootNotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace swgs
