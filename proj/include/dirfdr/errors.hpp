#pragma once

#include <stdexcept>
#include <string>

namespace dirfdr {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed or inconsistent input data (files, dimensions, response values).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A solver failed to produce a usable answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dirfdr
