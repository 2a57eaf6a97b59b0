#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sppca {

// Base class for every error raised by this library. Callers that want a
// single catch site can catch sppca::Error; everything below refines it.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// Raised by the Cholesky factorization when a pivot falls below the
// positivity floor. Carries the index of the offending pivot.
class NotPositiveDefinite : public Error {
public:
    NotPositiveDefinite(const std::string& msg, std::size_t pivot)
        : Error(msg), pivot_index(pivot) {}
    std::size_t pivot_index;
};

class NotSymmetric : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

// Householder chain vector with norm too small to define a reflection.
class DegenerateVector : public Error {
public:
    using Error::Error;
};

// Two singular values coincide to the point where the repulsion term
// log|sigma_q^2 - sigma_r^2| is meaningless.
class DegenerateSpectrum : public Error {
public:
    using Error::Error;
};

class Overflow : public Error {
public:
    using Error::Error;
};

// Maximum-likelihood fit where a retained eigenvalue does not exceed the
// estimated noise floor, so the loading magnitude would be imaginary.
class RankDeficient : public Error {
public:
    using Error::Error;
};

class ZeroEigenvalue : public Error {
public:
    using Error::Error;
};

class InitializationFailure : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t row, std::size_t col)
        : Error(msg), row(row), col(col) {}
    std::size_t row;  // 1-based line number
    std::size_t col;  // 1-based field number
};

class ConstantColumn : public Error {
public:
    using Error::Error;
};

}  // namespace sppca
