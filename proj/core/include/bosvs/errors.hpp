#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bosvs {

/// Base class for every error raised by the solver library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A_i^T A_i is numerically singular for block `block`.
class RankDeficient : public Error {
public:
    RankDeficient(std::size_t block, double smallest, double largest)
        : Error("block " + std::to_string(block) + " has rank-deficient Gram matrix (smallest eigenvalue " +
                std::to_string(smallest) + ", largest " + std::to_string(largest) + ")"),
          block_(block) {}
    std::size_t block() const noexcept { return block_; }

private:
    std::size_t block_;
};

class UnsupportedSubproblem : public Error {
public:
    using Error::Error;
};

class LineSearchDiverged : public Error {
public:
    using Error::Error;
};

class InnerIterationCap : public Error {
public:
    using Error::Error;
};

class CGNotConverged : public Error {
public:
    using Error::Error;
};

class MissingReference : public Error {
public:
    using Error::Error;
};

class MaxItersReached : public Error {
public:
    using Error::Error;
};

/// Generator configuration with unsupported dimensions.
class BadDims : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace bosvs
