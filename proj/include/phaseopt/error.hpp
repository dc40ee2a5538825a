#pragma once

#include <stdexcept>
#include <string>

namespace phaseopt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric parameter is outside its admissible range (e.g. n_r <= 0).
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Matrix or vector dimensions disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An enumeration (selection matrix, brute force) would exceed its configured cap.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (session files, labels, prices).
class DataError : public Error {
public:
    using Error::Error;
};

/// A solver returned a result that breaks an internal contract.
class ContractError : public Error {
public:
    using Error::Error;
};

/// The conic solver failed (infeasible, iteration limit, numerical trouble).
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace phaseopt
