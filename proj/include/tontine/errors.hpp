#pragma once

#include <stdexcept>
#include <string>

namespace tontine {

// Base class for every error raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file (bad header, unparseable field, duplicate row).
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input that violates a documented precondition
// (non-rectangular table, probability outside [0,1), bad config value).
struct ValidationError : Error {
    using Error::Error;
};

// Lookup outside the stored grid; message names the first missing cell.
struct RangeError : Error {
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// Caller broke an API contract (weights off the simplex, size mismatch).
struct ContractError : Error {
    using Error::Error;
};

// Model fitting failed (zero rates, rank-deficient regression).
struct CalibrationError : Error {
    using Error::Error;
};

// Configuration file missing keys, inconsistent, or referencing absent files.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace tontine
