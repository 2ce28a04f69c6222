#pragma once

#include <stdexcept>
#include <string>

namespace idlelab {

// Base for all idlelab errors; CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Queue parameters with utilization >= 1 (or offered load >= servers).
class StabilityError : public Error {
public:
    using Error::Error;
};

// Requested a closed form the model cannot provide (e.g. per-core idle law
// for M/M/c, which depends on the dispatch policy).
class UnsupportedModelError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Invariant violation in a constructed object (table, report, config).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed input document; message names the offending row.
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace idlelab
