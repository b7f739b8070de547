#pragma once

#include <stdexcept>
#include <string>

namespace rbsr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid SummaryConfig, width mismatch between aggregates, bad parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Caller broke an operation's documented precondition (inverted bounds,
// unsorted input, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

class OutOfRangeError : public Error {
public:
    using Error::Error;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class StorageError : public Error {
public:
    using Error::Error;
};

// A window handle was used against a store state other than the one it
// was opened on.
class StaleWindowError : public Error {
public:
    using Error::Error;
};

} // namespace rbsr
