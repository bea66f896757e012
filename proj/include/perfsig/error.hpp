#pragma once

#include <stdexcept>
#include <string>

namespace perfsig {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input could not be opened or read.
class io_error : public error {
public:
    using error::error;
};

/// Input does not match the declared record schema (bad header, mixed timestamp styles).
class schema_error : public error {
public:
    using error::error;
};

/// Invalid simulation or analysis configuration.
class config_error : public error {
public:
    using error::error;
};

/// An operation was called with arguments outside its domain.
class precondition_error : public error {
public:
    using error::error;
};

} // namespace perfsig
