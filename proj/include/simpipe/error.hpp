#pragma once

#include <stdexcept>
#include <string>

namespace simpipe {

/// Base of every exception thrown by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (CLI exit code 2).
class config_error : public error {
public:
    using error::error;
};

/// A file on disk could not be parsed.
class format_error : public error {
public:
    using error::error;
};

/// Filesystem failure while reading or writing stage outputs.
class io_error : public error {
public:
    using error::error;
};

/// A pipeline stage could not complete (CLI exit code 3).
class stage_error : public error {
public:
    using error::error;
};

/// A stage trigger timed out without observing any input (CLI exit code 4).
class trigger_timeout : public error {
public:
    using error::error;
};

/// A precondition or invariant of an input value does not hold.
class invariant_error : public error {
public:
    using error::error;
};

} // namespace simpipe
