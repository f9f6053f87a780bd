#pragma once

#include <stdexcept>
#include <string>

namespace psm {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid parameter values, malformed configuration, schema mismatches.
// CLI maps these to exit code 2.
struct ParamError : Error {
    explicit ParamError(const std::string& msg) : Error(msg) {}
};

// A precondition on the data was violated (e.g. querying a user that is
// not a participant of the cascade). Exit code 2 as well.
struct DomainError : ParamError {
    explicit DomainError(const std::string& msg) : ParamError(msg) {}
};

// Unreadable/unwritable streams and files. CLI maps these to exit code 1.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// A "cannot happen" condition; indicates a bug. CLI maps these to exit code 3.
struct InternalError : Error {
    explicit InternalError(const std::string& msg) : Error(msg) {}
};

}  // namespace psm
