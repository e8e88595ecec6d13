#pragma once

#include <stdexcept>
#include <string>

namespace goexplore {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (stepping a finished episode,
// asking for neighbors of a downscaled cell, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

// A serialized artifact (snapshot, checkpoint) has the wrong magic, version
// or configuration hash, or is truncated.
class FormatError : public Error {
public:
    using Error::Error;
};

// A configuration value failed validation. `path()` is the dotted field path,
// e.g. "selection.eps1".
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path + ": " + what), _path(std::move(path)) {}

    const std::string& path() const noexcept { return _path; }

private:
    std::string _path;
};

// Stored data disagrees with what replaying it produces.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Not enough qualifying inputs (demonstrations, samples, ...).
class ShortfallError : public Error {
public:
    using Error::Error;
};

} // namespace goexplore
