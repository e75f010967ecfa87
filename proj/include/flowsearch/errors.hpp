#pragma once

#include <stdexcept>
#include <string>

namespace flowsearch {

/// Invalid user input: malformed space, config, or out-of-domain value.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Persistent storage could not be read or written, or is corrupted.
class StorageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wire-protocol violation on an external evaluator connection.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace flowsearch
