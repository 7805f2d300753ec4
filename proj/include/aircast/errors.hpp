#pragma once

#include <stdexcept>
#include <string>

namespace aircast {

// Base for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad shapes, bad config values, violated preconditions. Exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Filesystem and wire-format problems. Exit code 3.
class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public IoError {
public:
    using IoError::IoError;
};

// Checkpoint or fixture written by an incompatible schema version.
class VersionError : public IoError {
public:
    using IoError::IoError;
};

// NaN/Inf propagation, divergence, domain violations. Exit code 4.
class NumericError : public Error {
public:
    using Error::Error;
};

// Credential / transport failures from the environmental API client.
class CredentialError : public Error {
public:
    using Error::Error;
};

class TransportError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace aircast
