#pragma once

#include <stdexcept>
#include <string>

namespace ldmres {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor dimension / channel mismatches and invalid geometry.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// NaN / Inf where finite values are required.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Invalid network or training configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Malformed text input (config files, manifests, image headers).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Filesystem-level failures.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Weight-file errors carry a machine-checkable reason.
enum class ModelFileStatus {
    BadMagic,
    VersionMismatch,
    CrcMismatch,
    Truncated,
    BadRecord,
};

class ModelFileError : public Error {
public:
    ModelFileError(ModelFileStatus status, const std::string& msg)
        : Error(msg), status_(status) {}
    ModelFileStatus status() const { return status_; }

private:
    ModelFileStatus status_;
};

}  // namespace ldmres
