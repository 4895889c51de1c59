#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace semshift {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (bad record, bad distribution, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed binary or text payload. `offset()` is the byte offset (binary)
/// or line number (text) where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

class UnsupportedVersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class IoError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

class IncompatibleError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

/// Zero-norm vectors, empty inputs and similar geometry that has no answer.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Clustering cannot be carried out as configured (e.g. fewer points than k).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Silhouette with one cluster, correlation with zero variance.
class UndefinedScoreError : public Error {
public:
    using Error::Error;
};

}  // namespace semshift
