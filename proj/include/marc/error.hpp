#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace marc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Invalid input data (non-finite values, bad time stamps, ...).
class DataError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A simulated trajectory (ODE or reservoir) left the finite range.
class DivergenceError : public Error {
public:
    using Error::Error;
};

class SingularSystemError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::size_t epoch)
        : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

class MetricError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage was asked to run before its inputs exist, or a report
/// was requested from an incomplete run.
class ManifestError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace marc
