#pragma once

#include <stdexcept>
#include <string>

namespace mrn {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: bad arguments, violated preconditions.
struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

// Operator received tensors with incompatible shapes.
struct ShapeError : UsageError {
    explicit ShapeError(const std::string& msg) : UsageError(msg) {}
};

// A NaN or Inf crossed an operator boundary.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Invalid run configuration.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Dataset cannot satisfy the requested episode shape, or is internally broken.
struct DatasetError : Error {
    explicit DatasetError(const std::string& msg) : Error(msg) {}
};

// On-disk format violation (bad magic, truncation, ...).
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// I/O failure.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace mrn
