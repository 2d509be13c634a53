#pragma once

#include <stdexcept>
#include <string>

namespace lle {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Vector/matrix sizes that do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Index or timestep outside its valid range.
class BoundsError : public Error {
public:
    using Error::Error;
};

// Malformed array file; carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Invalid configuration, operator spec, or parameter combination.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Numerical breakdown: non-PD matrix, negative radicand, singular solve.
class NumericError : public Error {
public:
    using Error::Error;
};

// Inner optimizer diverged.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Coefficient training produced a non-finite loss.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& what, int timestep)
        : Error(what + " (timestep " + std::to_string(timestep) + ")"), timestep_(timestep) {}
    int timestep() const noexcept { return timestep_; }

private:
    int timestep_;
};

}  // namespace lle
