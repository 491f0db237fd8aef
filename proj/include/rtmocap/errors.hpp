#pragma once

#include <stdexcept>
#include <string>

namespace rtmocap {

// File/format problems found while reading external data. CLI maps these
// (and ValidationError) to exit code 1.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A bone vector collapsed below the degeneracy threshold while computing
// an inter-bone angle.
class DegenerateGeometryError : public std::runtime_error {
public:
    explicit DegenerateGeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value produced by numeric code (training divergence etc.).
// CLI maps these to exit code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rtmocap
