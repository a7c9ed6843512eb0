#pragma once

#include <stdexcept>
#include <string>

namespace veinpad {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched sizes or shapes (buffer lengths, image dimensions, feature widths).
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Violated numeric precondition (non-unit normal, value out of range, bad config).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Malformed file content (image headers, manifests, model files).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Filesystem-level failure (missing file, short read, failed write).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Classifier training cannot proceed (single-class labels, no samples).
class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& msg) : Error(msg) {}
};

// Degenerate score range in min-max normalization.
class NormalizationError : public Error {
public:
    explicit NormalizationError(const std::string& msg) : Error(msg) {}
};

} // namespace veinpad
