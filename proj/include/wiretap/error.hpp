#pragma once

#include <stdexcept>
#include <string>

namespace wiretap {

// Caller passed something inconsistent (widths, dimensions, empty lists, bad config).
class usage_error : public std::invalid_argument {
public:
    explicit usage_error(const std::string& what) : std::invalid_argument(what) {}
};

// Mathematically undefined request, e.g. inverting zero.
class domain_error : public std::domain_error {
public:
    explicit domain_error(const std::string& what) : std::domain_error(what) {}
};

// Degenerate numeric input at inference time (zero codeword before normalization).
class degenerate_input_error : public std::runtime_error {
public:
    explicit degenerate_input_error(const std::string& what) : std::runtime_error(what) {}
};

// Optimization diverged (NaN loss/gradient).
class training_error : public std::runtime_error {
public:
    explicit training_error(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint/config hash mismatch or a corrupt artifact on disk.
class integrity_error : public std::runtime_error {
public:
    explicit integrity_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wiretap
