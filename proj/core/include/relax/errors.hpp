#pragma once

#include <stdexcept>
#include <string>

namespace relax {

/// Invalid dimensions, ranges, or experiment settings. CLI exit code 1.
class config_error : public std::invalid_argument {
public:
    explicit config_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Unreadable, truncated, or malformed input files. CLI exit code 2.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite loss or state encountered at run time. CLI exit code 3.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace relax
