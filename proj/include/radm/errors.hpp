#pragma once

#include <stdexcept>
#include <string>

namespace radm {

/// Bad experiment configuration or CLI usage. CLI exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// File or dataset problem (missing, malformed, wrong magic). CLI exit code 3.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: non-convergence, divergence, non-finite values. CLI exit code 4.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace radm
