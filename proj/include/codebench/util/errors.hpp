#pragma once

#include <stdexcept>
#include <string>

namespace codebench {

/// Invalid or inconsistent configuration; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Execution or environment infrastructure broke down; maps to CLI exit code 3.
class InfrastructureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace codebench
