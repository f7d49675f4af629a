#pragma once

#include <stdexcept>
#include <string>

namespace depthood {

// Error classes map one-to-one onto CLI exit codes (see tools/).
struct InputError : std::invalid_argument {
  explicit InputError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct UsageError : std::logic_error {
  explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FileError : std::runtime_error {
  explicit FileError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace depthood
