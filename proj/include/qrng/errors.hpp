#pragma once

#include <stdexcept>
#include <string>

namespace qrng {

/// Invalid arguments, malformed configuration, or data that fails a
/// semantic check (e.g. a channel with no commitment pattern).  The CLI
/// maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Failure to read, parse, or write a file (missing path, bad magic,
/// truncated payload, malformed records).  The CLI maps this to exit code 3.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qrng
