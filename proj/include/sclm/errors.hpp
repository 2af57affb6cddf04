#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sclm {

/// Bad paths, missing directories, invalid option values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data. `where` names the file; `position` is a byte offset
/// or line number depending on the format.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string where, std::size_t position, const std::string& what)
      : std::runtime_error(where + ":" + std::to_string(position) + ": " + what),
        where_(std::move(where)),
        position_(position) {}

  const std::string& where() const noexcept { return where_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::string where_;
  std::size_t position_;
};

/// Numerical failure during training (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sclm
