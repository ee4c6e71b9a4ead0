#pragma once

#include <stdexcept>
#include <string>

namespace difflab {

// Error categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  config,     // invalid configuration or arguments
  contract,   // violated precondition (shape, missing oracle, ...)
  index,      // timestep or element index out of range
  numeric,    // NaN/Inf encountered
  io,         // file system / parse failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(ErrorKind::contract, w) {}
};
struct IndexError : Error {
  explicit IndexError(const std::string& w) : Error(ErrorKind::index, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};

}  // namespace difflab
