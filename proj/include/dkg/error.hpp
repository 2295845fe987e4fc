#pragma once

#include <stdexcept>
#include <string>

namespace dkg {

/// Category of a failure; the CLI maps these onto process exit codes.
enum class ErrorKind { usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) {
  return Error(ErrorKind::usage, what);
}
inline Error data_error(const std::string& what) {
  return Error(ErrorKind::data, what);
}
inline Error numeric_error(const std::string& what) {
  return Error(ErrorKind::numeric, what);
}

}  // namespace dkg
