#pragma once

#include <stdexcept>
#include <string>

namespace handcloud {

/// Failure category; the CLI maps these onto its exit codes.
enum class ErrorKind { Usage = 1, Data = 2, Numerical = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_data(const std::string& what) {
  throw Error(ErrorKind::Data, what);
}

[[noreturn]] inline void fail_usage(const std::string& what) {
  throw Error(ErrorKind::Usage, what);
}

[[noreturn]] inline void fail_numerical(const std::string& what) {
  throw Error(ErrorKind::Numerical, what);
}

}  // namespace handcloud
