#pragma once

#include <stdexcept>
#include <string>

namespace cgnn {

// Error categories map one-to-one onto the C API status codes.
enum class ErrorKind {
  kUsage = 1,
  kData = 2,
  kIo = 3,
  kNotFound = 4,
  kInternal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& msg) {
  throw Error(ErrorKind::kUsage, msg);
}
[[noreturn]] inline void throw_data(const std::string& msg) {
  throw Error(ErrorKind::kData, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
  throw Error(ErrorKind::kIo, msg);
}
[[noreturn]] inline void throw_not_found(const std::string& msg) {
  throw Error(ErrorKind::kNotFound, msg);
}

}  // namespace cgnn
