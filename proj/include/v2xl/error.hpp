#pragma once

#include <stdexcept>
#include <string>

namespace v2xl {

// Each category maps to a distinct CLI exit code.
enum class ErrorKind : int {
  config = 2,
  io = 3,
  invalid_pose = 4,
  frame = 5,
  shape = 6,
  ratio = 7,
  format = 8,
  protocol = 9,
  truncation = 10,
  version = 11,
  size = 12,
  routing = 13,
  sync_timeout = 14,
  measurement = 15,
  simulation = 16,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace v2xl
