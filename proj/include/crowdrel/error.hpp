#pragma once

#include <stdexcept>
#include <string>

namespace crowdrel {

enum class ErrorKind {
  parse,
  dimension,
  label,
  duplicate,
  validation,
  numerical,
  io,
  argument,
};

const char* error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace crowdrel
