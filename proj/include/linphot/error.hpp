#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace linphot {

enum class ErrorKind {
  invalid_parameter,
  undefined_statistic,
  insufficient_data,
  insufficient_design,
  unsupported_order,
  unsupported_oracle,
  singular_fit,
  config,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::undefined_statistic: return "undefined-statistic";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::insufficient_design: return "insufficient-design";
    case ErrorKind::unsupported_order: return "unsupported-order";
    case ErrorKind::unsupported_oracle: return "unsupported-oracle";
    case ErrorKind::singular_fit: return "singular-fit";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace detail
}  // namespace linphot
