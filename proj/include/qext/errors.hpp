#pragma once

#include <stdexcept>
#include <string>

namespace qext {

// every library error carries a short kind tag so the cli can map it to an exit code
class error : public std::runtime_error {
 public:
  error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define QEXT_ERROR(name)                                                  \
  class name : public error {                                             \
   public:                                                                \
    explicit name(const std::string& what) : error(#name, what) {}        \
  };

QEXT_ERROR(config_error)
QEXT_ERROR(domain_error)
QEXT_ERROR(inversion_error)
QEXT_ERROR(decode_error)
QEXT_ERROR(argument_error)
QEXT_ERROR(protocol_error)
QEXT_ERROR(protocol_order_error)
QEXT_ERROR(state_consumed_error)
QEXT_ERROR(consumed_error)
QEXT_ERROR(capability_error)
QEXT_ERROR(session_error)
QEXT_ERROR(restore_error)

#undef QEXT_ERROR

}  // namespace qext
