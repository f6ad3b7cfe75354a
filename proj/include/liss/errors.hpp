#pragma once

#include <stdexcept>
#include <string>

namespace liss {

/// Base of every error raised by the engine. `kind()` is a short stable tag
/// used by the command line tool for its machine-parsable error line.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string &message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string &kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define LISS_DEFINE_ERROR(Name, tag)                                            \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string &message) : Error(tag, message) {}         \
  }

LISS_DEFINE_ERROR(ConfigError, "config");
LISS_DEFINE_ERROR(InputError, "input");
LISS_DEFINE_ERROR(LookupError, "lookup");
LISS_DEFINE_ERROR(IncompatibleSnapshotError, "incompatible_snapshot");
LISS_DEFINE_ERROR(OrderingError, "ordering");
LISS_DEFINE_ERROR(StateError, "state");
LISS_DEFINE_ERROR(TerminalStateError, "terminal_state");
LISS_DEFINE_ERROR(DatasetError, "dataset");
LISS_DEFINE_ERROR(NumericError, "numeric");
LISS_DEFINE_ERROR(StallError, "stall");
LISS_DEFINE_ERROR(IoError, "io");

#undef LISS_DEFINE_ERROR

} // namespace liss
