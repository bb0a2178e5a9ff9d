#pragma once

#include <stdexcept>
#include <string>

namespace vocabforge {

// Error categories map to CLI exit codes: everything except Io is a
// validation-class failure (exit 1); Io is a runtime failure (exit 2).
enum class ErrorKind {
  Input,
  Config,
  Parse,
  Binding,
  Validation,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error input_error(const std::string& msg) { return Error(ErrorKind::Input, msg); }
inline Error config_error(const std::string& msg) { return Error(ErrorKind::Config, msg); }
inline Error parse_error(const std::string& msg) { return Error(ErrorKind::Parse, msg); }
inline Error binding_error(const std::string& msg) { return Error(ErrorKind::Binding, msg); }
inline Error validation_error(const std::string& msg) { return Error(ErrorKind::Validation, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::Io, msg); }

}  // namespace vocabforge
