#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cortolam {

enum class ErrorKind {
  Schema,       // missing or malformed columns
  Validation,   // record-level invariant violated
  Parse,        // token could not be parsed
  Reference,    // id refers to nothing
  Io,           // file system
  Degenerate,   // data cannot support the requested computation
  Unavailable,  // derived feature cannot be computed
  Config,
  Model,        // model file malformed or incompatible
  NotFound,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a category so callers (the CLI in particular) can map
/// failures to messages and exit codes without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cortolam
