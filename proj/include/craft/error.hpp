#pragma once

#include <stdexcept>
#include <string>

namespace craft {

/// Error categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidInput,
  kValidation,
  kLookup,
  kIo,
  kIngest,
  kTranscription,
  kBackend,
  kBackendContract,
  kExtraction,
  kPrerequisite,
  kRemap,
  kEvaluation,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by backend clients. Carries the role and, when known, the
/// (query_id, video_id) the call was made for.
class BackendError : public Error {
 public:
  BackendError(ErrorKind kind, std::string role, const std::string& what)
      : Error(kind, what), role_(std::move(role)) {}

  const std::string& role() const noexcept { return role_; }

 private:
  std::string role_;
};

[[noreturn]] void throw_error(ErrorKind kind, const std::string& what);

/// Exit codes: 0 success, 2 validation, 3 backend, 4 prerequisite, 1 anything else.
int exit_code_for(ErrorKind kind);

}  // namespace craft
