#include "craft/error.hpp"

namespace craft {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kLookup: return "lookup";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kIngest: return "ingest";
    case ErrorKind::kTranscription: return "transcription";
    case ErrorKind::kBackend: return "backend";
    case ErrorKind::kBackendContract: return "backend-contract";
    case ErrorKind::kExtraction: return "extraction";
    case ErrorKind::kPrerequisite: return "prerequisite";
    case ErrorKind::kRemap: return "remap";
    case ErrorKind::kEvaluation: return "evaluation";
  }
  return "unknown";
}

void throw_error(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + " error: " + what);
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput:
    case ErrorKind::kValidation:
      return 2;
    case ErrorKind::kBackend:
    case ErrorKind::kBackendContract:
    case ErrorKind::kTranscription:
    case ErrorKind::kExtraction:
      return 3;
    case ErrorKind::kPrerequisite:
      return 4;
    default:
      return 1;
  }
}

}  // namespace craft
