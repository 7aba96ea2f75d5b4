#pragma once

#include <stdexcept>
#include <string>

namespace breathflow {

// Exit-code categories used by the command-line tool. Library code throws
// Error with one of these; the CLI maps them to process exit codes.
enum class ErrorCode : int {
  kInvalidArgument = 3,
  kDataError = 4,
  kValidation = 5,
  kNumerical = 6,
  kIo = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace breathflow
