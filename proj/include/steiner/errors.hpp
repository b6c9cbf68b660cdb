#pragma once

#include <stdexcept>
#include <string>

namespace steiner {

enum class ErrorKind {
  invalid_input,          // malformed data: bad polygon, bad parameter
  precondition_violation, // a documented precondition does not hold
  construction_failure,   // an iterative construction did not converge
  evaluation_out_of_range,
  precision_failure,      // a result could not be certified to tolerance
  step_failure,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

// Optional observer for non-fatal notices (orientation fixes, degraded
// approximations). Null by default so the library stays quiet.
using NoticeFn = void (*)(const std::string&);
void set_notice_handler(NoticeFn fn);
void notice(const std::string& message);

}  // namespace steiner
