#pragma once
#include <stdexcept>
#include <string>

namespace avtrack {

/** Error thrown when a runtime invariant fails.  Invariant checks stay active
 * in every build type; the simulator treats any such failure as a hard error
 * rather than degrading silently. */
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {
[[noreturn]] inline void check_fail(const char* expr, const char* file, int line,
                                    const std::string& msg) {
  std::string what = std::string(file) + ":" + std::to_string(line) +
                     ": invariant failed: " + expr;
  if (!msg.empty()) what += " (" + msg + ")";
  throw InvariantError(what);
}
}  // namespace detail

}  // namespace avtrack

// Always-on invariant check; `msg` is any expression convertible to std::string.
#define AVTRACK_CHECK(expr, msg)                                              \
  do {                                                                        \
    if (!(expr)) ::avtrack::detail::check_fail(#expr, __FILE__, __LINE__, (msg)); \
  } while (0)
