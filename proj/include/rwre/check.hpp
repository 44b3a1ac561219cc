#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace rwre {

// Always-on invariant checks.  These guard numerical contracts (row sums,
// residuals, probability ranges) that must hold in release builds too.
[[noreturn]] inline void check_fail(const char* expr, const char* file, int line,
                                    const std::string& msg) {
  std::ostringstream os;
  os << file << ":" << line << ": check failed: " << expr;
  if (!msg.empty()) os << " (" << msg << ")";
  throw std::runtime_error(os.str());
}

}  // namespace rwre

#define RWRE_CHECK(cond)                                            \
  do {                                                              \
    if (!(cond)) ::rwre::check_fail(#cond, __FILE__, __LINE__, ""); \
  } while (0)

#define RWRE_CHECK_MSG(cond, msg)                                      \
  do {                                                                 \
    if (!(cond)) {                                                     \
      std::ostringstream os_;                                          \
      os_ << msg;                                                      \
      ::rwre::check_fail(#cond, __FILE__, __LINE__, os_.str());        \
    }                                                                  \
  } while (0)
