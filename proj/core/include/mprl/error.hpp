#pragma once

#include <stdexcept>
#include <string>

namespace mprl {

enum class ErrorKind {
  Dimension,   // tensor shape mismatch
  Contract,    // precondition violated by the caller
  Index,       // out-of-range id or position
  Vocabulary,  // character outside the fixed symbol set
  Length,      // sequence exceeds the model's window
  Numeric,     // non-finite values where finite ones are required
  Config,      // invalid model or training configuration
  Io,          // file unreadable/unwritable
  Corrupt,     // checkpoint failed magic/version/checksum validation
  Resource,    // enumeration cap exceeded
  Usage,       // bad command line
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

}  // namespace mprl
