#pragma once

#include <stdexcept>
#include <string>

namespace edre {

// Error classes double as the machine-parsable failure categories surfaced
// by the CLI and the C API.
enum class ErrorClass {
  Io,
  Parse,
  Invalid,
  Duplicate,
  NotFound,
  Auth,
  RateLimit,
  Network,
  Version,
  Fingerprint,
  Internal,
};

inline const char* error_class_name(ErrorClass c) {
  switch (c) {
    case ErrorClass::Io: return "io";
    case ErrorClass::Parse: return "parse";
    case ErrorClass::Invalid: return "invalid";
    case ErrorClass::Duplicate: return "duplicate";
    case ErrorClass::NotFound: return "not_found";
    case ErrorClass::Auth: return "auth";
    case ErrorClass::RateLimit: return "rate_limit";
    case ErrorClass::Network: return "network";
    case ErrorClass::Version: return "version";
    case ErrorClass::Fingerprint: return "fingerprint";
    case ErrorClass::Internal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string msg) : std::runtime_error(std::move(msg)), cls_(cls) {}
  ErrorClass cls() const { return cls_; }

 private:
  ErrorClass cls_;
};

[[noreturn]] inline void raise(ErrorClass cls, const std::string& msg) { throw Error(cls, msg); }

}  // namespace edre
