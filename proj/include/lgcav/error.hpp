#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lgcav {

// Error codes. Each load failure mode gets its own code so callers (and the
// CLI exit-code mapping) can tell them apart.
enum class Errc {
  io,
  bad_magic,
  version_mismatch,
  truncated,
  trailing_bytes,
  non_finite,
  shape_mismatch,
  duplicate_id,
  missing_id,
  invalid_argument,
  degenerate,
  numeric,
  config,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad_magic";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::truncated: return "truncated";
    case Errc::trailing_bytes: return "trailing_bytes";
    case Errc::non_finite: return "non_finite";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::duplicate_id: return "duplicate_id";
    case Errc::missing_id: return "missing_id";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::degenerate: return "degenerate";
    case Errc::numeric: return "numeric";
    case Errc::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Broad failure class, used for CLI exit codes.
enum class ErrorClass { config, data, numeric };

constexpr ErrorClass classify(Errc code) {
  switch (code) {
    case Errc::config: return ErrorClass::config;
    case Errc::numeric:
    case Errc::degenerate: return ErrorClass::numeric;
    default: return ErrorClass::data;
  }
}

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

// Literal messages: no allocation unless the check fails.
inline void require(bool cond, Errc code, const char* what) {
  if (!cond) fail(code, what);
}

}  // namespace lgcav
