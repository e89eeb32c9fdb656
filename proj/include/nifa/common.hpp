#pragma once

#include <cstdio>
#include <mutex>
#include <stdexcept>
#include <string>

namespace nifa {

// Error taxonomy mirroring the CLI exit codes: validation errors exit with 2,
// I/O errors with 3, numeric/estimation errors with 4.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Degenerate estimate (all-negative kernel fit, zero noise variance, ...).
class EstimationError : public NumericError {
public:
  using NumericError::NumericError;
};

// Non-fatal diagnostics (clamped values, eigenvalue ties, Monte-Carlo cap
// hits) go through a process-wide handler so the CLI and the tests can
// redirect or capture them.
using WarningHandler = void (*)(const std::string&);

namespace detail {
inline std::mutex warning_mutex;
inline WarningHandler warning_handler = nullptr;
}  // namespace detail

inline void set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(detail::warning_mutex);
  detail::warning_handler = handler;
}

inline void warn(const std::string& message) {
  std::lock_guard lock(detail::warning_mutex);
  if (detail::warning_handler) {
    detail::warning_handler(message);
  } else {
    std::fprintf(stderr, "warning: %s\n", message.c_str());
  }
}

}  // namespace nifa
