// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace bida {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Field or sequence dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value violates a domain invariant (non-finite data, out-of-range parameter).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// A weight tensor is missing or has the wrong shape.
class WeightError : public Error {
 public:
  using Error::Error;
};

/// A manifest, scene description or command-line input failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numeric procedure produced an unusable result (empty reduction set,
/// non-finite loss, failed gradient check).
class NumericError : public Error {
 public:
  using Error::Error;
};

enum class IoErrc {
  open_failed,
  malformed_header,
  size_overflow,
  truncated,
  bad_magic,
  non_finite,
  unsupported,
  write_failed,
};

inline const char* to_string(IoErrc code) {
  switch (code) {
    case IoErrc::open_failed: return "open failed";
    case IoErrc::malformed_header: return "malformed header";
    case IoErrc::size_overflow: return "size overflow";
    case IoErrc::truncated: return "truncated payload";
    case IoErrc::bad_magic: return "bad magic";
    case IoErrc::non_finite: return "non-finite payload";
    case IoErrc::unsupported: return "unsupported format variant";
    case IoErrc::write_failed: return "write failed";
  }
  return "unknown";
}

/// File format error. The code distinguishes the failure class.
class IoError : public Error {
 public:
  IoError(IoErrc code, const std::string& what)
      : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

  IoErrc code() const noexcept { return code_; }

 private:
  IoErrc code_;
};

}  // namespace bida
