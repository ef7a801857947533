#pragma once

#include <stdexcept>
#include <string>

namespace aes {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input bytes are not valid UTF-8.
struct DecodeError : Error {
  using Error::Error;
};

// Syntactically malformed input (bad column count, non-numeric field, ...).
struct ParseError : Error {
  using Error::Error;
};

// Well-formed input that violates a domain contract (score out of range,
// duplicate id, missing path, ...).
struct ValidationError : Error {
  using Error::Error;
};

}  // namespace aes
