#pragma once

#include <stdexcept>
#include <string>

namespace hevsim {

// Base class for every error the library raises on purpose. Anything else
// escaping the public API is a bug.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Requested battery power exceeds what the equivalent circuit can deliver
// (discriminant of the terminal-voltage equation goes negative).
class InfeasiblePower : public Error {
public:
  using Error::Error;
};

// Engine power request outside [0, p_eng_max].
class PowerOutOfRange : public Error {
public:
  using Error::Error;
};

// Malformed input file (bad token, wrong column count).
class ParseError : public Error {
public:
  using Error::Error;
};

// Input parsed but violates a documented precondition (negative speed,
// non-monotone time, bad table ordering).
class ValidationError : public Error {
public:
  using Error::Error;
};

// Query outside the valid domain (preview time past the end of the cycle).
class OutOfRange : public Error {
public:
  using Error::Error;
};

// Container lengths disagree with what the operation requires.
class SizeMismatch : public Error {
public:
  using Error::Error;
};

// Horizon cannot advance because the trip is over.
class EndOfTrip : public Error {
public:
  using Error::Error;
};

// Dynamic programming found no control sequence that keeps the initial state
// inside the feasible set.
class NoFeasiblePolicy : public Error {
public:
  using Error::Error;
};

// Bad experiment configuration (unknown controller name, missing file).
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace hevsim
