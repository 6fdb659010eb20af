#pragma once

#include <stdexcept>
#include <string>

namespace fairvec {

// Base of every error the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed inputs: bad files, configs, labels, or arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

// Reading or writing a path failed.
class IoError : public Error {
 public:
  using Error::Error;
};

// Degenerate denominators, non-finite values, unreachable targets.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairvec
