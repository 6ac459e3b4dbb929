#pragma once

#include <stdexcept>
#include <string>

namespace dfd {

// Base of every error raised by this library. Each subtype corresponds to one
// failure class so callers (and the CLI) can react without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed caller input: bad labels, unreadable files, wrong image sizes.
class InputError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration (missing weights, bad patterns, zero steps).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Matrix / tensor dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A documented precondition on the argument values was violated.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Numerically degenerate input: zero-norm feature rows, antipodal slerp pairs.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// A loss term has no defined value on this batch (no positive pair, B < 2).
class UndefinedTermError : public Error {
 public:
  using Error::Error;
};

// A metric is undefined on the input (e.g. AUROC with a single class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Split bookkeeping broke an invariant (duplicate or leaking video ids).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Optimization diverged or otherwise failed mid-run.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace dfd
