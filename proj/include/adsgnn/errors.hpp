#pragma once

#include <stdexcept>
#include <string>

namespace adsgnn {

// Malformed arguments: wrong dimensions, invalid parameters, out-of-range labels.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A conformal map evaluated on the locus where it is undefined.
class SingularLocusError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The image of a finite boundary point lies at projective infinity.
class PointAtInfinityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An embedding vector outside the upper-half-space chart (Y0 - Y_{d+1} <= 0).
class OutOfChartError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Two planar insertion points closer than the collision threshold.
class CollisionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A correlator that under/overflows double precision; the sampler rejects it.
class SampleRejected : public std::range_error {
 public:
  using std::range_error::range_error;
};

// Operation called in the wrong state (e.g. backward without a forward cache).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A loss evaluated where it is not defined (zero-norm target).
class UndefinedLossError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedVersionError : public ParseError {
 public:
  using ParseError::ParseError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace adsgnn
