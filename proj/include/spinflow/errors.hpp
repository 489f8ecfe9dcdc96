#pragma once

#include <stdexcept>
#include <string>

namespace spinflow {

// Base class for every error the library throws; CLI maps these to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed record in a stream file.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Timestamps decrease within a stream.
class OrderError : public Error {
 public:
  using Error::Error;
};

// Pixel coordinates outside the declared sensor geometry.
class BoundsError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration (bad invariants, bad JSON values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnknownScenario : public Error {
 public:
  using Error::Error;
};

// Tracker saw too many consecutive ticks without a usable detection.
class TrackLost : public Error {
 public:
  using Error::Error;
};

// Queried time lies outside the span covered by a track.
class OutOfTrackRange : public Error {
 public:
  using Error::Error;
};

class InvalidSpin : public Error {
 public:
  using Error::Error;
};

// No estimation window produced the configured minimum of valid flows.
class InsufficientFlow : public Error {
 public:
  using Error::Error;
};

// Fewer than two sign transitions in the smoothed event-rate curve.
class NoPeriodicity : public Error {
 public:
  using Error::Error;
};

// Pipeline-stage failure wrapping the originating module error.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(stage) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace spinflow
