#pragma once

#include <stdexcept>
#include <string>

namespace gsn {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IOError : Error {
  using Error::Error;
};

// Corpus / data errors.
struct MalformedSession : Error {
  using Error::Error;
};

struct EmptyCorpusError : Error {
  using Error::Error;
};

struct VocabError : Error {
  using Error::Error;
};

// Decoder errors.
struct EmptyAttendee : Error {
  using Error::Error;
};

struct EmptyTarget : Error {
  using Error::Error;
};

// Checkpoint errors.
struct CheckpointVersionError : Error {
  using Error::Error;
};

struct CheckpointCorruptError : Error {
  using Error::Error;
};

}  // namespace gsn
