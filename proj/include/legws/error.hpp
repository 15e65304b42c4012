#pragma once

#include <stdexcept>
#include <string>

namespace legws {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// geometry
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// planner
class EmptyWorkspace : public Error {
 public:
  using Error::Error;
};
class Unreachable : public Error {
 public:
  using Error::Error;
};
class OutOfBounds : public Error {
 public:
  using Error::Error;
};
class BlockedEndpoint : public Error {
 public:
  using Error::Error;
};

// legibility
class UnreachableGoal : public Error {
 public:
  using Error::Error;
};
class EmptyGoalSet : public Error {
 public:
  using Error::Error;
};

// task
class CyclicPrecedence : public Error {
 public:
  using Error::Error;
};

// qd
class TooFewItems : public Error {
 public:
  using Error::Error;
};
class PlacementFailure : public Error {
 public:
  using Error::Error;
};
class InvalidResult : public Error {
 public:
  using Error::Error;
};
class EmptyArchive : public Error {
 public:
  using Error::Error;
};

// io
class ParseError : public Error {
 public:
  using Error::Error;
};
class VersionError : public Error {
 public:
  using Error::Error;
};

/// A rejected input, carrying the dotted path of the offending field.
class ValidationError : public Error {
 public:
  ValidationError(std::string path, std::string reason)
      : Error(path + ": " + reason), path_(std::move(path)), reason_(std::move(reason)) {}

  const std::string& path() const { return path_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

}  // namespace legws
