#pragma once

#include <stdexcept>
#include <string>

namespace iconann {

/// Base for every error the library raises on bad input data or files.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed JSON / JSONL / PNG content. The message names the offending path.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Missing file, unwritable directory and similar.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint with a bad magic, unsupported version, or truncated tensor data.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Shape or dimension mismatch between tensors passed to an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace iconann
