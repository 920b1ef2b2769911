#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ltmn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad config value, empty input).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Tensor or vector dimensions do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed corpus, vocabulary, embedding or checkpoint data.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : Error("line " + std::to_string(line) + ", " + field + ": " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// Syllables and notes do not pair one-to-one.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// The three per-note melody attributes.
enum class AttributeKind { kPitch, kDuration, kRest };

/// A melody attribute lies outside its enumerated value set.
class AttributeError : public Error {
 public:
  AttributeError(AttributeKind field, const std::string& what)
      : Error(what), field_(field) {}

  AttributeKind kind() const noexcept { return field_; }

 private:
  AttributeKind field_;
};

/// A file the pipeline depends on (checkpoint, vocabulary, ...) is absent.
class MissingArtifactError : public Error {
 public:
  explicit MissingArtifactError(const std::string& path)
      : Error("missing artifact: " + path), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace ltmn
