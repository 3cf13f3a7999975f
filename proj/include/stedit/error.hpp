#pragma once

#include <stdexcept>
#include <string>

namespace stedit {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two strings (or a string and a model) were built over different alphabets.
class AlphabetMismatch : public Error {
 public:
  using Error::Error;
};

/// A symbol or token that the alphabet does not contain.
class UnknownSymbol : public Error {
 public:
  using Error::Error;
};

/// Matrix/table dimensions disagree with the alphabet or with each other.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Invalid argument outside the above categories (empty input, bad range, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Parse failure in one of the text formats; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace stedit
