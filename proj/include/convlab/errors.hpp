#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace convlab {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with what an operation requires.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A convolution or pooling would produce a nonpositive extent.
class GeometryError : public Error {
public:
  using Error::Error;
};

/// Class index or element index outside its valid range.
class IndexError : public Error {
public:
  using Error::Error;
};

/// Caller violated a documented precondition.
class ContractError : public Error {
public:
  using Error::Error;
};

class NotFoundError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string &what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Binary file is malformed. Carries the byte offset where decoding failed.
class FormatError : public Error {
public:
  FormatError(std::uint64_t offset, const std::string &what)
      : Error("byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

class DegenerateFeatureError : public Error {
public:
  DegenerateFeatureError(std::size_t bin, const std::string &what)
      : Error(what), bin_(bin) {}
  std::size_t bin() const noexcept { return bin_; }

private:
  std::size_t bin_;
};

class EmptyDistributionError : public Error {
public:
  using Error::Error;
};

class EmptyLanguageError : public Error {
public:
  using Error::Error;
};

/// Checkpoint does not match the network or run it is loaded into.
class IncompatibilityError : public Error {
public:
  IncompatibilityError(std::string field, const std::string &what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string &field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Training produced a non-finite loss.
class DivergedError : public Error {
public:
  DivergedError(std::uint64_t step, std::string last_good_checkpoint)
      : Error("loss diverged at step " + std::to_string(step) +
              (last_good_checkpoint.empty()
                   ? std::string(" (no checkpoint saved yet)")
                   : " (last good checkpoint: " + last_good_checkpoint + ")")),
        step_(step), checkpoint_(std::move(last_good_checkpoint)) {}
  std::uint64_t step() const noexcept { return step_; }
  const std::string &last_good_checkpoint() const noexcept { return checkpoint_; }

private:
  std::uint64_t step_;
  std::string checkpoint_;
};

} // namespace convlab
