#pragma once

#include <stdexcept>
#include <string>

namespace sparseprop {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SPARSEPROP_DEFINE_ERROR(Name)            \
  class Name : public Error {                    \
   public:                                       \
    explicit Name(const std::string& what)       \
        : Error(std::string(#Name ": ") + what) {} \
  }

SPARSEPROP_DEFINE_ERROR(ShapeMismatch);
SPARSEPROP_DEFINE_ERROR(BadStructure);
SPARSEPROP_DEFINE_ERROR(NoActiveArena);
SPARSEPROP_DEFINE_ERROR(UndefinedValue);
SPARSEPROP_DEFINE_ERROR(CycleDetected);
SPARSEPROP_DEFINE_ERROR(NotIntermediate);
SPARSEPROP_DEFINE_ERROR(StructureFallback);
SPARSEPROP_DEFINE_ERROR(ResourceLimit);
SPARSEPROP_DEFINE_ERROR(SpikeFlipDetected);
SPARSEPROP_DEFINE_ERROR(RangeError);
SPARSEPROP_DEFINE_ERROR(NotDivisible);
SPARSEPROP_DEFINE_ERROR(LabelOutOfRange);

#undef SPARSEPROP_DEFINE_ERROR

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("ParseError: line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace sparseprop
