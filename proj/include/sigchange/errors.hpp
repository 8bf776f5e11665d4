#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sigchange {

/// Base of every error raised by the library. Callers that only care about
/// "something analytic went wrong" catch this; the CLI maps it to exit 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define SIGCHANGE_DEFINE_ERROR(Name)            \
  class Name : public Error {                   \
  public:                                       \
    using Error::Error;                         \
  }

// Scalar / expression evaluation.
SIGCHANGE_DEFINE_ERROR(DomainError);
SIGCHANGE_DEFINE_ERROR(MissingBinding);
SIGCHANGE_DEFINE_ERROR(EvaluationError);

// Parsing. These are usage errors, not analytic verdicts.
class ParseError : public Error {
public:
  using Error::Error;
};

class SyntaxError : public ParseError {
public:
  SyntaxError(std::size_t offset, std::vector<std::string> expected,
              const std::string& message)
      : ParseError("syntax error at offset " + std::to_string(offset) + ": " +
                   message),
        offset_(offset), expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept {
    return expected_;
  }

private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

class UnknownVariable : public ParseError {
public:
  UnknownVariable(std::string name, std::size_t offset)
      : ParseError("unknown variable '" + name + "' at offset " +
                   std::to_string(offset)),
        name_(std::move(name)), offset_(offset) {}
  const std::string& name() const noexcept { return name_; }
  std::size_t offset() const noexcept { return offset_; }

private:
  std::string name_;
  std::size_t offset_;
};

class UnknownFunction : public ParseError {
public:
  UnknownFunction(std::string name, std::size_t offset)
      : ParseError("unknown function '" + name + "' at offset " +
                   std::to_string(offset)),
        name_(std::move(name)), offset_(offset) {}
  const std::string& name() const noexcept { return name_; }
  std::size_t offset() const noexcept { return offset_; }

private:
  std::string name_;
  std::size_t offset_;
};

SIGCHANGE_DEFINE_ERROR(ArityError);

// Metric diagnostics.
SIGCHANGE_DEFINE_ERROR(NoBracket);
SIGCHANGE_DEFINE_ERROR(RankError);
SIGCHANGE_DEFINE_ERROR(NearSingular);
SIGCHANGE_DEFINE_ERROR(ZeroGradient);

// Quadrature and smoothness.
SIGCHANGE_DEFINE_ERROR(PositivityError);
SIGCHANGE_DEFINE_ERROR(QuadratureError);

// Flows and geodesics.
SIGCHANGE_DEFINE_ERROR(DomainExit);
SIGCHANGE_DEFINE_ERROR(StepFailure);
SIGCHANGE_DEFINE_ERROR(NotTransverse);
SIGCHANGE_DEFINE_ERROR(FoldDetected);

// Normal coordinates.
SIGCHANGE_DEFINE_ERROR(SignError);
SIGCHANGE_DEFINE_ERROR(NotSimpleEquation);
SIGCHANGE_DEFINE_ERROR(NonPositivePsi);
SIGCHANGE_DEFINE_ERROR(NotGeodesicField);
SIGCHANGE_DEFINE_ERROR(NotRadicalField);

// Catalog and space files.
SIGCHANGE_DEFINE_ERROR(UnknownSpace);
SIGCHANGE_DEFINE_ERROR(BadParams);
SIGCHANGE_DEFINE_ERROR(SchemaError);

#undef SIGCHANGE_DEFINE_ERROR

}  // namespace sigchange
