#pragma once

#include <stdexcept>
#include <string>

namespace dpl {

/// Position in a source text, 1-based. A zero line means "unknown".
struct SourceLocation {
  int line = 0;
  int column = 0;
};

/// Base class of every error raised by the engine.
///
/// `kind()` is a stable, machine-parsable class name ("SyntaxError",
/// "InstantiationError", ...) that the CLI prints verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message, SourceLocation where = {})
      : std::runtime_error(message), kind_(std::move(kind)), where_(where) {}

  const std::string& kind() const noexcept { return kind_; }
  const SourceLocation& where() const noexcept { return where_; }

 private:
  std::string kind_;
  SourceLocation where_;
};

#define DPL_DEFINE_ERROR(Name)                                              \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& message, SourceLocation where = {})    \
        : Error(#Name, message, where) {}                                   \
  }

DPL_DEFINE_ERROR(SyntaxError);
DPL_DEFINE_ERROR(ProgramError);
DPL_DEFINE_ERROR(DatasetError);
DPL_DEFINE_ERROR(ConfigError);
DPL_DEFINE_ERROR(InstantiationError);
DPL_DEFINE_ERROR(ZeroDivisorError);
DPL_DEFINE_ERROR(TypeError);
DPL_DEFINE_ERROR(UnstratifiedNegationError);
DPL_DEFINE_ERROR(CyclicProgramError);
DPL_DEFINE_ERROR(RecursionLimitError);
DPL_DEFINE_ERROR(DegenerateDisjunctionError);
DPL_DEFINE_ERROR(CompilationBudgetError);
DPL_DEFINE_ERROR(LabelError);
DPL_DEFINE_ERROR(SemiringError);
DPL_DEFINE_ERROR(NeuralError);
DPL_DEFINE_ERROR(BridgeError);
DPL_DEFINE_ERROR(OracleError);

#undef DPL_DEFINE_ERROR

}  // namespace dpl
