#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sparseseg {

enum class ErrorKind {
  InvalidArgument,
  MalformedRle,
  EmptyMask,
  ManifestParseError,
  DimsMismatch,
  InconsistentMetadata,
  EmptyPointSet,
  BudgetExhausted,
  ImageExhausted,
  EmptyOverlap,
  IncompleteFill,
  PredContainsSentinel,
  EmptyMatrix,
  DatasetInvalid,
  IoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sparseseg
