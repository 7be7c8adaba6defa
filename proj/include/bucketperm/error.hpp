#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bucketperm {

enum class ErrorCode {
  MissingColumn,
  NonNumericCell,
  LabelDisagreement,
  EmptyBucket,
  SingleClass,
  BadMagic,
  TruncatedFile,
  CountMismatch,
  UncoveredBucket,
  InvalidCounts,
  MTooLarge,
  EmptyNull,
  BudgetExceeded,
  BucketTooSmall,
  TooFewBuckets,
  ClassAbsent,
  DivergedLoss,
  EmptyTestSet,
  InvalidSpec,
  DegenerateInterval,
  NonSquare,
  DimensionMismatch,
  StaleEmbedding,
  InvalidDataset,
  ConfigError,
  IoError,
  TrainerFailed,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this type; code() is the stable part, what()
// carries the location detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bucketperm
