#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace earkd {

enum class ErrorKind {
  InvalidBand,
  SignalTooShort,
  EmptyResult,
  NotEnoughChannels,
  AllChannelsRejected,
  MissingChannel,
  RecordingRejected,
  CorruptContainer,
  UnsupportedFormat,
  InvalidStageToken,
  AlignmentError,
  LabelCountMismatch,
  NotEnoughSubjects,
  InvalidConfig,
  ShapeError,
  InvalidLabel,
  EmptyDataset,
  FeatureShapeMismatch,
  EmptyMatrix,
  NotEnoughPoints,
  IOError,
  ConfigNotFound,
  UsageError,
  CheckpointMismatch,
};

std::string_view to_string(ErrorKind kind);

// Base of every error raised by the library. The kind is the stable,
// machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class MissingChannel : public Error {
 public:
  explicit MissingChannel(std::string channel);
  const std::string& channel() const noexcept { return channel_; }

 private:
  std::string channel_;
};

class InvalidStageToken : public Error {
 public:
  InvalidStageToken(std::size_t line, const std::string& token);
  // 1-based line number of the offending token.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class RecordingRejected : public Error {
 public:
  explicit RecordingRejected(std::string reason);
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

}  // namespace earkd
