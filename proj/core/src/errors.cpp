#include "earkd/errors.hpp"

namespace earkd {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidBand: return "InvalidBand";
    case ErrorKind::SignalTooShort: return "SignalTooShort";
    case ErrorKind::EmptyResult: return "EmptyResult";
    case ErrorKind::NotEnoughChannels: return "NotEnoughChannels";
    case ErrorKind::AllChannelsRejected: return "AllChannelsRejected";
    case ErrorKind::MissingChannel: return "MissingChannel";
    case ErrorKind::RecordingRejected: return "RecordingRejected";
    case ErrorKind::CorruptContainer: return "CorruptContainer";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::InvalidStageToken: return "InvalidStageToken";
    case ErrorKind::AlignmentError: return "AlignmentError";
    case ErrorKind::LabelCountMismatch: return "LabelCountMismatch";
    case ErrorKind::NotEnoughSubjects: return "NotEnoughSubjects";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::FeatureShapeMismatch: return "FeatureShapeMismatch";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::NotEnoughPoints: return "NotEnoughPoints";
    case ErrorKind::IOError: return "IOError";
    case ErrorKind::ConfigNotFound: return "ConfigNotFound";
    case ErrorKind::UsageError: return "UsageError";
    case ErrorKind::CheckpointMismatch: return "CheckpointMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

MissingChannel::MissingChannel(std::string channel)
    : Error(ErrorKind::MissingChannel, "channel '" + channel + "' not present"),
      channel_(std::move(channel)) {}

InvalidStageToken::InvalidStageToken(std::size_t line, const std::string& token)
    : Error(ErrorKind::InvalidStageToken,
            "unknown stage token '" + token + "' on line " + std::to_string(line)),
      line_(line) {}

RecordingRejected::RecordingRejected(std::string reason)
    : Error(ErrorKind::RecordingRejected, reason), reason_(std::move(reason)) {}

}  // namespace earkd
