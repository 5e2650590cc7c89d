#pragma once

#include <stdexcept>
#include <string>

namespace hazerp {

enum class ErrorCode {
    MissingFile,
    SchemaError,
    DuplicateParticipant,
    ParseError,
    RaggedRows,
    UnknownChannel,
    EventOutOfRange,
    WindowOutOfRange,
    WindowOutOfBounds,
    InvalidSpec,
    InvalidConfig,
    TooFewGoodChannels,
    RankDeficient,
    IndexOutOfRange,
    AlreadyCorrected,
    NoMatchingEpochs,
    NotBaselineCorrected,
    ZeroExpectedCount,
    ZeroVariance,
    LengthMismatch,
    UnknownCondition,
    MissingParticipantData,
    InsufficientTrials,
    DegenerateLabels,
    VersionMismatch,
    CorruptModel,
    ModelMissing,
    ElectrodeMismatch,
    PreconditionViolated,
    StageOrderViolation,
    IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace hazerp
