#pragma once

#include <stdexcept>
#include <string>

namespace leafdx {

enum class ErrorCode {
    InvalidArgument,
    DegenerateHistogram,
    ImageTooSmall,
    NoMarkers,
    ChartNotFound,
    AmbiguousChart,
    DegeneratePatchSet,
    NoLeafStroke,
    InsufficientBackground,
    EmptyMask,
    DimensionMismatch,
    SingleClass,
    TrainingStalled,
    TooFewSamples,
    DegenerateRectangle,
    VersionMismatch,
    MalformedFile,
    IoError,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace leafdx
