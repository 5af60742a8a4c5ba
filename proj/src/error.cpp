#include "leafdx/error.hpp"

namespace leafdx {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid argument";
        case ErrorCode::DegenerateHistogram: return "degenerate histogram";
        case ErrorCode::ImageTooSmall: return "image smaller than kernel";
        case ErrorCode::NoMarkers: return "no markers";
        case ErrorCode::ChartNotFound: return "chart not found";
        case ErrorCode::AmbiguousChart: return "ambiguous chart";
        case ErrorCode::DegeneratePatchSet: return "degenerate patch set";
        case ErrorCode::NoLeafStroke: return "no leaf stroke";
        case ErrorCode::InsufficientBackground: return "insufficient background evidence";
        case ErrorCode::EmptyMask: return "empty mask";
        case ErrorCode::DimensionMismatch: return "dimension mismatch";
        case ErrorCode::SingleClass: return "single-class input";
        case ErrorCode::TrainingStalled: return "training stalled";
        case ErrorCode::TooFewSamples: return "class with too few samples";
        case ErrorCode::DegenerateRectangle: return "degenerate rectangle";
        case ErrorCode::VersionMismatch: return "version mismatch";
        case ErrorCode::MalformedFile: return "malformed file";
        case ErrorCode::IoError: return "i/o error";
    }
    return "unknown error";
}

}  // namespace leafdx
