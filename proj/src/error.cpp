#include "bdf/error.hpp"

namespace bdf {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Parse: return "ParseError";
        case ErrorKind::TruncatedInput: return "TruncatedInput";
        case ErrorKind::Range: return "RangeError";
        case ErrorKind::Domain: return "DomainError";
        case ErrorKind::EmptyCloud: return "EmptyCloud";
        case ErrorKind::DegenerateCloud: return "DegenerateCloud";
        case ErrorKind::SampleTooSmall: return "SampleTooSmall";
        case ErrorKind::DegenerateSample: return "DegenerateSample";
        case ErrorKind::DegenerateLabels: return "DegenerateLabels";
        case ErrorKind::Shape: return "ShapeError";
        case ErrorKind::Format: return "FormatError";
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::Feature: return "FeatureError";
        case ErrorKind::DegenerateScore: return "DegenerateScore";
        case ErrorKind::Fold: return "FoldError";
    }
    return "Error";
}

}  // namespace bdf
