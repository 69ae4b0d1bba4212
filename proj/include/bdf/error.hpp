#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bdf {

enum class ErrorKind {
    Parse,
    TruncatedInput,
    Range,
    Domain,
    EmptyCloud,
    DegenerateCloud,
    SampleTooSmall,
    DegenerateSample,
    DegenerateLabels,
    Shape,
    Format,
    Config,
    EmptyInput,
    Feature,
    DegenerateScore,
    Fold,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. The kind is stable and is what tests
/// and the CLI dispatch on; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace bdf
