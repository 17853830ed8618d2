#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emip {

enum class ErrorCode {
    DimensionMismatch,
    OutOfBounds,
    DuplicatePoint,
    InvalidValue,
    InvalidArgument,
    EmptyAnnotations,
    TooFewVoxels,
    InvalidCellId,
    NoLabeledSamples,
    NoValidAnchors,
    NonFiniteGradient,
    EmptyTrack,
    PlacementFailure,
    UnsupportedFormat,
    CorruptFile,
    ParseError,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
/// ParseError additionally records the 1-based input line.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, int line = 0);

    ErrorCode code() const noexcept { return code_; }
    int line() const noexcept { return line_; }

private:
    ErrorCode code_;
    int line_;
};

/// Errors caused by bad user input rather than by the environment or a bug.
bool is_validation_error(ErrorCode code);

}  // namespace emip
