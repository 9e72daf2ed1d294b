#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tempobeat {

enum class ErrorKind {
    EmptySeries,
    DegenerateSeries,
    LengthMismatch,
    InsufficientSpan,
    InsufficientDays,
    LagOutOfRange,
    ParseError,
    DuplicateStamp,
    NonHourStamp,
    GapTooLarge,
    UnknownStation,
    UnknownCategory,
    InvertedSpan,
    CoverageGap,
    ObservationGap,
    UnknownColumn,
    EmptyAfterRestriction,
    RankDeficientFixed,
    SingularFactorization,
    GroupUnseen,
    TooLargeForOracle,
    MissingKeys,
    EmptyInput,
    NoEligibleCells,
    InvalidConfig,
    Io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::EmptySeries: return "EmptySeries";
    case ErrorKind::DegenerateSeries: return "DegenerateSeries";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InsufficientSpan: return "InsufficientSpan";
    case ErrorKind::InsufficientDays: return "InsufficientDays";
    case ErrorKind::LagOutOfRange: return "LagOutOfRange";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DuplicateStamp: return "DuplicateStamp";
    case ErrorKind::NonHourStamp: return "NonHourStamp";
    case ErrorKind::GapTooLarge: return "GapTooLarge";
    case ErrorKind::UnknownStation: return "UnknownStation";
    case ErrorKind::UnknownCategory: return "UnknownCategory";
    case ErrorKind::InvertedSpan: return "InvertedSpan";
    case ErrorKind::CoverageGap: return "CoverageGap";
    case ErrorKind::ObservationGap: return "ObservationGap";
    case ErrorKind::UnknownColumn: return "UnknownColumn";
    case ErrorKind::EmptyAfterRestriction: return "EmptyAfterRestriction";
    case ErrorKind::RankDeficientFixed: return "RankDeficientFixed";
    case ErrorKind::SingularFactorization: return "SingularFactorization";
    case ErrorKind::GroupUnseen: return "GroupUnseen";
    case ErrorKind::TooLargeForOracle: return "TooLargeForOracle";
    case ErrorKind::MissingKeys: return "MissingKeys";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoEligibleCells: return "NoEligibleCells";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library. `line` is 1-based and 0 when the
/// error is not tied to a position in an input file.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::size_t line = 0)
        : std::runtime_error(format(kind, message, line)), kind_(kind), line_(line), message_(message) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    /// the message without the kind and line prefix
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    static std::string format(ErrorKind kind, const std::string& message, std::size_t line) {
        std::string out(to_string(kind));
        if (line != 0) {
            out += " (line " + std::to_string(line) + ")";
        }
        out += ": ";
        out += message;
        return out;
    }

    ErrorKind kind_;
    std::size_t line_;
    std::string message_;
};

} // namespace tempobeat
