#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace ltpsid {

enum class ErrorCode {
    // configuration / validation
    DimensionMismatch,
    LengthNotDivisible,
    PreconditionViolated,
    BlockRangeExceeded,
    OrderTooLarge,
    InvalidConfig,
    // data
    ParseError,
    IoError,
    // numerical pipeline
    SingularMatrix,
    NumericalError,
    DegenerateGain,
    TransientNotConverged,
    RankDeficient,
    IndexCollision,
    NonRealResidue,
    ShiftRankDeficient,
    UnstableEstimate,
    IllConditioned,
    DegenerateReference,
};

enum class ErrorCategory { Validation, Data, Numerical };

inline constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthNotDivisible: return "LengthNotDivisible";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::BlockRangeExceeded: return "BlockRangeExceeded";
    case ErrorCode::OrderTooLarge: return "OrderTooLarge";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::DegenerateGain: return "DegenerateGain";
    case ErrorCode::TransientNotConverged: return "TransientNotConverged";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::IndexCollision: return "IndexCollision";
    case ErrorCode::NonRealResidue: return "NonRealResidue";
    case ErrorCode::ShiftRankDeficient: return "ShiftRankDeficient";
    case ErrorCode::UnstableEstimate: return "UnstableEstimate";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::DegenerateReference: return "DegenerateReference";
    }
    return "Unknown";
}

inline constexpr ErrorCategory category_of(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::DimensionMismatch:
    case ErrorCode::LengthNotDivisible:
    case ErrorCode::PreconditionViolated:
    case ErrorCode::BlockRangeExceeded:
    case ErrorCode::OrderTooLarge:
    case ErrorCode::InvalidConfig:
        return ErrorCategory::Validation;
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
        return ErrorCategory::Data;
    default:
        return ErrorCategory::Numerical;
    }
}

/// Exception carrying a machine-readable code and, once it has passed
/// through `identify`, the pipeline stage that raised it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_of(code_); }
    const std::string& stage() const noexcept { return stage_; }

    Error with_stage(std::string stage) const
    {
        Error e(code_, std::string(what()).substr(to_string(code_).size() + 2));
        e.stage_ = std::move(stage);
        e.annotated_ = "[" + e.stage_ + "] " + what();
        return e;
    }

    /// Message prefixed by the stage when one is set.
    const char* describe() const noexcept { return stage_.empty() ? what() : annotated_.c_str(); }

private:
    ErrorCode code_;
    std::string stage_;
    std::string annotated_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace ltpsid
