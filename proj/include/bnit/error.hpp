#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bnit {

enum class Errc {
    DimensionMismatch,
    TooLargeForDense,
    InvalidNet,
    IndexOutOfRange,
    InsufficientSamples,
    ReferenceNotPositive,
    InvalidEpsilon,
    InvalidArgument,
    OddChildCount,
    RegimeViolation,
    PreconditionUniform,
    StructureMismatch,
    TooLargeForAudit,
    Overflow,
    InstanceMismatch,
    ParseError,
};

inline const char* errc_name(Errc c) {
    switch (c) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::TooLargeForDense: return "TooLargeForDense";
    case Errc::InvalidNet: return "InvalidNet";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::ReferenceNotPositive: return "ReferenceNotPositive";
    case Errc::InvalidEpsilon: return "InvalidEpsilon";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::OddChildCount: return "OddChildCount";
    case Errc::RegimeViolation: return "RegimeViolation";
    case Errc::PreconditionUniform: return "PreconditionUniform";
    case Errc::StructureMismatch: return "StructureMismatch";
    case Errc::TooLargeForAudit: return "TooLargeForAudit";
    case Errc::Overflow: return "Overflow";
    case Errc::InstanceMismatch: return "InstanceMismatch";
    case Errc::ParseError: return "ParseError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& detail, std::uint64_t required = 0)
        : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code), required_(required) {}

    Errc code() const noexcept { return code_; }
    // only meaningful for InsufficientSamples
    std::uint64_t required() const noexcept { return required_; }

private:
    Errc code_;
    std::uint64_t required_;
};

} // namespace bnit
