#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vesselkit {

/// Failure categories raised by the library. The CLI maps each to an exit code.
enum class ErrorKind {
    InvalidInput,
    NonFinite,
    SpectrumClash,
    SingularSystem,
    NotPositiveDefinite,
    SingularSigma1,
    GridMismatch,
    ShapeMismatch,
    ChainMismatch,
    NotMinimal,
    DegenerateB,
    DegenerateEigenvalue,
    TransportBreakdown,
    InconsistentInitialData,
    CouplingSingular,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::SpectrumClash: return "SpectrumClash";
        case ErrorKind::SingularSystem: return "SingularSystem";
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::SingularSigma1: return "SingularSigma1";
        case ErrorKind::GridMismatch: return "GridMismatch";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::ChainMismatch: return "ChainMismatch";
        case ErrorKind::NotMinimal: return "NotMinimal";
        case ErrorKind::DegenerateB: return "DegenerateB";
        case ErrorKind::DegenerateEigenvalue: return "DegenerateEigenvalue";
        case ErrorKind::TransportBreakdown: return "TransportBreakdown";
        case ErrorKind::InconsistentInitialData: return "InconsistentInitialData";
        case ErrorKind::CouplingSingular: return "CouplingSingular";
    }
    return "Unknown";
}

class VesselError : public std::runtime_error {
   public:
    VesselError(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Input and shape problems are the caller's fault; everything else is numerical.
    bool is_input_error() const noexcept {
        return kind_ == ErrorKind::InvalidInput || kind_ == ErrorKind::ShapeMismatch ||
               kind_ == ErrorKind::GridMismatch || kind_ == ErrorKind::ChainMismatch;
    }

   private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw VesselError(kind, what); }

}  // namespace vesselkit
