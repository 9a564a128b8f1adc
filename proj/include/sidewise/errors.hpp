#ifndef SIDEWISE_ERRORS_HPP
#define SIDEWISE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sidewise {

// Machine-readable failure codes carried by every thrown Error.
enum class Errc {
    Config,
    EmptyRegion,
    Ambiguity,
    NonSmooth,
    NotHyperbolic,
    NotGlancing,
    NotElliptic,
    StiffFailure,
    TauDegenerate,
    MissedEvent,
    DegenerateGlancing,
    DenominatorDegenerate,
    UnsupportedDomain,
    CflViolation,
    NanDetected,
    ResolutionInsufficient,
    ConeLeak,
    IncompatibleWindow,
    Degenerate,
    Io,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::Config: return "CONFIG";
        case Errc::EmptyRegion: return "EMPTY_REGION";
        case Errc::Ambiguity: return "AMBIGUITY";
        case Errc::NonSmooth: return "NON_SMOOTH";
        case Errc::NotHyperbolic: return "NOT_HYPERBOLIC";
        case Errc::NotGlancing: return "NOT_GLANCING";
        case Errc::NotElliptic: return "NOT_ELLIPTIC";
        case Errc::StiffFailure: return "STIFF_FAILURE";
        case Errc::TauDegenerate: return "TAU_DEGENERATE";
        case Errc::MissedEvent: return "MISSED_EVENT";
        case Errc::DegenerateGlancing: return "DEGENERATE_GLANCING";
        case Errc::DenominatorDegenerate: return "DENOMINATOR_DEGENERATE";
        case Errc::UnsupportedDomain: return "UNSUPPORTED_DOMAIN";
        case Errc::CflViolation: return "CFL_VIOLATION";
        case Errc::NanDetected: return "NAN_DETECTED";
        case Errc::ResolutionInsufficient: return "RESOLUTION_INSUFFICIENT";
        case Errc::ConeLeak: return "CONE_LEAK";
        case Errc::IncompatibleWindow: return "INCOMPATIBLE_WINDOW";
        case Errc::Degenerate: return "DEGENERATE";
        case Errc::Io: return "IO";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

}  // namespace sidewise

#endif
