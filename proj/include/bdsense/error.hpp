#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bdsense {

/// Failure categories shared by every module. The string form is what the
/// results CSV records in its `status` column.
enum class Errc {
    invalid_mode,
    shape,
    identifiability,
    configuration,
    degenerate_input,
    numerical_divergence,
    elevation_unrecoverable,
    gain_unrecoverable,
    undefined_reference,
    io,
};

constexpr std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_mode: return "invalid_mode";
        case Errc::shape: return "shape";
        case Errc::identifiability: return "identifiability";
        case Errc::configuration: return "configuration";
        case Errc::degenerate_input: return "degenerate_input";
        case Errc::numerical_divergence: return "numerical_divergence";
        case Errc::elevation_unrecoverable: return "elevation_unrecoverable";
        case Errc::gain_unrecoverable: return "gain_unrecoverable";
        case Errc::undefined_reference: return "undefined_reference";
        case Errc::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace bdsense
