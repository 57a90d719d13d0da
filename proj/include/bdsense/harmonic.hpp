#pragma once

#include "bdsense/tensor.hpp"

namespace bdsense {

struct ToneEstimate {
    double omega = 0.0;     ///< radians per sample, in (−π, π]
    double residual = 0.0;  ///< ‖v[1:] − ρ v[:−1]‖ / ‖v[1:]‖
};

/// Single-source shift invariance: ω̂ = arg ρ with ρ the least-squares solution
/// of v[1:] ≈ ρ·v[:−1]. Invariant to any global complex scaling of v.
/// Throws Errc::degenerate_input for length < 2 or an all-zero vector.
ToneEstimate single_tone(const ComplexVector& v);

/// τ̂ = −ω/(2πΔf), wrapped into [0, 1/Δf).
double tone_to_delay(double omega, double delta_f_hz);
/// ν̂ = ω/(2πT_s), wrapped into [−1/(2T_s), 1/(2T_s)).
double tone_to_doppler(double omega, double symbol_s);

struct AngleEstimate {
    double mu = 0.0;
    double psi = 0.0;
    double phi = 0.0;    ///< azimuth, radians
    double theta = 0.0;  ///< elevation, radians
    double rank1_ratio = 1.0;  ///< σ₁² / Σσᵢ² of the angle matrix
    bool unreliable_subspace = false;
};

inline constexpr double kMinSinPhi = 1e-6;
inline constexpr double kRank1Warning = 0.5;

/// 2D shift invariance on the rank-1 angle matrix P ≈ λ·p pᵀ. The dominant
/// left singular vector is laid out as an N_z×N_y grid (a_y ⊗ a_z order); ψ̂
/// comes from shifts along z, μ̂ from shifts along y, each a least-squares fit
/// over every available element pair. Angles are inverted inside the
/// (0°, 90°) prior.
/// Throws Errc::shape when N ≠ N_y·N_z, Errc::elevation_unrecoverable when
/// sin φ̂ falls below kMinSinPhi.
AngleEstimate esprit_2d(const ComplexMatrix& p, Index n_y, Index n_z);

}  // namespace bdsense
