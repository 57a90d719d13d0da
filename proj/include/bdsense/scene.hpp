#pragma once

#include <cstdint>
#include <vector>

#include "bdsense/rng.hpp"
#include "bdsense/tensor.hpp"

namespace bdsense {

inline constexpr double kSpeedOfLight = 299'792'458.0;

/// Array geometry, OFDM numerology and slot count of one sensing block.
struct SystemConfig {
    Index l_y = 2;  ///< ST array extent along y
    Index l_z = 2;  ///< ST array extent along z
    Index n_y = 2;  ///< RIS extent along y
    Index n_z = 2;  ///< RIS extent along z
    std::vector<Index> group_sizes;  ///< empty means one group of n_y·n_z
    Index m = 4;                     ///< OFDM symbols
    Index q = 4;                     ///< subcarriers
    Index t = 256;                   ///< time slots
    double delta_f_hz = 120e3;
    double carrier_hz = 28e9;

    [[nodiscard]] Index st_antennas() const noexcept { return l_y * l_z; }
    [[nodiscard]] Index ris_elements() const noexcept { return n_y * n_z; }
    [[nodiscard]] Index group_count() const noexcept {
        return group_sizes.empty() ? 1 : static_cast<Index>(group_sizes.size());
    }
    [[nodiscard]] double symbol_duration() const noexcept { return 1.0 / delta_f_hz; }
    [[nodiscard]] double wavelength() const noexcept { return kSpeedOfLight / carrier_hz; }

    /// Throws Errc::configuration on non-positive extents or inconsistent groups.
    void validate() const;
};

/// Ground truth of a single-target scene. Angles in radians.
struct SceneTruth {
    double tau_s = 0.0;
    double nu_hz = 0.0;
    double phi_ris_d = 0.0;    ///< RIS → target azimuth
    double theta_ris_d = 0.0;  ///< RIS → target elevation
    double phi_st = 0.0;
    double theta_st = 0.0;
    double phi_ris_a = 0.0;    ///< ST → RIS arrival azimuth
    double theta_ris_a = 0.0;
    cd alpha{1.0, 0.0};
};

/// Ranges used to draw random scenes (Table-I style defaults).
struct SceneRanges {
    double d_st_ris_min_m = 10.0;
    double d_st_ris_max_m = 250.0;
    double d_ris_target_min_m = 10.0;
    double d_ris_target_max_m = 250.0;
    double velocity_min_mps = -25.0;
    double velocity_max_mps = 25.0;
    double rcs_m2 = 2.0;
};

struct RisCodebook {
    std::vector<ComplexMatrix> slots;  ///< S_t, one unitary N×N block per slot
    ComplexMatrix selection;           ///< T×N⁴, row t = vec(S_tᵀ ⊗ S_tᵀ)ᵀ
};

struct PilotSet {
    ComplexTensor x;  ///< L×M×Q; [X]_(1) is the L×MQ pilot matrix

    [[nodiscard]] ComplexMatrix matrix() const { return unfold(x, 1); }
};

struct SpatialFreqs {
    double mu = 0.0;
    double psi = 0.0;
};

/// a_y(μ) ⊗ a_z(ψ) with entries exp(−j[(ℓy−1)μ + (ℓz−1)ψ]).
ComplexVector upa_steering(double mu, double psi, Index n_y, Index n_z);

/// μ = π sinφ sinθ, ψ = π cosφ (half-wavelength spacing).
SpatialFreqs spatial_freqs(double phi, double theta);

/// Steering of a UPA towards (φ, θ).
ComplexVector steering_towards(double phi, double theta, Index n_y, Index n_z);

/// c(τ) = [1, e^{−j2πΔfτ}, …, e^{−j2π(Q−1)Δfτ}]ᵀ
ComplexVector delay_vector(double tau_s, Index q, double delta_f_hz);
/// d(ν) = [1, e^{j2πT_sν}, …, e^{j2π(M−1)T_sν}]ᵀ
ComplexVector doppler_vector(double nu_hz, Index m, double symbol_s);

/// Haar-distributed unitary matrix: QR of a complex Gaussian with the phases
/// of diag(R) absorbed into Q.
ComplexMatrix random_unitary(Index n, Rng& rng);

/// One fresh unitary block per slot; deterministic given the seed.
RisCodebook gen_codebook(const SystemConfig& cfg, std::uint64_t seed);

/// Row t of the flattened selection matrix for a given slot block.
ComplexRowVector selection_row(const ComplexMatrix& slot);

/// First L rows of the Sylvester–Hadamard matrix of order MQ.
PilotSet gen_pilots(const SystemConfig& cfg);

/// G = a(φ_st, θ_st) · bᵀ(φ_risA, θ_risA), gain-free, L×N.
ComplexMatrix gen_channel(const SceneTruth& truth, const SystemConfig& cfg);

/// F_τν = Gᵀ [X]_(1) D(c(τ) ⊗ d(ν)), N×MQ.
ComplexMatrix delay_doppler_factor(double tau_s, double nu_hz, const ComplexMatrix& g,
                                   const PilotSet& pilots, const SystemConfig& cfg);

/// Target angle steering p(φ_risD, θ_risD) of the RIS.
ComplexVector target_steering(const SceneTruth& truth, const SystemConfig& cfg);

/// p′ = vecᵀ(p pᵀ), a 1×N² row.
ComplexRowVector angle_row(const ComplexVector& p);

/// Noiseless received tensor L×MQ×T through the nested Tucker route:
///   α · core ×1 G ×2 F_τνᵀ ×3 S ×4 p′.
/// Throws Errc::identifiability when the configuration fails the nested-model
/// conditions, Errc::configuration for multi-group configurations.
ComplexTensor synthesize(const SceneTruth& truth, const SystemConfig& cfg,
                         const RisCodebook& codebook, const PilotSet& pilots);

/// The same tensor evaluated sample by sample from the per-sample echo
/// equation, independent of every tensor-algebra routine.
ComplexTensor synthesize_direct(const SceneTruth& truth, const SystemConfig& cfg,
                                const RisCodebook& codebook, const PilotSet& pilots);

/// α·(p′ ⊗ F_τνᵀ ⊗ G)ᵀ, the N⁴×LMQ effective channel with [Y]_(3) = S·H_eff.
ComplexMatrix effective_channel(cd alpha, const ComplexVector& p, const ComplexMatrix& f_tau_nu,
                                const ComplexMatrix& g);
ComplexMatrix true_effective_channel(const SceneTruth& truth, const SystemConfig& cfg,
                                     const PilotSet& pilots);

struct NoisyTensor {
    ComplexTensor y;
    double realized_snr_db = 0.0;
};

/// Adds circular white Gaussian noise scaled so that ‖Y‖²/‖Z‖² equals the
/// target SNR exactly for the drawn realization. +inf returns Y unchanged.
NoisyTensor add_noise(const ComplexTensor& y, double snr_db, std::uint64_t seed);

/// Random target: angles U(0°, 90°), distances and velocity from the ranges,
/// τ = 2·(d1 + d2)/c, ν = 2·v·f_c/c, |α| from a radar-equation amplitude with
/// the RCS folded in and a uniform phase.
SceneTruth random_scene(const SystemConfig& cfg, const SceneRanges& ranges, Rng& rng);

}  // namespace bdsense
