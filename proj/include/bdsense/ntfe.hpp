#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdsense/harmonic.hpp"
#include "bdsense/scene.hpp"
#include "bdsense/tensor.hpp"

namespace bdsense {

/// How the final gain is read off Y and the unit-gain reconstruction Y′.
enum class GainRule {
    least_squares,    ///< ⟨Y′, Y⟩ / ‖Y′‖², the |Y′|²-weighted mean of Y ⊘ Y′
    masked_division,  ///< unweighted mean of Y ⊘ Y′ over the unmasked entries
};

struct BalsOptions {
    int i_max = 500;
    double delta = 1e-6;  ///< threshold on |e(i) − e(i−1)|, e normalized by ‖data‖²
    std::uint64_t seed = 0;
    double pinv_tol = kDefaultPinvTol;
    GainRule gain_rule = GainRule::least_squares;

    void validate() const;
};

/// Operators of the nested Tucker model  Y = core ×1 G ×2 F1 ×3 S ×4 p′  for a
/// fixed known pair (G, S). The identity core is never formed densely; the
/// model keeps (core ×3 S) ×1 G, an L×N×T×N² tensor, and derives every
/// unfolding from it.
class NestedTuckerModel {
public:
    NestedTuckerModel(ComplexMatrix g, const ComplexMatrix& selection);

    [[nodiscard]] Index group_size() const noexcept { return n_; }
    [[nodiscard]] Index antennas() const noexcept { return g_.rows(); }
    [[nodiscard]] Index slots() const noexcept { return t_; }
    [[nodiscard]] const ComplexMatrix& channel() const noexcept { return g_; }

    /// [core]_(2) (p′ ⊗ S ⊗ G)ᵀ, N×LT.
    [[nodiscard]] ComplexMatrix mode2_operator(const ComplexRowVector& p_prime) const;
    /// [core]_(4) (S ⊗ F1 ⊗ G)ᵀ, N²×LMQT.
    [[nodiscard]] ComplexMatrix mode4_operator(const ComplexMatrix& f1) const;
    /// core ×1 G ×2 F1 ×3 S ×4 p′ as an L×MQ×T tensor.
    [[nodiscard]] ComplexTensor reconstruct(const ComplexMatrix& f1, const ComplexRowVector& p_prime) const;

private:
    ComplexMatrix g_;
    Index n_ = 0;
    Index t_ = 0;
    ComplexTensor core_s_g_;
};

struct Stage1Result {
    ComplexMatrix f1;           ///< MQ×N, tied to F_τνᵀ up to a scalar
    ComplexRowVector p_prime;   ///< 1×N²
    std::vector<double> error_trace;  ///< e(0) from the initialization, then one per iteration
    int iterations = 0;
};

struct Stage2Result {
    ComplexVector d;  ///< length M, λ₃·d(ν)
    ComplexVector c;  ///< length Q, λ₄·c(τ)
    std::vector<double> error_trace;
    int iterations = 0;
};

/// Alternates the two exact LS updates
///   F1 ← [Y]_(2) · pinv([core]_(2)(p′⊗S⊗G)ᵀ),  p′ ← [Y]_(4) · pinv([core]_(4)(S⊗F1⊗G)ᵀ)
/// from a complex-normal start until |e(i) − e(i−1)| < δ or i_max.
/// Throws Errc::identifiability (LT < N or LMQT < N²), Errc::shape,
/// Errc::numerical_divergence.
Stage1Result stage1_bals(const ComplexTensor& y, const NestedTuckerModel& model, const BalsOptions& opts);

/// Fits fold(F1ᵀ) ≈ X ×1 Gᵀ ×2 D(d) ×3 D(c) by alternating
///   d ← pinv(B_dᵀ ⋄ I_M) vec([F]_(2)),  B_d = [X ×1 Gᵀ ×3 D(c)]_(2)
///   c ← pinv(B_cᵀ ⋄ I_Q) vec([F]_(3)),  B_c = [X ×1 Gᵀ ×2 D(d)]_(3)
Stage2Result stage2_bals(const ComplexMatrix& f1, const ComplexMatrix& g, const PilotSet& pilots,
                         const BalsOptions& opts);

/// Gᵀ [X]_(1) (D(c(τ̂)) ⊗ D(d(ν̂))), N×MQ, free of any BALS scaling.
ComplexMatrix reconstruct_f(double tau_s, double nu_hz, const ComplexMatrix& g, const PilotSet& pilots,
                            const SystemConfig& cfg);

/// unvec_{N×N}([Y]_(4) · pinv([core]_(4)(S ⊗ F′ᵀ ⊗ G)ᵀ)) with F′ the N×MQ
/// parametric factor. Proportional to α·p pᵀ in the noiseless case.
ComplexMatrix estimate_angle_matrix(const ComplexTensor& y, const ComplexMatrix& f_param,
                                    const NestedTuckerModel& model, double pinv_tol = kDefaultPinvTol);

inline constexpr double kGainMaskThreshold = 1e-9;

/// Sample mean of Y ⊘ Y′ over the entries with |Y′| ≥ ε·max|Y′|.
/// Throws Errc::gain_unrecoverable when fewer than 1% of entries qualify.
cd estimate_gain(const ComplexTensor& y, const ComplexTensor& y_unit, double eps = kGainMaskThreshold);

/// ⟨Y′, Y⟩ / ‖Y′‖². Throws Errc::gain_unrecoverable when Y′ is zero.
cd estimate_gain_ls(const ComplexTensor& y, const ComplexTensor& y_unit);

struct EstimationDiagnostics {
    int iterations_stage1 = 0;
    int iterations_stage2 = 0;
    double residual_stage1 = 0.0;
    double residual_stage2 = 0.0;
    double rank1_ratio = 1.0;
    std::vector<double> trace_stage1;
    std::vector<double> trace_stage2;
    double objective = 0.0;  ///< final data misfit ‖Y − Ŷ‖²/‖Y‖² (ML baseline)
    std::vector<std::string> warnings;

    friend bool operator==(const EstimationDiagnostics&, const EstimationDiagnostics&) = default;
};

struct EstimationResult {
    double tau_s = 0.0;
    double nu_hz = 0.0;
    double phi = 0.0;
    double theta = 0.0;
    cd alpha{0.0, 0.0};
    EstimationDiagnostics diagnostics;

    friend bool operator==(const EstimationResult&, const EstimationResult&) = default;
};

/// Full pipeline: stage-1 BALS → stage-2 BALS → delay/Doppler tones →
/// parametric F′ → angle matrix → 2D angles → parametric P̂′ → unit-gain
/// reconstruction → gain by opts.gain_rule.
EstimationResult run_ntfe(const ComplexTensor& y, const ComplexMatrix& g, const ComplexMatrix& selection,
                          const PilotSet& pilots, const SystemConfig& cfg, const BalsOptions& opts);

/// Effective channel rebuilt from parametric estimates:
/// α̂·(p′(φ̂,θ̂) ⊗ F(τ̂,ν̂)ᵀ ⊗ G)ᵀ.
ComplexMatrix reassemble_effective_channel(const EstimationResult& est, const ComplexMatrix& g,
                                           const PilotSet& pilots, const SystemConfig& cfg);

}  // namespace bdsense
