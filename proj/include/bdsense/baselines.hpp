#pragma once

#include <vector>

#include "bdsense/ntfe.hpp"
#include "bdsense/scene.hpp"
#include "bdsense/tensor.hpp"

namespace bdsense {

/// N⁴×LMQ matrix with [Y]_(3) = S·H_eff.
struct EffectiveChannel {
    ComplexMatrix h;
};

/// Ĥ_eff = pinv(S)·[Y]_(3).
/// Throws Errc::identifiability when T < N⁴, Errc::shape on mismatched inputs.
EffectiveChannel direct_ls(const ComplexTensor& y, const ComplexMatrix& selection,
                           double pinv_tol = kDefaultPinvTol);

struct KroneckerPair {
    ComplexMatrix b;  ///< unit Frobenius norm
    ComplexMatrix c;  ///< carries the scale
    double sigma = 0.0;
};

/// Van Loan–Pitsianis nearest Kronecker product: the B (m1×n1) and C (m2×n2)
/// minimizing ‖A − B ⊗ C‖_F, from the dominant singular pair of the
/// rearrangement R(A) with rows vec(B) and columns vec(C).
KroneckerPair nearest_kronecker(const ComplexMatrix& a, Index m1, Index n1, Index m2, Index n2);

/// The rearrangement itself: R(i1 + m1·j1, i2 + m2·j2) = A(i2 + m2·i1, j2 + n2·j1).
ComplexMatrix kronecker_rearrange(const ComplexMatrix& a, Index m1, Index n1, Index m2, Index n2);

struct KronDims {
    Index n = 0;   ///< RIS group size
    Index mq = 0;  ///< pilot columns
    Index l = 0;   ///< ST antennas
};

struct KronFactors {
    ComplexRowVector p_prime;  ///< 1×N², unit norm
    ComplexMatrix f;           ///< N×MQ, unit norm
    ComplexMatrix g;           ///< L×N, carries the overall scale
    ComplexMatrix h;           ///< reassembled (p̂′ ⊗ F̂ᵀ ⊗ Ĝ)ᵀ
};

/// Nested nearest-Kronecker factorization of H ≈ p′ᵀ ⊗ F ⊗ Gᵀ: p′ is split off
/// first, then the remainder is split into F and Gᵀ.
/// Throws Errc::shape when H is not N⁴×LMQ for the given dims.
KronFactors kron_factorize(const ComplexMatrix& h, const KronDims& dims);

enum class KfSplit {
    angle,   ///< one Van Loan split, p′ᵀ ⊗ (F ⊗ Gᵀ)
    nested,  ///< kron_factorize, p′ᵀ ⊗ F ⊗ Gᵀ
};

/// The KF baseline: direct LS followed by the chosen Kronecker projection.
EffectiveChannel kf_estimate(const ComplexTensor& y, const ComplexMatrix& selection, const KronDims& dims,
                             KfSplit split = KfSplit::angle, double pinv_tol = kDefaultPinvTol);
EffectiveChannel kf_project(const ComplexMatrix& h_ls, const KronDims& dims, KfSplit split);

struct GridAxis {
    double lo = 0.0;
    double hi = 1.0;
    Index count = 2;

    [[nodiscard]] double step() const { return (hi - lo) / static_cast<double>(count); }
    /// Cell-centered node k: lo + (k + ½)·step.
    [[nodiscard]] double node(Index k) const { return lo + (static_cast<double>(k) + 0.5) * step(); }
};

struct MlGrid {
    GridAxis tau;
    GridAxis nu;
    GridAxis phi;
    GridAxis theta;
    int refinements = 3;

    /// 64 points over [0, 1/Δf) and [−1/(2T_s), 1/(2T_s)), 32 over (0, π/2)
    /// per angle, three step halvings.
    static MlGrid defaults(const SystemConfig& cfg);

    /// Throws Errc::configuration on empty ranges, fewer than two points or a
    /// negative refinement count.
    void validate() const;
};

/// Least-squares data misfit of the single-target model, with the gain
/// profiled out: J(τ,ν,φ,θ) = ‖Y‖² − |⟨Ŷ₁,Y⟩|²/‖Ŷ₁‖², where Ŷ₁ is the
/// unit-gain forward model. The model is rank one in every slot,
///   Ŷ₁[:,:,t] = v_t v_tᵀ [X]_(1) D(c⊗d),  v_t = G S_tᵀ p,
/// so the angle-dependent part is reduced once per angle pair and the
/// delay-Doppler part becomes an MQ-term inner product.
class MlObjective {
public:
    MlObjective(const ComplexTensor& y, const ComplexMatrix& g, const RisCodebook& codebook,
                const PilotSet& pilots, const SystemConfig& cfg);

    struct AngleTerms {
        ComplexVector k;    ///< Σ_t conj(v_tᵀX)_mq (v_tᴴ Y_t)_mq, length MQ
        double energy = 0;  ///< ‖Ŷ₁‖², independent of τ and ν
    };

    [[nodiscard]] AngleTerms angle_terms(double phi, double theta) const;
    [[nodiscard]] ComplexVector phasors(double tau_s, double nu_hz) const;  ///< c(τ) ⊗ d(ν)

    [[nodiscard]] double misfit(const AngleTerms& a, const ComplexVector& phasor) const;
    /// Misfit with the delay-Doppler phasors maximized out; a lower bound on
    /// misfit() for every (τ, ν).
    [[nodiscard]] double misfit_any_delay(const AngleTerms& a) const;
    [[nodiscard]] cd gain(const AngleTerms& a, const ComplexVector& phasor) const;
    [[nodiscard]] double data_energy() const noexcept { return y_energy_; }

private:
    const ComplexTensor& y_;
    const ComplexMatrix& g_;
    const RisCodebook& codebook_;
    ComplexMatrix x_;
    const SystemConfig& cfg_;
    double y_energy_ = 0.0;
};

/// Sequential grid-search maximum likelihood: angle initialization with the
/// delay-Doppler phasors maximized out, a full (τ,ν) search, a full (φ,θ)
/// search, one more round of both, then `refinements` local 5×5 searches at
/// successively halved steps. Ties resolve to the lowest linear grid index.
/// diagnostics.objective holds the final misfit over ‖Y‖².
EstimationResult seq_ml(const ComplexTensor& y, const ComplexMatrix& g, const RisCodebook& codebook,
                        const PilotSet& pilots, const SystemConfig& cfg, const MlGrid& grid);

}  // namespace bdsense
