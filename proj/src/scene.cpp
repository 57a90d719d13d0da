#include "bdsense/scene.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "bdsense/error.hpp"

namespace bdsense {

using std::numbers::pi;

void SystemConfig::validate() const {
    const auto positive = [](Index v, const char* name) {
        if (v < 1) throw Error(Errc::configuration, fmt::format("{} must be at least 1, got {}", name, v));
    };
    positive(l_y, "l_y");
    positive(l_z, "l_z");
    positive(n_y, "n_y");
    positive(n_z, "n_z");
    positive(m, "m");
    positive(q, "q");
    positive(t, "t");
    if (!(delta_f_hz > 0.0) || !std::isfinite(delta_f_hz))
        throw Error(Errc::configuration, "delta_f_hz must be positive");
    if (!(carrier_hz > 0.0) || !std::isfinite(carrier_hz))
        throw Error(Errc::configuration, "carrier_hz must be positive");
    if (!group_sizes.empty()) {
        Index sum = 0;
        for (Index g : group_sizes) {
            positive(g, "group size");
            sum += g;
        }
        if (sum != ris_elements())
            throw Error(Errc::configuration,
                        fmt::format("group sizes sum to {} but the RIS has {} elements", sum, ris_elements()));
    }
}

ComplexVector upa_steering(double mu, double psi, Index n_y, Index n_z) {
    ComplexVector a(n_y * n_z);
    for (Index iy = 0; iy < n_y; ++iy)
        for (Index iz = 0; iz < n_z; ++iz)
            a(iz + n_z * iy) = std::polar(1.0, -(static_cast<double>(iy) * mu + static_cast<double>(iz) * psi));
    return a;
}

SpatialFreqs spatial_freqs(double phi, double theta) {
    return {pi * std::sin(phi) * std::sin(theta), pi * std::cos(phi)};
}

ComplexVector steering_towards(double phi, double theta, Index n_y, Index n_z) {
    const auto f = spatial_freqs(phi, theta);
    return upa_steering(f.mu, f.psi, n_y, n_z);
}

ComplexVector delay_vector(double tau_s, Index q, double delta_f_hz) {
    ComplexVector c(q);
    for (Index i = 0; i < q; ++i) c(i) = std::polar(1.0, -2.0 * pi * static_cast<double>(i) * delta_f_hz * tau_s);
    return c;
}

ComplexVector doppler_vector(double nu_hz, Index m, double symbol_s) {
    ComplexVector d(m);
    for (Index i = 0; i < m; ++i) d(i) = std::polar(1.0, 2.0 * pi * static_cast<double>(i) * symbol_s * nu_hz);
    return d;
}

ComplexMatrix random_unitary(Index n, Rng& rng) {
    const ComplexMatrix z = complex_normal_matrix(n, n, rng);
    Eigen::HouseholderQR<ComplexMatrix> qr(z);
    ComplexMatrix q = qr.householderQ();
    const ComplexMatrix& r = qr.matrixQR();
    for (Index i = 0; i < n; ++i) {
        const double mag = std::abs(r(i, i));
        if (mag > 0.0) q.col(i) *= r(i, i) / mag;
    }
    return q;
}

ComplexRowVector selection_row(const ComplexMatrix& slot) {
    const ComplexMatrix st = slot.transpose();
    const ComplexMatrix k = kronecker(st, st);
    return vec(k).transpose();
}

RisCodebook gen_codebook(const SystemConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Index n = cfg.ris_elements();
    Rng rng(seed);
    RisCodebook cb;
    cb.slots.reserve(static_cast<std::size_t>(cfg.t));
    cb.selection.resize(cfg.t, n * n * n * n);
    for (Index t = 0; t < cfg.t; ++t) {
        cb.slots.push_back(random_unitary(n, rng));
        cb.selection.row(t) = selection_row(cb.slots.back());
    }
    return cb;
}

PilotSet gen_pilots(const SystemConfig& cfg) {
    cfg.validate();
    const Index l = cfg.st_antennas();
    const Index mq = cfg.m * cfg.q;
    if (!std::has_single_bit(static_cast<std::uint64_t>(mq)))
        throw Error(Errc::configuration, fmt::format("Hadamard pilots need M·Q to be a power of two, got {}", mq));
    if (l > mq)
        throw Error(Errc::configuration,
                    fmt::format("{} orthogonal pilot rows do not fit in {} columns", l, mq));
    ComplexMatrix x1(l, mq);
    for (Index r = 0; r < l; ++r)
        for (Index c = 0; c < mq; ++c)
            x1(r, c) = (std::popcount(static_cast<std::uint64_t>(r & c)) % 2 == 0) ? 1.0 : -1.0;
    return {fold(x1, 1, {l, cfg.m, cfg.q})};
}

ComplexMatrix gen_channel(const SceneTruth& truth, const SystemConfig& cfg) {
    const ComplexVector a = steering_towards(truth.phi_st, truth.theta_st, cfg.l_y, cfg.l_z);
    const ComplexVector b = steering_towards(truth.phi_ris_a, truth.theta_ris_a, cfg.n_y, cfg.n_z);
    return a * b.transpose();
}

ComplexMatrix delay_doppler_factor(double tau_s, double nu_hz, const ComplexMatrix& g,
                                   const PilotSet& pilots, const SystemConfig& cfg) {
    const ComplexVector c = delay_vector(tau_s, cfg.q, cfg.delta_f_hz);
    const ComplexVector d = doppler_vector(nu_hz, cfg.m, cfg.symbol_duration());
    const ComplexVector cd_diag = kronecker(c, d);
    return g.transpose() * pilots.matrix() * cd_diag.asDiagonal();
}

ComplexVector target_steering(const SceneTruth& truth, const SystemConfig& cfg) {
    return steering_towards(truth.phi_ris_d, truth.theta_ris_d, cfg.n_y, cfg.n_z);
}

ComplexRowVector angle_row(const ComplexVector& p) {
    const ComplexMatrix pp = p * p.transpose();
    return vec(pp).transpose();
}

namespace {

void require_single_group(const SystemConfig& cfg) {
    if (cfg.group_count() != 1)
        throw Error(Errc::configuration,
                    "scene synthesis processes one group; multi-group configurations are not supported");
}

}  // namespace

ComplexTensor synthesize(const SceneTruth& truth, const SystemConfig& cfg,
                         const RisCodebook& codebook, const PilotSet& pilots) {
    cfg.validate();
    require_single_group(cfg);
    const Index n = cfg.ris_elements();
    const Index l = cfg.st_antennas();
    if (l * cfg.t < n || l * cfg.m * cfg.q * cfg.t < n * n)
        throw Error(Errc::identifiability, "configuration violates LT >= N or LMQT >= N^2");

    const ComplexMatrix g = gen_channel(truth, cfg);
    const ComplexMatrix f = delay_doppler_factor(truth.tau_s, truth.nu_hz, g, pilots, cfg);
    const ComplexRowVector p_prime = angle_row(target_steering(truth, cfg));

    ComplexTensor y = core_times_mode3(codebook.selection, n);
    y = mode_product(y, p_prime, 4);
    y = mode_product(y, g, 1);
    y = mode_product(y, f.transpose(), 2);
    y *= truth.alpha;
    return y.reshaped({l, cfg.m * cfg.q, cfg.t});
}

ComplexTensor synthesize_direct(const SceneTruth& truth, const SystemConfig& cfg,
                                const RisCodebook& codebook, const PilotSet& pilots) {
    cfg.validate();
    require_single_group(cfg);
    const Index n = cfg.ris_elements();
    const Index l = cfg.st_antennas();
    const ComplexVector a = steering_towards(truth.phi_st, truth.theta_st, cfg.l_y, cfg.l_z);
    const ComplexVector b = steering_towards(truth.phi_ris_a, truth.theta_ris_a, cfg.n_y, cfg.n_z);
    const ComplexVector p = target_steering(truth, cfg);
    const ComplexVector c = delay_vector(truth.tau_s, cfg.q, cfg.delta_f_hz);
    const ComplexVector d = doppler_vector(truth.nu_hz, cfg.m, cfg.symbol_duration());

    ComplexTensor y({l, cfg.m * cfg.q, cfg.t});
    for (Index t = 0; t < cfg.t; ++t) {
        const ComplexMatrix& s = codebook.slots[static_cast<std::size_t>(t)];
        // Return path scalar bᵀ S_tᵀ p and forward path scalar pᵀ S_t b.
        cd ret{0.0, 0.0};
        cd fwd{0.0, 0.0};
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) {
                ret += b(i) * s(j, i) * p(j);
                fwd += p(i) * s(i, j) * b(j);
            }
        for (Index q = 0; q < cfg.q; ++q)
            for (Index m = 0; m < cfg.m; ++m) {
                cd ax{0.0, 0.0};
                for (Index k = 0; k < l; ++k) ax += a(k) * pilots.x.at(k, m, q);
                const cd common = truth.alpha * ret * fwd * ax * c(q) * d(m);
                for (Index k = 0; k < l; ++k) y.at(k, m + cfg.m * q, t) = a(k) * common;
            }
    }
    return y;
}

ComplexMatrix effective_channel(cd alpha, const ComplexVector& p, const ComplexMatrix& f_tau_nu,
                                const ComplexMatrix& g) {
    const ComplexMatrix p_prime = angle_row(p);
    const ComplexMatrix inner = kronecker(f_tau_nu.transpose(), g);
    return alpha * kronecker(p_prime, inner).transpose();
}

ComplexMatrix true_effective_channel(const SceneTruth& truth, const SystemConfig& cfg,
                                     const PilotSet& pilots) {
    const ComplexMatrix g = gen_channel(truth, cfg);
    const ComplexMatrix f = delay_doppler_factor(truth.tau_s, truth.nu_hz, g, pilots, cfg);
    return effective_channel(truth.alpha, target_steering(truth, cfg), f, g);
}

NoisyTensor add_noise(const ComplexTensor& y, double snr_db, std::uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0) return {y, std::numeric_limits<double>::infinity()};
    if (!std::isfinite(snr_db)) throw Error(Errc::configuration, "SNR must be finite or +inf");
    Rng rng(seed);
    ComplexTensor z(y.shape());
    for (cd& v : z.data()) v = complex_normal(rng);
    const double signal = y.squared_norm();
    const double target = std::pow(10.0, snr_db / 10.0);
    z *= std::sqrt(signal / (target * z.squared_norm()));
    NoisyTensor out{y + z, 10.0 * std::log10(signal / z.squared_norm())};
    return out;
}

SceneTruth random_scene(const SystemConfig& cfg, const SceneRanges& ranges, Rng& rng) {
    std::uniform_real_distribution<double> angle(0.0, pi / 2.0);
    std::uniform_real_distribution<double> d1(ranges.d_st_ris_min_m, ranges.d_st_ris_max_m);
    std::uniform_real_distribution<double> d2(ranges.d_ris_target_min_m, ranges.d_ris_target_max_m);
    std::uniform_real_distribution<double> vel(ranges.velocity_min_mps, ranges.velocity_max_mps);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * pi);

    // uniform_real_distribution draws from [a, b); reject the closed endpoint
    // so angles stay in the open interval.
    const auto open_angle = [&] {
        double v = 0.0;
        do v = angle(rng);
        while (v <= 0.0);
        return v;
    };

    SceneTruth s;
    s.phi_ris_d = open_angle();
    s.theta_ris_d = open_angle();
    s.phi_st = open_angle();
    s.theta_st = open_angle();
    s.phi_ris_a = open_angle();
    s.theta_ris_a = open_angle();
    const double r1 = d1(rng);
    const double r2 = d2(rng);
    const double v = vel(rng);
    s.tau_s = 2.0 * (r1 + r2) / kSpeedOfLight;
    s.nu_hz = 2.0 * v * cfg.carrier_hz / kSpeedOfLight;
    const double amplitude = cfg.wavelength() * std::sqrt(ranges.rcs_m2) / (std::pow(4.0 * pi, 1.5) * r1 * r2);
    s.alpha = std::polar(amplitude, phase(rng));
    return s;
}

}  // namespace bdsense
