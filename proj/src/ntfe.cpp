#include "bdsense/ntfe.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "bdsense/error.hpp"
#include "bdsense/rng.hpp"

namespace bdsense {

void BalsOptions::validate() const {
    if (i_max < 1) throw Error(Errc::configuration, "i_max must be at least 1");
    if (!(delta > 0.0)) throw Error(Errc::configuration, "delta must be positive");
    if (!(pinv_tol > 0.0)) throw Error(Errc::configuration, "pinv_tol must be positive");
}

NestedTuckerModel::NestedTuckerModel(ComplexMatrix g, const ComplexMatrix& selection)
    : g_(std::move(g)), t_(selection.rows()) {
    n_ = g_.cols();
    const Index n4 = n_ * n_ * n_ * n_;
    if (selection.cols() != n4)
        throw Error(Errc::shape,
                    fmt::format("selection matrix has {} columns, group of {} needs {}", selection.cols(), n_, n4));
    core_s_g_ = mode_product(core_times_mode3(selection, n_), g_, 1);
}

ComplexMatrix NestedTuckerModel::mode2_operator(const ComplexRowVector& p_prime) const {
    return unfold(mode_product(core_s_g_, p_prime, 4), 2);
}

ComplexMatrix NestedTuckerModel::mode4_operator(const ComplexMatrix& f1) const {
    return unfold(mode_product(core_s_g_, f1, 2), 4);
}

ComplexTensor NestedTuckerModel::reconstruct(const ComplexMatrix& f1, const ComplexRowVector& p_prime) const {
    const ComplexTensor y = mode_product(mode_product(core_s_g_, p_prime, 4), f1, 2);
    return y.reshaped({g_.rows(), f1.rows(), t_});
}

namespace {

void require_finite(double e, const char* stage) {
    if (!std::isfinite(e))
        throw Error(Errc::numerical_divergence, fmt::format("{} produced a non-finite residual", stage));
}

bool keep_going(const std::vector<double>& trace, int iterations, const BalsOptions& opts) {
    if (iterations >= opts.i_max) return false;
    if (trace.size() < 2) return true;
    return std::abs(trace.back() - trace[trace.size() - 2]) >= opts.delta;
}

ComplexVector row_as_vector(const ComplexTensor& y) {
    return Eigen::Map<const ComplexVector>(y.data().data(), y.size());
}

}  // namespace

Stage1Result stage1_bals(const ComplexTensor& y, const NestedTuckerModel& model, const BalsOptions& opts) {
    opts.validate();
    const Index n = model.group_size();
    const Index l = model.antennas();
    const Index t = model.slots();
    if (y.order() != 3 || y.extent(1) != l || y.extent(3) != t)
        throw Error(Errc::shape, fmt::format("received tensor must be {}x(MQ)x{}", l, t));
    const Index mq = y.extent(2);
    if (l * t < n || l * mq * t < n * n)
        throw Error(Errc::identifiability,
                    fmt::format("stage 1 needs LT >= N and LMQT >= N^2 (L={}, MQ={}, T={}, N={})", l, mq, t, n));

    const double y_energy = y.squared_norm();
    if (!(y_energy > 0.0) || !std::isfinite(y_energy))
        throw Error(Errc::degenerate_input, "received tensor is zero or non-finite");

    Rng rng(derive_seed(opts.seed, {1}));
    Stage1Result r;
    r.f1 = complex_normal_matrix(mq, n, rng);
    r.p_prime = complex_normal_matrix(1, n * n, rng);

    const ComplexMatrix y2 = unfold(y, 2);
    const ComplexRowVector y4 = row_as_vector(y).transpose();

    ComplexMatrix p2 = model.mode4_operator(r.f1);
    r.error_trace.push_back((y4 - r.p_prime * p2).squaredNorm() / y_energy);
    require_finite(r.error_trace.back(), "stage-1 initialization");

    while (keep_going(r.error_trace, r.iterations, opts)) {
        r.f1 = apply_pinv_right(y2, model.mode2_operator(r.p_prime), opts.pinv_tol);
        p2 = model.mode4_operator(r.f1);
        r.p_prime = apply_pinv_right(y4, p2, opts.pinv_tol);
        ++r.iterations;
        r.error_trace.push_back((y4 - r.p_prime * p2).squaredNorm() / y_energy);
        require_finite(r.error_trace.back(), "stage-1 BALS");
    }
    return r;
}

Stage2Result stage2_bals(const ComplexMatrix& f1, const ComplexMatrix& g, const PilotSet& pilots,
                         const BalsOptions& opts) {
    opts.validate();
    const Index n = g.cols();
    const Index m = pilots.x.extent(2);
    const Index q = pilots.x.extent(3);
    if (pilots.x.extent(1) != g.rows())
        throw Error(Errc::shape, "pilot tensor and channel disagree on the antenna count");
    if (f1.rows() != m * q || f1.cols() != n)
        throw Error(Errc::shape, fmt::format("stage-1 factor must be {}x{}, got {}x{}", m * q, n, f1.rows(), f1.cols()));
    if (n * q < 1 || n * m < 1) throw Error(Errc::identifiability, "stage 2 needs NQ >= 1 and NM >= 1");

    const ComplexTensor f_hat = fold(f1.transpose(), 1, {n, m, q});
    const double f_energy = f_hat.squared_norm();
    if (!(f_energy > 0.0) || !std::isfinite(f_energy))
        throw Error(Errc::degenerate_input, "stage-1 factor is zero or non-finite");
    const ComplexVector f2 = vec(unfold(f_hat, 2));
    const ComplexVector f3 = vec(unfold(f_hat, 3));
    const ComplexTensor xg = mode_product(pilots.x, g.transpose(), 1);
    const ComplexMatrix eye_m = ComplexMatrix::Identity(m, m);
    const ComplexMatrix eye_q = ComplexMatrix::Identity(q, q);

    Rng rng(derive_seed(opts.seed, {2}));
    Stage2Result r;
    r.d = complex_normal_matrix(m, 1, rng);
    r.c = complex_normal_matrix(q, 1, rng);

    const auto residual_for_c = [&](const ComplexMatrix& a_c) { return (f3 - a_c * r.c).squaredNorm() / f_energy; };
    {
        const ComplexMatrix b_c = unfold(mode_product(xg, ComplexMatrix(r.d.asDiagonal()), 2), 3);
        r.error_trace.push_back(residual_for_c(khatri_rao(b_c.transpose(), eye_q)));
        require_finite(r.error_trace.back(), "stage-2 initialization");
    }

    while (keep_going(r.error_trace, r.iterations, opts)) {
        const ComplexMatrix b_d = unfold(mode_product(xg, ComplexMatrix(r.c.asDiagonal()), 3), 2);
        r.d = pinv(khatri_rao(b_d.transpose(), eye_m), opts.pinv_tol) * f2;
        const ComplexMatrix b_c = unfold(mode_product(xg, ComplexMatrix(r.d.asDiagonal()), 2), 3);
        const ComplexMatrix a_c = khatri_rao(b_c.transpose(), eye_q);
        r.c = pinv(a_c, opts.pinv_tol) * f3;
        ++r.iterations;
        r.error_trace.push_back(residual_for_c(a_c));
        require_finite(r.error_trace.back(), "stage-2 BALS");
    }
    return r;
}

ComplexMatrix reconstruct_f(double tau_s, double nu_hz, const ComplexMatrix& g, const PilotSet& pilots,
                            const SystemConfig& cfg) {
    return delay_doppler_factor(tau_s, nu_hz, g, pilots, cfg);
}

ComplexMatrix estimate_angle_matrix(const ComplexTensor& y, const ComplexMatrix& f_param,
                                    const NestedTuckerModel& model, double pinv_tol) {
    const Index n = model.group_size();
    if (y.order() != 3 || y.extent(1) != model.antennas() || y.extent(3) != model.slots())
        throw Error(Errc::shape, "received tensor does not match the model");
    if (f_param.rows() != n || f_param.cols() != y.extent(2))
        throw Error(Errc::shape, "parametric factor must be N x MQ");
    if (y.size() < n * n)
        throw Error(Errc::identifiability, "angle-matrix extraction needs LMQT >= N^2");
    const ComplexRowVector y4 = row_as_vector(y).transpose();
    const ComplexRowVector p_row = apply_pinv_right(y4, model.mode4_operator(f_param.transpose()), pinv_tol);
    return unvec(p_row.transpose(), n, n);
}

cd estimate_gain(const ComplexTensor& y, const ComplexTensor& y_unit, double eps) {
    if (y.shape() != y_unit.shape()) throw Error(Errc::shape, "gain estimation needs equal shapes");
    const auto num = y.data();
    const auto den = y_unit.data();
    double peak = 0.0;
    for (const cd& v : den) peak = std::max(peak, std::abs(v));
    const double floor = eps * peak;
    cd sum{0.0, 0.0};
    Index used = 0;
    for (std::size_t i = 0; i < den.size(); ++i) {
        if (!(std::abs(den[i]) >= floor) || den[i] == cd{0.0, 0.0}) continue;
        sum += num[i] / den[i];
        ++used;
    }
    if (used * 100 < y.size())
        throw Error(Errc::gain_unrecoverable,
                    fmt::format("only {} of {} entries usable for the gain ratio", used, y.size()));
    return sum / static_cast<double>(used);
}

cd estimate_gain_ls(const ComplexTensor& y, const ComplexTensor& y_unit) {
    if (y.shape() != y_unit.shape()) throw Error(Errc::shape, "gain estimation needs equal shapes");
    const Eigen::Map<const ComplexVector> num(y.data().data(), y.size());
    const Eigen::Map<const ComplexVector> den(y_unit.data().data(), y_unit.size());
    const double energy = den.squaredNorm();
    if (!(energy > 0.0) || !std::isfinite(energy))
        throw Error(Errc::gain_unrecoverable, "unit-gain reconstruction is zero or non-finite");
    return den.dot(num) / energy;
}

EstimationResult run_ntfe(const ComplexTensor& y, const ComplexMatrix& g, const ComplexMatrix& selection,
                          const PilotSet& pilots, const SystemConfig& cfg, const BalsOptions& opts) {
    if (g.rows() != cfg.st_antennas() || g.cols() != cfg.ris_elements())
        throw Error(Errc::shape, "channel does not match the configured arrays");
    const NestedTuckerModel model(g, selection);

    EstimationResult est;
    auto& diag = est.diagnostics;

    const Stage1Result s1 = stage1_bals(y, model, opts);
    diag.iterations_stage1 = s1.iterations;
    diag.residual_stage1 = s1.error_trace.back();
    diag.trace_stage1 = s1.error_trace;

    Stage2Result s2 = stage2_bals(s1.f1, g, pilots, opts);
    diag.iterations_stage2 = s2.iterations;
    diag.residual_stage2 = s2.error_trace.back();
    diag.trace_stage2 = s2.error_trace;

    if (std::abs(s2.c(0)) > 0.0) s2.c /= s2.c(0);
    if (std::abs(s2.d(0)) > 0.0) s2.d /= s2.d(0);
    est.tau_s = tone_to_delay(single_tone(s2.c).omega, cfg.delta_f_hz);
    est.nu_hz = tone_to_doppler(single_tone(s2.d).omega, cfg.symbol_duration());

    const ComplexMatrix f_param = reconstruct_f(est.tau_s, est.nu_hz, g, pilots, cfg);
    const ComplexMatrix p_hat = estimate_angle_matrix(y, f_param, model, opts.pinv_tol);
    const AngleEstimate angles = esprit_2d(p_hat, cfg.n_y, cfg.n_z);
    est.phi = angles.phi;
    est.theta = angles.theta;
    diag.rank1_ratio = angles.rank1_ratio;
    if (angles.unreliable_subspace)
        diag.warnings.push_back(fmt::format("angle matrix rank-1 energy ratio {:.3f} below {}", angles.rank1_ratio,
                                            kRank1Warning));

    const ComplexVector p = steering_towards(est.phi, est.theta, cfg.n_y, cfg.n_z);
    const ComplexTensor y_unit = model.reconstruct(f_param.transpose(), angle_row(p));
    est.alpha = opts.gain_rule == GainRule::least_squares ? estimate_gain_ls(y, y_unit) : estimate_gain(y, y_unit);
    return est;
}

ComplexMatrix reassemble_effective_channel(const EstimationResult& est, const ComplexMatrix& g,
                                           const PilotSet& pilots, const SystemConfig& cfg) {
    const ComplexVector p = steering_towards(est.phi, est.theta, cfg.n_y, cfg.n_z);
    return effective_channel(est.alpha, p, reconstruct_f(est.tau_s, est.nu_hz, g, pilots, cfg), g);
}

}  // namespace bdsense
