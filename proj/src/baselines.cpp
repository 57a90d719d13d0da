#include "bdsense/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "bdsense/error.hpp"

namespace bdsense {

EffectiveChannel direct_ls(const ComplexTensor& y, const ComplexMatrix& selection, double pinv_tol) {
    if (y.order() != 3) throw Error(Errc::shape, "received tensor must be of order 3");
    const Index t = y.extent(3);
    if (selection.rows() != t)
        throw Error(Errc::shape, fmt::format("selection matrix has {} rows, tensor has {} slots", selection.rows(), t));
    const Index n4 = selection.cols();
    if (t < n4) throw Error(Errc::identifiability, fmt::format("direct LS needs T >= N^4 ({} < {})", t, n4));
    return {pinv(selection, pinv_tol) * unfold(y, 3)};
}

ComplexMatrix kronecker_rearrange(const ComplexMatrix& a, Index m1, Index n1, Index m2, Index n2) {
    if (m1 < 1 || n1 < 1 || m2 < 1 || n2 < 1 || a.rows() != m1 * m2 || a.cols() != n1 * n2)
        throw Error(Errc::shape, fmt::format("{}x{} does not factor as ({}x{}) kron ({}x{})", a.rows(), a.cols(), m1,
                                             n1, m2, n2));
    ComplexMatrix r(m1 * n1, m2 * n2);
    for (Index j1 = 0; j1 < n1; ++j1)
        for (Index i1 = 0; i1 < m1; ++i1)
            for (Index j2 = 0; j2 < n2; ++j2)
                for (Index i2 = 0; i2 < m2; ++i2) r(i1 + m1 * j1, i2 + m2 * j2) = a(i2 + m2 * i1, j2 + n2 * j1);
    return r;
}

KroneckerPair nearest_kronecker(const ComplexMatrix& a, Index m1, Index n1, Index m2, Index n2) {
    const ComplexMatrix r = kronecker_rearrange(a, m1, n1, m2, n2);
    const Eigen::JacobiSVD<ComplexMatrix> svd(r, Eigen::ComputeThinU | Eigen::ComputeThinV);
    KroneckerPair out;
    out.sigma = svd.singularValues()(0);
    out.b = unvec(svd.matrixU().col(0), m1, n1);
    out.c = unvec(out.sigma * svd.matrixV().col(0).conjugate(), m2, n2);
    return out;
}

KronFactors kron_factorize(const ComplexMatrix& h, const KronDims& dims) {
    const Index n = dims.n;
    const Index n2 = n * n;
    if (n < 1 || dims.mq < 1 || dims.l < 1 || h.rows() != n2 * n2 || h.cols() != dims.l * dims.mq)
        throw Error(Errc::shape, fmt::format("effective channel is {}x{}, expected {}x{}", h.rows(), h.cols(), n2 * n2,
                                             dims.l * dims.mq));
    const KroneckerPair outer = nearest_kronecker(h, n2, 1, n2, dims.l * dims.mq);
    const KroneckerPair inner = nearest_kronecker(outer.c, n, dims.mq, n, dims.l);

    KronFactors out;
    out.p_prime = outer.b.transpose();
    out.f = inner.b;
    out.g = inner.c.transpose();
    out.h = kronecker(outer.b, kronecker(inner.b, inner.c));
    return out;
}

EffectiveChannel kf_project(const ComplexMatrix& h_ls, const KronDims& dims, KfSplit split) {
    if (split == KfSplit::nested) return {kron_factorize(h_ls, dims).h};
    const Index n2 = dims.n * dims.n;
    if (dims.n < 1 || dims.mq < 1 || dims.l < 1 || h_ls.rows() != n2 * n2 || h_ls.cols() != dims.l * dims.mq)
        throw Error(Errc::shape, fmt::format("effective channel is {}x{}, expected {}x{}", h_ls.rows(), h_ls.cols(),
                                             n2 * n2, dims.l * dims.mq));
    const KroneckerPair pair = nearest_kronecker(h_ls, n2, 1, n2, dims.l * dims.mq);
    return {kronecker(pair.b, pair.c)};
}

EffectiveChannel kf_estimate(const ComplexTensor& y, const ComplexMatrix& selection, const KronDims& dims,
                             KfSplit split, double pinv_tol) {
    return kf_project(direct_ls(y, selection, pinv_tol).h, dims, split);
}

MlGrid MlGrid::defaults(const SystemConfig& cfg) {
    const double ts = cfg.symbol_duration();
    MlGrid g;
    g.tau = {0.0, 1.0 / cfg.delta_f_hz, 64};
    g.nu = {-0.5 / ts, 0.5 / ts, 64};
    g.phi = {0.0, std::numbers::pi / 2.0, 32};
    g.theta = {0.0, std::numbers::pi / 2.0, 32};
    g.refinements = 3;
    return g;
}

void MlGrid::validate() const {
    const auto check = [](const GridAxis& a, const char* name) {
        if (!(a.hi > a.lo) || !std::isfinite(a.lo) || !std::isfinite(a.hi))
            throw Error(Errc::configuration, fmt::format("ML grid axis {} has an empty range", name));
        if (a.count < 2) throw Error(Errc::configuration, fmt::format("ML grid axis {} needs at least 2 points", name));
    };
    check(tau, "tau");
    check(nu, "nu");
    check(phi, "phi");
    check(theta, "theta");
    if (refinements < 0) throw Error(Errc::configuration, "ML refinement count must be non-negative");
}

MlObjective::MlObjective(const ComplexTensor& y, const ComplexMatrix& g, const RisCodebook& codebook,
                         const PilotSet& pilots, const SystemConfig& cfg)
    : y_(y), g_(g), codebook_(codebook), x_(pilots.matrix()), cfg_(cfg) {
    const Index mq = cfg.m * cfg.q;
    if (y.order() != 3 || y.extent(1) != g.rows() || y.extent(2) != mq ||
        y.extent(3) != static_cast<Index>(codebook.slots.size()))
        throw Error(Errc::shape, "received tensor does not match channel, pilots and codebook");
    if (x_.rows() != g.rows() || x_.cols() != mq) throw Error(Errc::shape, "pilot matrix does not match the channel");
    y_energy_ = y.squared_norm();
}

MlObjective::AngleTerms MlObjective::angle_terms(double phi, double theta) const {
    const ComplexVector p = steering_towards(phi, theta, cfg_.n_y, cfg_.n_z);
    const Index l = g_.rows();
    const Index mq = x_.cols();
    AngleTerms out;
    out.k = ComplexVector::Zero(mq);
    const cd* data = y_.data().data();
    for (std::size_t t = 0; t < codebook_.slots.size(); ++t) {
        const ComplexVector v = g_ * (codebook_.slots[t].transpose() * p);
        const ComplexRowVector vx = v.transpose() * x_;
        const Eigen::Map<const ComplexMatrix> yt(data + static_cast<Index>(t) * l * mq, l, mq);
        const ComplexRowVector vy = v.adjoint() * yt;
        out.k += (vx.conjugate().cwiseProduct(vy)).transpose();
        out.energy += v.squaredNorm() * vx.squaredNorm();
    }
    return out;
}

ComplexVector MlObjective::phasors(double tau_s, double nu_hz) const {
    return kronecker(delay_vector(tau_s, cfg_.q, cfg_.delta_f_hz),
                     doppler_vector(nu_hz, cfg_.m, cfg_.symbol_duration()));
}

double MlObjective::misfit(const AngleTerms& a, const ComplexVector& phasor) const {
    if (!(a.energy > 0.0)) return y_energy_;
    return std::max(0.0, y_energy_ - std::norm(phasor.dot(a.k)) / a.energy);
}

double MlObjective::misfit_any_delay(const AngleTerms& a) const {
    if (!(a.energy > 0.0)) return y_energy_;
    const double s = a.k.cwiseAbs().sum();
    return std::max(0.0, y_energy_ - s * s / a.energy);
}

cd MlObjective::gain(const AngleTerms& a, const ComplexVector& phasor) const {
    if (!(a.energy > 0.0)) return {0.0, 0.0};
    return phasor.dot(a.k) / a.energy;
}

namespace {

// Minimizes f over a 2D product grid; the first strictly better point wins,
// so equal objectives keep the lowest linear index.
template <typename F>
std::pair<double, double> search_2d(const std::vector<double>& a_nodes, const std::vector<double>& b_nodes, F&& f,
                                    double& best) {
    best = std::numeric_limits<double>::infinity();
    std::pair<double, double> arg{a_nodes.front(), b_nodes.front()};
    for (double b : b_nodes)
        for (double a : a_nodes) {
            const double v = f(a, b);
            if (v < best) {
                best = v;
                arg = {a, b};
            }
        }
    return arg;
}

std::vector<double> full_axis(const GridAxis& axis) {
    std::vector<double> v(static_cast<std::size_t>(axis.count));
    for (Index k = 0; k < axis.count; ++k) v[static_cast<std::size_t>(k)] = axis.node(k);
    return v;
}

// 2·half + 1 points centered on c, clipped to the axis range.
std::vector<double> local_axis(double c, double step, Index half, const GridAxis& axis) {
    std::vector<double> v;
    for (Index k = -half; k <= half; ++k) {
        const double x = c + static_cast<double>(k) * step;
        if (x >= axis.lo && x < axis.hi) v.push_back(x);
    }
    if (v.empty()) v.push_back(c);
    return v;
}

}  // namespace

EstimationResult seq_ml(const ComplexTensor& y, const ComplexMatrix& g, const RisCodebook& codebook,
                        const PilotSet& pilots, const SystemConfig& cfg, const MlGrid& grid) {
    grid.validate();
    const MlObjective obj(y, g, codebook, pilots, cfg);
    if (!(obj.data_energy() > 0.0) || !std::isfinite(obj.data_energy()))
        throw Error(Errc::degenerate_input, "received tensor is zero or non-finite");

    const std::vector<double> tau_full = full_axis(grid.tau);
    const std::vector<double> nu_full = full_axis(grid.nu);
    const std::vector<double> phi_full = full_axis(grid.phi);
    const std::vector<double> theta_full = full_axis(grid.theta);

    double best = 0.0;
    auto [phi, theta] = search_2d(
        phi_full, theta_full, [&](double a, double b) { return obj.misfit_any_delay(obj.angle_terms(a, b)); }, best);
    MlObjective::AngleTerms terms = obj.angle_terms(phi, theta);

    double tau = 0.0;
    double nu = 0.0;
    const auto delay_doppler_step = [&](const std::vector<double>& taus, const std::vector<double>& nus) {
        std::tie(tau, nu) = search_2d(
            taus, nus, [&](double a, double b) { return obj.misfit(terms, obj.phasors(a, b)); }, best);
    };
    const auto angle_step = [&](const std::vector<double>& phis, const std::vector<double>& thetas) {
        const ComplexVector ph = obj.phasors(tau, nu);
        std::tie(phi, theta) = search_2d(
            phis, thetas, [&](double a, double b) { return obj.misfit(obj.angle_terms(a, b), ph); }, best);
        terms = obj.angle_terms(phi, theta);
    };

    for (int round = 0; round < 2; ++round) {
        delay_doppler_step(tau_full, nu_full);
        angle_step(phi_full, theta_full);
    }

    double d_tau = grid.tau.step();
    double d_nu = grid.nu.step();
    double d_phi = grid.phi.step();
    double d_theta = grid.theta.step();
    constexpr Index kHalfWindow = 2;
    for (int level = 0; level < grid.refinements; ++level) {
        d_tau /= 2.0;
        d_nu /= 2.0;
        d_phi /= 2.0;
        d_theta /= 2.0;
        delay_doppler_step(local_axis(tau, d_tau, kHalfWindow, grid.tau), local_axis(nu, d_nu, kHalfWindow, grid.nu));
        angle_step(local_axis(phi, d_phi, kHalfWindow, grid.phi),
                   local_axis(theta, d_theta, kHalfWindow, grid.theta));
    }

    EstimationResult est;
    est.tau_s = tau;
    est.nu_hz = nu;
    est.phi = phi;
    est.theta = theta;
    const ComplexVector ph = obj.phasors(tau, nu);
    est.alpha = obj.gain(terms, ph);
    est.diagnostics.objective = obj.misfit(terms, ph) / obj.data_energy();
    return est;
}

}  // namespace bdsense
