#include "bdsense/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "bdsense/error.hpp"

namespace bdsense {

using std::numbers::pi;

namespace {

// Wraps x into [lo, lo + period).
double wrap(double x, double lo, double period) {
    double r = std::fmod(x - lo, period);
    if (r < 0.0) r += period;
    if (r >= period) r = 0.0;
    return lo + r;
}

// The (0, π) prior on both spatial frequencies: anything below −π/2 is a
// wrapped value from just under π rather than a small negative one.
double unwrap_into_prior(double w) { return w < -pi / 2.0 ? w + 2.0 * pi : w; }

}  // namespace

ToneEstimate single_tone(const ComplexVector& v) {
    if (v.size() < 2) throw Error(Errc::degenerate_input, "single-tone estimation needs at least two samples");
    const Index n = v.size() - 1;
    const auto head = v.head(n);
    const auto tail = v.tail(n);
    const double energy = head.squaredNorm();
    if (!(energy > 0.0) || !std::isfinite(energy))
        throw Error(Errc::degenerate_input, "single-tone estimation on an all-zero or non-finite vector");
    const cd rho = head.dot(tail) / energy;  // dot() conjugates the first argument
    ToneEstimate est;
    est.omega = std::arg(rho);
    if (est.omega <= -pi) est.omega = pi;
    const double tail_norm = tail.norm();
    est.residual = tail_norm > 0.0 ? (tail - rho * head).norm() / tail_norm : 0.0;
    return est;
}

double tone_to_delay(double omega, double delta_f_hz) {
    const double period = 1.0 / delta_f_hz;
    return wrap(-omega / (2.0 * pi * delta_f_hz), 0.0, period);
}

double tone_to_doppler(double omega, double symbol_s) {
    const double period = 1.0 / symbol_s;
    return wrap(omega / (2.0 * pi * symbol_s), -period / 2.0, period);
}

AngleEstimate esprit_2d(const ComplexMatrix& p, Index n_y, Index n_z) {
    const Index n = n_y * n_z;
    if (p.rows() != n || p.cols() != n)
        throw Error(Errc::shape, fmt::format("angle matrix must be {}x{}, got {}x{}", n, n, p.rows(), p.cols()));
    if (n_y < 2 || n_z < 2)
        throw Error(Errc::degenerate_input, "2D shift invariance needs at least two elements per axis");

    Eigen::JacobiSVD<ComplexMatrix> svd(p, Eigen::ComputeFullU);
    const auto& sigma = svd.singularValues();
    const double total = sigma.squaredNorm();
    if (!(total > 0.0) || !std::isfinite(total))
        throw Error(Errc::degenerate_input, "angle matrix is zero or non-finite");
    const ComplexVector u = svd.matrixU().col(0);

    AngleEstimate est;
    est.rank1_ratio = sigma(0) * sigma(0) / total;
    est.unreliable_subspace = est.rank1_ratio < kRank1Warning;

    // u(z + N_z·y); a shift of one along z multiplies by e^{−jψ}, along y by e^{−jμ}.
    cd num_z{0.0, 0.0};
    double den_z = 0.0;
    cd num_y{0.0, 0.0};
    double den_y = 0.0;
    for (Index y = 0; y < n_y; ++y)
        for (Index z = 0; z < n_z; ++z) {
            const cd here = u(z + n_z * y);
            if (z + 1 < n_z) {
                num_z += std::conj(here) * u(z + 1 + n_z * y);
                den_z += std::norm(here);
            }
            if (y + 1 < n_y) {
                num_y += std::conj(here) * u(z + n_z * (y + 1));
                den_y += std::norm(here);
            }
        }
    if (!(den_z > 0.0) || !(den_y > 0.0))
        throw Error(Errc::degenerate_input, "dominant singular vector has no usable shift pairs");

    est.psi = unwrap_into_prior(-std::arg(num_z / den_z));
    est.mu = unwrap_into_prior(-std::arg(num_y / den_y));

    est.phi = std::acos(std::clamp(est.psi / pi, 0.0, 1.0));
    const double sin_phi = std::sin(est.phi);
    if (sin_phi < kMinSinPhi)
        throw Error(Errc::elevation_unrecoverable,
                    fmt::format("azimuth estimate {:.3g} rad leaves elevation unobservable", est.phi));
    est.theta = std::asin(std::clamp(est.mu / (pi * sin_phi), 0.0, 1.0));
    return est;
}

}  // namespace bdsense
