#include "jumpthermo/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "jumpthermo/common.hpp"

namespace jumpthermo::analytic {

namespace {

using std::complex;

// Cubic satisfied by x = Theta_M - gamma/2 at resonance:
//   x^3 + p x + q(z) = 0,  p = (4 Omega^2 - gamma^2)/4,  q = z gamma Omega^2 / 2.
struct ResonantCubic {
    double p = 0.0;
    double q = 0.0;
};

ResonantCubic cubic_at(double gamma, double rabi, double s) {
    return {0.25 * (4.0 * rabi * rabi - gamma * gamma),
            0.5 * std::exp(-s) * gamma * rabi * rabi};
}

void check_resonance(const model::ModulatedFluorophore& m, const char* who) {
    for (Eigen::Index r = 0; r < m.n_states(); ++r)
        if (std::abs(m.detuning(r)) > 1e-12)
            throw ValidationError(std::string(who) +
                                  ": closed forms require resonance "
                                  "(omega_laser equal to every omega_R)");
}

} // namespace

AveragedParams averaged_parameters(const model::ModulatedFluorophore& m) {
    const Eigen::VectorXd pops =
        model::stationary_populations(model::bath_generator(m.bath));
    AveragedParams avg;
    for (Eigen::Index r = 0; r < m.n_states(); ++r) {
        const auto& lv = m.levels[static_cast<std::size_t>(r)];
        avg.gamma += pops(r) * lv.gamma;
        avg.omega += pops(r) * lv.omega;
        avg.rabi += pops(r) * lv.rabi;
    }
    return avg;
}

double theta_markov(double gamma, double rabi, double s) {
    if (gamma <= 0.0)
        throw ValidationError("theta_markov: gamma must be > 0");
    const double z = std::exp(-s);
    const double a = 54.0 * z * gamma * rabi * rabi;
    const double b = 4.0 * rabi * rabi - gamma * gamma;
    const complex<double> root = std::sqrt(complex<double>(a * a + 27.0 * b * b * b));
    const complex<double> f = std::pow(complex<double>(a) + root, 1.0 / 3.0);
    const complex<double> theta = 0.5 * gamma - f / 6.0 + b / (2.0 * f);
    if (std::abs(theta.imag()) > 1e-9 * std::max(1.0, std::abs(theta.real())))
        throw NumericalError("theta_markov: branch selection left an imaginary "
                             "residue " + std::to_string(theta.imag()));
    return theta.real();
}

MarkovCumulants markov_cumulants(double gamma, double rabi, double s) {
    MarkovCumulants out;
    out.theta = theta_markov(gamma, rabi, s);
    const auto [p, q] = cubic_at(gamma, rabi, s);
    const double x = out.theta - 0.5 * gamma;
    const double denom = 3.0 * x * x + p;
    if (std::abs(denom) < 1e-12 * std::max(1.0, std::abs(p)))
        throw NumericalError("markov_cumulants: derivative is singular "
                             "(double root of the resonant cubic)");
    // q' = -q, q'' = q under s-differentiation
    const double x1 = q / denom;
    const double x2 = -(6.0 * x * x1 * x1 + q) / denom;
    out.mean = x1;
    out.variance = -x2;
    return out;
}

Emission intensity_and_mandel(const model::LevelParams& level,
                              const model::DriveParams& drive) {
    const double g = level.gamma;
    const double o = level.rabi;
    const double d = drive.omega_laser - level.omega;
    const double den = g * g + 2.0 * o * o + 4.0 * d * d;
    Emission e;
    e.intensity = g * o * o / den;
    e.mandel_variance =
        e.intensity * (1.0 - (6.0 * g * g - 8.0 * d * d) * o * o / (den * den));
    if (e.intensity < 0.0 || e.mandel_variance < 0.0)
        throw NumericalError("intensity_and_mandel: negative emission statistics");
    return e;
}

namespace {

// f_{RR'} = int_0^inf [e^{Wu} - P^inf 1^T]_{RR'} du * P^inf_{R'}, by composite
// Simpson refinement up to a horizon set by the slowest bath relaxation rate.
Eigen::MatrixXd f_matrix_quadrature(const Eigen::MatrixXd& w,
                                    const Eigen::VectorXd& pops) {
    const Eigen::Index n = w.rows();
    Eigen::EigenSolver<Eigen::MatrixXd> es(w);
    if (es.info() != Eigen::Success)
        throw NumericalError("variance_s0: bath eigenvalue solve failed");
    double slowest = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double re = es.eigenvalues()(k).real();
        if (re < -1e-14) slowest = std::min(slowest, -re);
    }
    if (!std::isfinite(slowest))
        throw NumericalError("variance_s0: bath generator has no decaying mode");
    const double horizon = 20.0 / slowest;

    const Eigen::MatrixXd proj = pops * Eigen::RowVectorXd::Ones(n);
    auto integrand = [&](double u) -> Eigen::MatrixXd {
        return (w * u).exp() - proj;
    };

    Eigen::MatrixXd prev = Eigen::MatrixXd::Zero(n, n);
    for (int nodes = 64; nodes <= 1 << 16; nodes *= 2) {
        const double h = horizon / nodes;
        Eigen::MatrixXd acc = integrand(0.0) + integrand(horizon);
        for (int k = 1; k < nodes; ++k)
            acc += (k % 2 == 1 ? 4.0 : 2.0) * integrand(k * h);
        acc *= h / 3.0;
        if (nodes > 64 &&
            (acc - prev).norm() <= 1e-10 * std::max(1.0, acc.norm())) {
            Eigen::MatrixXd f = acc;
            for (Eigen::Index c = 0; c < n; ++c) f.col(c) *= pops(c);
            return f;
        }
        prev = acc;
    }
    throw NumericalError(
        "variance_s0: bath correlation quadrature did not converge; "
        "suggested horizon was " + std::to_string(horizon));
}

} // namespace

double variance_s0(const model::ModulatedFluorophore& m) {
    const Eigen::Index n = m.n_states();
    const Eigen::VectorXd pops =
        model::stationary_populations(model::bath_generator(m.bath));

    std::vector<Emission> em(static_cast<std::size_t>(n));
    double diag = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        em[static_cast<std::size_t>(r)] =
            intensity_and_mandel(m.levels[static_cast<std::size_t>(r)], m.drive);
        diag += pops(r) * em[static_cast<std::size_t>(r)].mandel_variance;
    }
    if (n == 1) return diag;

    double cross = 0.0;
    if (n == 2) {
        const double phi_tot = m.bath.rates(0, 1) + m.bath.rates(1, 0);
        const double di = em[0].intensity - em[1].intensity;
        cross = 2.0 * pops(0) * pops(1) * di * di / phi_tot;
    } else {
        const Eigen::MatrixXd f =
            f_matrix_quadrature(model::bath_generator(m.bath).w, pops);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c)
                cross += 2.0 * em[static_cast<std::size_t>(r)].intensity *
                         em[static_cast<std::size_t>(c)].intensity * f(r, c);
    }
    const double total = diag + cross;
    if (total < 0.0)
        throw NumericalError("variance_s0: negative variance " +
                             std::to_string(total));
    return total;
}

SlowModApprox slow_mod_params(const model::ModulatedFluorophore& m) {
    if (m.n_states() != 2)
        throw ValidationError("slow_mod_params: requires a two-state bath");
    const Emission e0 = intensity_and_mandel(m.levels[0], m.drive);
    const Emission e1 = intensity_and_mandel(m.levels[1], m.drive);
    if (e0.intensity == e1.intensity)
        throw ValidationError("slow_mod_params: degenerate phases (I_A == I_B)");

    // phase A is the higher-intensity state
    const int a = e0.intensity > e1.intensity ? 0 : 1;
    const int b = 1 - a;
    const double phi_ab = m.bath.rates(a, b); // rate B -> A
    const double phi_ba = m.bath.rates(b, a); // rate A -> B
    if (phi_ab <= 0.0 || phi_ba <= 0.0)
        throw ValidationError("slow_mod_params: both hopping rates must be > 0");

    SlowModApprox sm;
    sm.label_a = a;
    sm.label_b = b;
    sm.phi_tot = phi_ab + phi_ba;
    sm.eps0 = 0.5 * std::log(phi_ba / phi_ab);
    const double di = (a == 0 ? e0.intensity - e1.intensity
                              : e1.intensity - e0.intensity);
    sm.d_eps = di / sm.phi_tot;
    sm.s_p = -sm.eps0 / sm.d_eps;
    // default alpha: phi~ grows by phi_tot at |s - s_p| = 10 sigma_p
    const double sigma_p = 2.0 * sm.phi_tot / di;
    sm.alpha = m.alpha ? *m.alpha : sm.phi_tot / (100.0 * sigma_p * sigma_p);
    sm.gamma_a = m.levels[static_cast<std::size_t>(a)].gamma;
    sm.rabi_a = m.levels[static_cast<std::size_t>(a)].rabi;
    sm.gamma_b = m.levels[static_cast<std::size_t>(b)].gamma;
    sm.rabi_b = m.levels[static_cast<std::size_t>(b)].rabi;
    return sm;
}

std::pair<double, double> slow_cumulants(const model::ModulatedFluorophore& m,
                                         double s) {
    check_resonance(m, "slow_cumulants");
    const SlowModApprox sm = slow_mod_params(m);
    const double phi = sm.phi_tilde(s);
    if (phi <= 0.0)
        throw NumericalError("slow_cumulants: phi~(s) is not positive at s = " +
                             std::to_string(s));
    const MarkovCumulants ca = sm.phase_a(s);
    const MarkovCumulants cb = sm.phase_b(s);
    const double pa = sm.pop_a(s);
    const double pb = 1.0 - pa;
    const double mean = pa * ca.mean + pb * cb.mean;
    const double dm = ca.mean - cb.mean;
    const double variance =
        pa * ca.variance + pb * cb.variance + 2.0 * pa * pb * dm * dm / phi;
    return {mean, variance};
}

PeakScaling peak_scaling(const model::ModulatedFluorophore& m) {
    if (m.n_states() != 2)
        throw ValidationError("peak_scaling: requires a two-state bath");
    const Emission e0 = intensity_and_mandel(m.levels[0], m.drive);
    const Emission e1 = intensity_and_mandel(m.levels[1], m.drive);
    const double phi_tot = m.bath.rates(0, 1) + m.bath.rates(1, 0);

    PeakScaling ps;
    ps.height = 0.5 * (e0.mandel_variance + e1.mandel_variance);
    ps.mean_at_peak = 0.5 * (e0.intensity + e1.intensity);
    const double di = std::abs(e0.intensity - e1.intensity);
    if (di == 0.0) {
        ps.degenerate = true;
        ps.width = std::numeric_limits<double>::infinity();
        ps.s_p = 0.0;
        return ps;
    }
    ps.height += di * di / (2.0 * phi_tot);
    ps.width = 2.0 * phi_tot / di;
    ps.s_p = slow_mod_params(m).s_p;
    return ps;
}

double DoubleGaussian::density(double n) const {
    const double two_pi = 2.0 * std::numbers::pi;
    const double da = n - mean_a;
    const double db = n - mean_b;
    return weight_a / std::sqrt(two_pi * var_a) * std::exp(-da * da / (2.0 * var_a)) +
           weight_b / std::sqrt(two_pi * var_b) * std::exp(-db * db / (2.0 * var_b));
}

DoubleGaussian double_gaussian(const model::ModulatedFluorophore& m, double s) {
    check_resonance(m, "double_gaussian");
    const SlowModApprox sm = slow_mod_params(m);
    const double phi = sm.phi_tilde(s);
    if (phi <= 0.0)
        throw NumericalError("double_gaussian: phi~(s) is not positive at s = " +
                             std::to_string(s));
    const MarkovCumulants ca = sm.phase_a(s);
    const MarkovCumulants cb = sm.phase_b(s);

    DoubleGaussian dg;
    dg.upsilon = 0.5 * phi;
    dg.weight_a = sm.pop_a(s);
    dg.weight_b = 1.0 - dg.weight_a;
    dg.mean_a = ca.mean;
    dg.mean_b = cb.mean;
    dg.var_a = ca.variance * dg.upsilon;
    dg.var_b = cb.variance * dg.upsilon;
    if (dg.var_a <= 0.0 || dg.var_b <= 0.0)
        throw NumericalError("double_gaussian: component variance is not positive");
    return dg;
}

GaussianMoments double_gaussian_moments(const DoubleGaussian& dg) {
    const double sd = std::sqrt(std::max(dg.var_a, dg.var_b));
    const double lo = std::min(dg.mean_a, dg.mean_b) - 12.0 * sd;
    const double hi = std::max(dg.mean_a, dg.mean_b) + 12.0 * sd;

    auto simpson = [&](int nodes, double& norm, double& mean, double& second) {
        const double h = (hi - lo) / nodes;
        norm = dg.density(lo) + dg.density(hi);
        mean = lo * dg.density(lo) + hi * dg.density(hi);
        second = lo * lo * dg.density(lo) + hi * hi * dg.density(hi);
        for (int k = 1; k < nodes; ++k) {
            const double x = lo + k * h;
            const double wgt = (k % 2 == 1 ? 4.0 : 2.0);
            const double d = dg.density(x);
            norm += wgt * d;
            mean += wgt * x * d;
            second += wgt * x * x * d;
        }
        norm *= h / 3.0;
        mean *= h / 3.0;
        second *= h / 3.0;
    };

    double n0, m0, s0, n1, m1, s1;
    simpson(4096, n0, m0, s0);
    simpson(8192, n1, m1, s1);
    if (std::abs(n1 - n0) > 1e-9 || std::abs(m1 - m0) > 1e-9 * std::max(1.0, std::abs(m1)))
        throw NumericalError("double_gaussian_moments: quadrature did not converge");

    GaussianMoments out;
    out.norm = n1;
    out.mean = m1 / n1;
    out.variance = (s1 / n1 - out.mean * out.mean) / dg.upsilon;
    return out;
}

// ---------------------------------------------------------------------------
// Legendre–Fenchel transform
// ---------------------------------------------------------------------------

namespace {

// Natural cubic spline through (x_i, y_i), ascending x.
class CubicSpline {
public:
    CubicSpline(std::span<const double> x, std::span<const double> y)
        : x_(x.begin(), x.end()), y_(y.begin(), y.end()) {
        const std::size_t n = x_.size();
        m_.assign(n, 0.0);
        if (n < 3) return;
        std::vector<double> diag(n, 2.0), rhs(n, 0.0), sub(n, 0.0), sup(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hl = x_[i] - x_[i - 1];
            const double hr = x_[i + 1] - x_[i];
            sub[i] = hl / (hl + hr);
            sup[i] = hr / (hl + hr);
            rhs[i] = 6.0 / (hl + hr) *
                     ((y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl);
        }
        // Thomas solve with natural end conditions m_0 = m_{n-1} = 0.
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = (rhs[i] - sup[i] * m_[i + 1]) / diag[i];
            if (i == 1) break;
        }
    }

    double operator()(double x) const {
        const std::size_t n = x_.size();
        std::size_t i = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
        i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h;
        const double b = (x - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

private:
    std::vector<double> x_, y_, m_;
};

// Golden-section maximization of f on [a, b].
template <class F>
std::pair<double, double> golden_max(F&& f, double a, double b) {
    constexpr double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    const double xm = 0.5 * (a + b);
    return {xm, f(xm)};
}

} // namespace

std::vector<RatePoint> rate_function(std::span<const double> s_samples,
                                     std::span<const double> theta_samples,
                                     std::span<const double> n_grid) {
    if (s_samples.size() != theta_samples.size() || s_samples.size() < 3)
        throw ValidationError("rate_function: need >= 3 matched (s, Theta) samples");
    for (std::size_t i = 1; i < s_samples.size(); ++i)
        if (!(s_samples[i] > s_samples[i - 1]))
            throw ValidationError("rate_function: s samples must be strictly increasing");

    const CubicSpline spline(s_samples, theta_samples);
    std::vector<RatePoint> out;
    out.reserve(n_grid.size());
    for (double n : n_grid) {
        RatePoint pt;
        pt.n = n;
        std::size_t best = 0;
        double best_val = theta_samples[0] - s_samples[0] * n;
        for (std::size_t i = 1; i < s_samples.size(); ++i) {
            const double v = theta_samples[i] - s_samples[i] * n;
            if (v > best_val) { best_val = v; best = i; }
        }
        if (best == 0 || best + 1 == s_samples.size()) {
            pt.boundary = true;
            pt.s_star = s_samples[best];
            pt.phi = best_val;
        } else {
            auto objective = [&](double s) { return spline(s) - s * n; };
            auto [sm, fm] =
                golden_max(objective, s_samples[best - 1], s_samples[best + 1]);
            pt.s_star = sm;
            pt.phi = fm;
        }
        out.push_back(pt);
    }
    return out;
}

} // namespace jumpthermo::analytic
