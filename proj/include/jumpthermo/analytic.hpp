// analytic.hpp — Closed-form and semi-analytic layer: the resonant Markovian
// grand potential, fast-limit parameter averaging, per-state intensity and
// variance, the slow-modulation stochastic approximation with its transition
// scaling laws, the double-Gaussian fluctuation model, and the
// Legendre–Fenchel rate function.

#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "jumpthermo/model.hpp"

namespace jumpthermo::analytic {

// Bath-averaged parameters (fast-modulation limit).
struct AveragedParams {
    double gamma = 0.0;
    double omega = 0.0;
    double rabi = 0.0;
};

// Per-state emission statistics of the underlying Markovian two-level system.
struct Emission {
    double intensity = 0.0;       // I_R
    double mandel_variance = 0.0; // second cumulant per unit time at s = 0
};

// Grand potential of the resonant Markovian system together with its first
// two analytic s-derivatives.
struct MarkovCumulants {
    double theta = 0.0;
    double mean = 0.0;     // dTheta/ds
    double variance = 0.0; // -d2Theta/ds2
};

// Parameters of the slow-modulation s-extension for a two-state bath.
// Phases are relabeled internally so phase A has the higher intensity;
// label_a/label_b give the model indices after relabeling.
struct SlowModApprox {
    double eps0 = 0.0;    // (1/2) log(phi_BA / phi_AB)
    double d_eps = 0.0;   // (I_A - I_B) / (phi_AB + phi_BA)
    double s_p = 0.0;     // -eps0 / d_eps, location of the variance peak
    double alpha = 0.0;   // curvature of the generalized rate phi~(s)
    double phi_tot = 0.0; // phi_AB + phi_BA
    int label_a = 0;
    int label_b = 1;
    double gamma_a = 0.0, rabi_a = 0.0;
    double gamma_b = 0.0, rabi_b = 0.0;

    // phi~(s) = alpha s (s - 2 s_p) + phi_tot
    double phi_tilde(double s) const { return alpha * s * (s - 2.0 * s_p) + phi_tot; }

    // tanh-form phase populations, P~_A + P~_B = 1
    double pop_a(double s) const { return 0.5 * (1.0 - std::tanh(eps0 + s * d_eps)); }
    double pop_b(double s) const { return 1.0 - pop_a(s); }

    // per-phase grand potentials Theta_A, Theta_B with their cumulants
    MarkovCumulants phase_a(double s) const;
    MarkovCumulants phase_b(double s) const;
};

// Peak scaling of the variance near the crossing (two-state bath).
struct PeakScaling {
    double s_p = 0.0;
    double height = 0.0;
    double width = 0.0;        // sigma_p = 2 phi_tot / |I_A - I_B|
    double mean_at_peak = 0.0; // (I_A + I_B)/2
    bool degenerate = false;   // I_A == I_B: width diverges
};

// Two-Gaussian fluctuation model of P(N) at fixed s: weights, component
// means/variances, and the size parameter Upsilon(s) = phi~(s)/2.
struct DoubleGaussian {
    double weight_a = 0.0, weight_b = 0.0;
    double mean_a = 0.0, mean_b = 0.0;
    double var_a = 0.0, var_b = 0.0; // component variances, already x Upsilon(s)
    double upsilon = 0.0;

    double density(double n) const;
};

// Legendre–Fenchel transform sample: phi(N) = max_s [Theta(s) - s N].
struct RatePoint {
    double n = 0.0;
    double phi = 0.0;
    double s_star = 0.0;
    bool boundary = false; // maximizer hit the sampled grid boundary
};

// Averages gamma, omega, rabi over the stationary bath populations.
AveragedParams averaged_parameters(const model::ModulatedFluorophore& m);

// Resonant Markovian grand potential
//   Theta_M(s) = gamma/2 - f(s)/6 + (4 Omega^2 - gamma^2) / (2 f(s)),
//   f(s) = (54 z gamma Omega^2 + sqrt((54 z gamma Omega^2)^2
//          + 27 (4 Omega^2 - gamma^2)^3))^(1/3),  z = e^{-s},
// evaluated with principal complex branches; the real part is returned after
// checking the imaginary residue.
double theta_markov(double gamma, double rabi, double s);

// Theta_M and its first two s-derivatives, obtained by implicit
// differentiation of the defining cubic (exact up to roundoff).
MarkovCumulants markov_cumulants(double gamma, double rabi, double s);

// I_R and the per-state Mandel variance for arbitrary detuning.
Emission intensity_and_mandel(const model::LevelParams& level,
                              const model::DriveParams& drive);

// Second cumulant of the counting process at s = 0 in the slow-modulation
// stochastic approximation. Two-state baths use the closed form; larger baths
// integrate the bath autocorrelation by adaptive quadrature over matrix
// exponentials of the generator.
double variance_s0(const model::ModulatedFluorophore& m);

SlowModApprox slow_mod_params(const model::ModulatedFluorophore& m);

// (mean, variance) of the s-extended stochastic approximation.
std::pair<double, double> slow_cumulants(const model::ModulatedFluorophore& m,
                                         double s);

PeakScaling peak_scaling(const model::ModulatedFluorophore& m);

DoubleGaussian double_gaussian(const model::ModulatedFluorophore& m, double s);

// Numerical moments of the double-Gaussian density by adaptive quadrature:
// returns (normalization, mean, variance/Upsilon).
struct GaussianMoments {
    double norm = 0.0;
    double mean = 0.0;
    double variance = 0.0; // already divided by Upsilon(s)
};
GaussianMoments double_gaussian_moments(const DoubleGaussian& dg);

// Rate function on n_grid from a sampled Theta curve (ascending s). The
// discrete maximizer is refined by golden-section search on a cubic-spline
// interpolant; boundary maximizers are flagged.
std::vector<RatePoint> rate_function(std::span<const double> s_samples,
                                     std::span<const double> theta_samples,
                                     std::span<const double> n_grid);

inline MarkovCumulants SlowModApprox::phase_a(double s) const {
    return markov_cumulants(gamma_a, rabi_a, s);
}
inline MarkovCumulants SlowModApprox::phase_b(double s) const {
    return markov_cumulants(gamma_b, rabi_b, s);
}

} // namespace jumpthermo::analytic
