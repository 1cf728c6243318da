// liouville.hpp — The s-tilted generator on the stacked auxiliary matrices,
// its leading spectral data, and the grand potential Theta(s) with counting
// cumulants and s-ensemble bath populations.
//
// Vectorization is column-stacking: a 2x2 block X maps to
// (X00, X10, X01, X11), and block R occupies rows [4R, 4R+4) of the stacked
// vector. The tilted generator acts per block as
//   -i[H_R, .] + gamma_R(-1/2 {n, .} + e^{-s} sigma . sigma^dag)
// plus the classical bath coupling between blocks.

#pragma once

#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "jumpthermo/model.hpp"

namespace jumpthermo::liouville {

inline constexpr Eigen::Index kDefaultMaxDim = 400;
inline constexpr double kDefaultStep = 1e-4; // cumulant differentiation step

// Tilt-independent split of the generator: matrix(s) = no_jump + e^{-s} * jump.
struct TiltedParts {
    Eigen::Index dim = 0;
    Eigen::MatrixXcd no_jump; // unitary + anticommutator + bath coupling
    Eigen::MatrixXcd jump;    // sum_R gamma_R (sigma . sigma^dag) on block R

    Eigen::MatrixXcd at(double s) const {
        return no_jump + std::exp(-s) * jump;
    }
};

struct TiltedGenerator {
    double s = 0.0;
    Eigen::Index dim = 0;
    Eigen::MatrixXcd matrix;
};

// Leading eigenvalue with matched right/left eigenvectors. Right blocks g_R
// are normalized so sum_R Tr[g_R] = 1; the left vector so <l|g> = 1.
struct SpectralData {
    std::complex<double> lambda_max;
    Eigen::VectorXcd right;
    Eigen::VectorXcd left;
    double gap = 0.0;               // Re-part distance to the subleading eigenvalue
    bool degenerate_warning = false; // gap < 1e-8 x spectral radius

    Eigen::Matrix2cd right_block(Eigen::Index r) const { return unstack(right, r); }
    Eigen::Matrix2cd left_block(Eigen::Index r) const { return unstack(left, r); }

    static Eigen::Matrix2cd unstack(const Eigen::VectorXcd& v, Eigen::Index r) {
        Eigen::Matrix2cd m;
        m << v(4 * r + 0), v(4 * r + 2),
             v(4 * r + 1), v(4 * r + 3);
        return m;
    }
};

// One point of the thermodynamic sweep.
struct ThermoPoint {
    double s = 0.0;
    double theta = 0.0;    // grand potential
    double mean = 0.0;     // <<N>> = dTheta/ds
    double variance = 0.0; // <<dN^2>> = -d2Theta/ds2
    Eigen::VectorXd pops;  // s-ensemble bath populations
};

struct SweepError {
    double s = 0.0;
    std::string message;
};

struct SweepOutcome {
    std::vector<ThermoPoint> points;
    std::vector<SweepError> errors;
};

TiltedParts build_tilted_parts(const model::ModulatedFluorophore& m);
TiltedGenerator build_tilted_generator(const model::ModulatedFluorophore& m, double s);

SpectralData leading_eigen(const TiltedGenerator& gen,
                           Eigen::Index max_dim = kDefaultMaxDim);

// Theta(s) = -(leading eigenvalue); real by construction, checked.
double theta(const model::ModulatedFluorophore& m, double s);

// Independent oracle: largest real root of det(A - u*1) = 0 for the real
// Bloch-coordinate representation of the generator, located by sign-change
// bracketing with no eigenvalue solver. Restricted to n_states <= 2.
double theta_poly(const model::ModulatedFluorophore& m, double s);

// (mean, variance). The mean is the exact eigenvalue derivative through the
// left/right leading pair; the variance differentiates the mean with 5-point
// central stencils plus one Richardson refinement at step h.
std::pair<double, double> cumulants(const model::ModulatedFluorophore& m, double s,
                                    double h = kDefaultStep);

// s-ensemble bath populations P~_R(s) = Tr[l_R g_R] / sum_R' Tr[l_R' g_R'].
Eigen::VectorXd s_populations(const model::ModulatedFluorophore& m, double s);

// Evaluate one ThermoPoint per grid value; per-point failures are collected
// and the sweep continues. Points are independent tasks.
SweepOutcome sweep(const model::ModulatedFluorophore& m,
                   const std::vector<double>& s_grid, unsigned threads = 1,
                   double h = kDefaultStep);

} // namespace jumpthermo::liouville
