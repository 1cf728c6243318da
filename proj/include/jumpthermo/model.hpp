// model.hpp — Physical model of the modulated fluorophore: per-bath-state
// two-level parameters, the laser drive, and the classical bath process.
//
// Conventions (fixed project-wide):
//   * hbar = 1; every rate and frequency is a dimensionless multiple of the
//     reference Rabi frequency, times are in its inverse.
//   * Two-level basis order (|+>, |->); sigma = |-><+| lowers.
//   * rates(R, R') = phi_{RR'} is the hopping rate of R' -> R transitions;
//     the diagonal is ignored.

#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "jumpthermo/common.hpp"

namespace jumpthermo::model {

// Two-level parameters attached to one bath state: natural decay gamma,
// transition frequency omega (bare + bath shift), effective Rabi frequency.
struct LevelParams {
    double gamma = 0.0;
    double omega = 0.0;
    double rabi = 0.0;
};

struct DriveParams {
    double omega_laser = 0.0;
};

// Classical bath: n_states macrostates hopping with rates phi_{RR'}.
struct BathProcess {
    Eigen::Index n_states = 0;
    Eigen::MatrixXd rates; // rates(R, R') = phi_{RR'}, diagonal ignored
};

// Generator of the bath rate equation: W_{RR'} = phi_{RR'} off the diagonal,
// W_{RR} = -sum_{R' != R} phi_{R'R}; columns sum to zero.
struct BathGenerator {
    Eigen::MatrixXd w;
};

struct ModulatedFluorophore {
    std::vector<LevelParams> levels; // one per bath state
    DriveParams drive;
    BathProcess bath;
    std::optional<double> alpha;     // slow-modulation fit parameter (optional)

    Eigen::Index n_states() const { return bath.n_states; }

    // Laser detuning from the level-R transition: delta_R = omega_L - omega_R.
    double detuning(Eigen::Index r) const {
        return drive.omega_laser - levels[static_cast<std::size_t>(r)].omega;
    }
};

// Parsed configuration record (see the JSON schema in config.hpp). Level
// frequencies are given as shifts from a zero reference, so omega_R equals
// the configured shift and only detuning enters the dynamics.
struct ModelConfig {
    Eigen::Index n_states = 0;
    std::vector<LevelParams> levels; // omega holds the configured omega_shift
    double omega_laser = 0.0;
    std::optional<Eigen::MatrixXd> rates; // may be absent when n_states == 1
    std::optional<double> alpha;
};

// ------------------------------ two-level algebra ---------------------------

inline Eigen::Matrix2cd lowering_op() {
    Eigen::Matrix2cd s = Eigen::Matrix2cd::Zero();
    s(1, 0) = 1.0; // |-><+|
    return s;
}

inline Eigen::Matrix2cd raising_op() { return lowering_op().adjoint(); }

// sigma^dag sigma = |+><+|
inline Eigen::Matrix2cd excited_projector() {
    Eigen::Matrix2cd n = Eigen::Matrix2cd::Zero();
    n(0, 0) = 1.0;
    return n;
}

// ------------------------------- operations ---------------------------------

// Validate a parsed configuration and assemble the model. Throws
// ValidationError naming the offending field.
ModulatedFluorophore build_model(const ModelConfig& config);

// Bath generator in column form; columns sum to zero by construction.
BathGenerator bath_generator(const BathProcess& bath);

// Stationary populations P^inf: W P = 0, entries >= 0, sum 1. Throws when the
// zero mode is not unique (disconnected bath).
Eigen::VectorXd stationary_populations(const BathGenerator& gen);

// Rotating-frame Hamiltonian at the laser frequency:
//   H_R = -(delta_R/2) sigma_z + (Omega_R/2)(sigma^+ + sigma^-),
// with delta_R = omega_L - omega_R. Time independent and Hermitian.
Eigen::Matrix2cd rotating_frame_hamiltonian(const LevelParams& level,
                                            const DriveParams& drive);

} // namespace jumpthermo::model
