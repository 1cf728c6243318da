// counting.hpp — Finite-time layer: generating-operator integration, the
// n-resolved probability hierarchy, and the s-ensemble with its grand
// thermodynamic relation.

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "jumpthermo/model.hpp"
#include "jumpthermo/ode.hpp"

namespace jumpthermo::counting {

// One auxiliary 2x2 block per bath state.
using BlockState = std::vector<Eigen::Matrix2cd>;

// Initial condition of the generating-operator evolution. Long-time
// quantities are insensitive to it; finite-time curves are not, so both
// choices are exposed.
enum class InitialCondition {
    Stationary, // blocks of the s = 0 stationary state (default)
    Ground,     // system ground state weighted by the bath populations
};

struct GeneratingResult {
    double log_z = 0.0;
    double z = 0.0;
};

// Finite-time counting probabilities P_0..P_{n_max} with explicit truncation
// bookkeeping: tail_mass = 1 - sum_n P_n >= 0 is exact for the truncated
// hierarchy (trace lost through the top block).
struct CountingDistribution {
    double t = 0.0;
    std::vector<double> probs;
    double tail_mass = 0.0;
};

// s-ensemble at fixed time: reweighted probabilities and the thermodynamic
// functions of the grand relation Theta_t = <<E>>_t - S_t + s <<N>>_t.
struct SEnsembleStats {
    double s = 0.0;
    double z = 0.0;     // Z_t(s); may overflow to inf for very negative s
    double log_z = 0.0;
    std::vector<double> q;
    double entropy = 0.0;
    double internal_energy = 0.0;
    double particle_number = 0.0;
    double grand_potential = 0.0;
    double residual = 0.0; // |Theta_t - (<<E>>_t - S_t + s <<N>>_t)|
};

// Blocks of the s = 0 stationary state, sum of traces = 1.
BlockState stationary_blocks(const model::ModulatedFluorophore& m);

// Initial blocks for the requested condition.
BlockState initial_blocks(const model::ModulatedFluorophore& m, InitialCondition init);

// Z_t(s) = sum_R Tr[G_R(t,s)] from adaptive integration of the tilted
// evolution, with running renormalization so the result stays accurate in
// relative terms over exponentially decaying (or growing) trajectories.
GeneratingResult integrate_generating(const model::ModulatedFluorophore& m,
                                      double s, double t,
                                      InitialCondition init = InitialCondition::Stationary,
                                      ode::Tolerances tol = {});

// Evolve the n-resolved hierarchy to time t, growing n_max until the
// truncated tail is below tail_tol (tail_tol in (0, 1e-3]).
CountingDistribution integrate_hierarchy(const model::ModulatedFluorophore& m,
                                         double t, double tail_tol,
                                         InitialCondition init = InitialCondition::Stationary,
                                         ode::Tolerances tol = {});

// Build the s-ensemble from a computed distribution. The grand relation is an
// algebraic identity for the q_n and is evaluated, not assumed.
SEnsembleStats s_ensemble(const CountingDistribution& dist, double s);

// Direct integration of the s = 0 master equation, reporting the blocks at
// the requested (ascending) times. Used as the unravelling oracle.
std::vector<BlockState> integrate_master(const model::ModulatedFluorophore& m,
                                         const BlockState& init,
                                         const std::vector<double>& times,
                                         ode::Tolerances tol = {});

} // namespace jumpthermo::counting
