// trajectory.hpp — Quantum-jump Monte Carlo unravelling of the coupled
// system-bath master equation, the doubly stochastic slow-limit sampler, and
// empirical estimators of the partition function and cumulants.
//
// Each trajectory evolves a pair (pure system state psi, bath label R):
// deterministic drift under the non-Hermitian generator H_R - (i/2) gamma_R n,
// photon jumps at rate gamma_R |<sigma psi>|^2, classical bath hops at rates
// phi_{R'R}. Trajectory k draws from the counter-based substream
// (master_seed, k), so results are bit-identical for any thread count.

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "jumpthermo/model.hpp"
#include "jumpthermo/ode.hpp"

namespace jumpthermo::trajectory {

enum class EventKind { Emission, BathJump };

struct TrajectoryEvent {
    double t = 0.0;
    EventKind kind = EventKind::Emission;
    int from = -1; // bath jumps only
    int to = -1;
};

struct TrajectoryRecord {
    std::uint64_t seed = 0; // substream index within the run
    std::vector<TrajectoryEvent> events;
    double t_final = 0.0;
    std::uint64_t n_emissions = 0;
    std::vector<double> bath_occupation; // total sojourn time per state
};

struct EnsembleStats {
    std::int64_t n_traj = 0;
    double t = 0.0;
    double mean_rate = 0.0;   // mean of n(t)/t
    double var_rate = 0.0;    // (1/t) x sample variance of n(t)
    double stderr_mean = 0.0;
    double stderr_var = 0.0;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> empirical_p; // (n, count)
};

// Ensemble mean of |psi><psi| x indicator(R) at one checkpoint time, with
// per-coordinate standard errors in the (x1, Re c, Im c, x4) parametrization.
struct CheckpointAverage {
    double t = 0.0;
    std::vector<Eigen::Matrix2cd> mean_blocks;
    std::vector<Eigen::Array4d> stderr_coords;
};

struct SimOptions {
    ode::Tolerances tol{};
    bool cold_start = false;  // start from the ground state instead of rho_ss
    unsigned threads = 1;     // 0 = hardware concurrency
    std::vector<double> checkpoints; // strictly inside (0, t_max]
    bool keep_records = false;
};

struct SimResult {
    EnsembleStats stats;
    std::vector<std::uint64_t> counts; // per-trajectory n(t_max)
    std::vector<TrajectoryRecord> records; // populated when keep_records
    std::vector<CheckpointAverage> checkpoints;
    std::uint64_t renormalizations = 0; // norm-underflow recoveries (diagnostic)
};

struct PartitionEstimate {
    double z = 0.0;
    double z_stderr = 0.0; // jackknife
    double log_z = 0.0;
};

// Full unravelling of the coupled evolution.
SimResult simulate_ensemble(const model::ModulatedFluorophore& m,
                            std::int64_t n_traj, double t_max,
                            std::uint64_t master_seed, SimOptions opts = {});

// Slow-limit sampler: the bath label follows its own continuous-time Markov
// chain and each sojourn runs an independent single-state quantum-jump
// simulation with that state's parameters.
SimResult doubly_stochastic_sample(const model::ModulatedFluorophore& m,
                                   std::int64_t n_traj, double t_max,
                                   std::uint64_t master_seed, SimOptions opts = {});

// Z_t(s) = <<exp(-s n)>> over per-trajectory counts at a common time.
PartitionEstimate empirical_partition(std::span<const std::uint64_t> counts, double s);
PartitionEstimate empirical_partition(std::span<const TrajectoryRecord> records,
                                      double s, double t);

// Line-delimited JSON dump, one record per line:
//   {"seed": k, "events": [{"t": .., "kind": "emission"} |
//    {"t": .., "kind": "bath_jump", "from": R, "to": R'}], "n": count}
// Field order is stable; records are written in seed order.
void dump_records(std::span<const TrajectoryRecord> records, const std::string& path);

} // namespace jumpthermo::trajectory
