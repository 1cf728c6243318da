#include "jumpthermo/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "jumpthermo/common.hpp"
#include "jumpthermo/counting.hpp"
#include "jumpthermo/rng.hpp"

namespace jumpthermo::trajectory {

namespace {

using Eigen::Matrix2cd;
using Eigen::Vector2cd;

constexpr double kBisectTol = 1e-10; // jump-time bisection tolerance

struct LevelCache {
    Matrix2cd drift;          // -i H - (gamma/2) |+><+|
    double gamma = 0.0;
    double phi_out = 0.0;     // total escape rate out of this bath state
    std::vector<double> hop;  // hop[R'] = phi_{R'R}
    // two-outcome sampler for the initial pure state
    Vector2cd eig0, eig1;
    double p0 = 1.0;
};

void set_state_sampler(LevelCache& lc, const Matrix2cd& density) {
    Matrix2cd rho = 0.5 * (density + density.adjoint());
    const double tr = rho.trace().real();
    if (tr <= 1e-14) { // unreachable state: draw the ground state
        lc.p0 = 1.0;
        lc.eig0 = Vector2cd(0.0, 1.0);
        lc.eig1 = Vector2cd(0.0, 1.0);
        return;
    }
    rho /= tr;
    Eigen::SelfAdjointEigenSolver<Matrix2cd> es(rho);
    const double p1 = std::clamp(es.eigenvalues()(1), 0.0, 1.0);
    lc.p0 = std::clamp(1.0 - p1, 0.0, 1.0);
    lc.eig0 = es.eigenvectors().col(0);
    lc.eig1 = es.eigenvectors().col(1);
}

LevelCache make_level_cache(const model::ModulatedFluorophore& m, Eigen::Index r) {
    LevelCache lc;
    const auto& level = m.levels[static_cast<std::size_t>(r)];
    const Matrix2cd h = model::rotating_frame_hamiltonian(level, m.drive);
    lc.drift = std::complex<double>(0.0, -1.0) * h;
    lc.drift(0, 0) -= 0.5 * level.gamma;
    lc.gamma = level.gamma;
    lc.hop.assign(static_cast<std::size_t>(m.n_states()), 0.0);
    for (Eigen::Index rp = 0; rp < m.n_states(); ++rp) {
        if (rp == r) continue;
        lc.hop[static_cast<std::size_t>(rp)] = m.bath.rates(rp, r);
        lc.phi_out += m.bath.rates(rp, r);
    }
    return lc;
}

Vector2cd draw_state(const LevelCache& lc, rng::Stream& stream) {
    return stream.uniform() < lc.p0 ? lc.eig0 : lc.eig1;
}

// Per-trajectory payload, reduced in trajectory order after the parallel run.
struct TrajOutput {
    std::uint64_t n = 0;
    std::vector<double> occupation;
    std::vector<double> cp_coords; // n_checkpoints x n_states x 4, row-major
    std::uint64_t renorms = 0;
    std::vector<TrajectoryEvent> events;
};

struct CheckpointCursor {
    const std::vector<double>* times = nullptr;
    std::size_t next = 0;
    Eigen::Index n_states = 0;
    std::vector<double>* coords = nullptr;
};

template <class StepperT>
void record_checkpoints(CheckpointCursor& cp, StepperT& stepper, double t_lo,
                        double t_hi, Eigen::Index r) {
    if (!cp.times) return;
    while (cp.next < cp.times->size() && (*cp.times)[cp.next] <= t_hi) {
        const double c = (*cp.times)[cp.next];
        if (c <= t_lo) { ++cp.next; continue; }
        Vector2cd psi;
        stepper.interpolate(c, psi);
        const double nrm2 = psi.squaredNorm();
        const std::size_t base =
            (cp.next * static_cast<std::size_t>(cp.n_states) +
             static_cast<std::size_t>(r)) * 4;
        (*cp.coords)[base + 0] += std::norm(psi(0)) / nrm2;
        const std::complex<double> coh = psi(0) * std::conj(psi(1)) / nrm2;
        (*cp.coords)[base + 1] += coh.real();
        (*cp.coords)[base + 2] += coh.imag();
        (*cp.coords)[base + 3] += std::norm(psi(1)) / nrm2;
        ++cp.next;
    }
}

// Evolve one no-jump segment from (t_start, psi in stepper) until the survival
// S(t) = |psi|^2 e^{-phi_out (t - t_start)} crosses the target, or t_limit.
// Returns true when a jump fired; t_stop receives the stop time.
template <class StepperT>
bool evolve_segment(StepperT& stepper, const LevelCache& lc, double t_start,
                    double log_u, double t_limit, Eigen::Index r,
                    CheckpointCursor& cp, std::uint64_t& renorms,
                    double& t_stop) {
    for (;;) {
        const double t_prev = stepper.time();
        const double t_new = stepper.step(t_limit);
        double nrm2 = stepper.state().squaredNorm();
        if (nrm2 < 1e-300) {
            // should not occur: the norm is bounded below by the survival
            // target; recover and count it
            ++renorms;
            Vector2cd rescued = stepper.state() / std::sqrt(nrm2);
            stepper.reset_state(t_new, rescued);
            nrm2 = 1.0;
        }
        const double g_new =
            std::log(nrm2) - lc.phi_out * (t_new - t_start) - log_u;
        if (g_new <= 0.0) {
            double lo = t_prev, hi = t_new;
            Vector2cd mid;
            while (hi - lo > kBisectTol) {
                const double t_mid = 0.5 * (lo + hi);
                stepper.interpolate(t_mid, mid);
                const double g = std::log(mid.squaredNorm()) -
                                 lc.phi_out * (t_mid - t_start) - log_u;
                (g > 0.0 ? lo : hi) = t_mid;
            }
            t_stop = 0.5 * (lo + hi);
            record_checkpoints(cp, stepper, t_prev, t_stop, r);
            return true;
        }
        record_checkpoints(cp, stepper, t_prev, t_new, r);
        if (t_new >= t_limit) {
            t_stop = t_limit;
            return false;
        }
    }
}

TrajOutput run_full_trajectory(const model::ModulatedFluorophore& m,
                               const std::vector<LevelCache>& caches,
                               const Eigen::VectorXd& pops, double t_max,
                               const SimOptions& opts, rng::Stream stream,
                               bool keep_events) {
    const Eigen::Index n_states = m.n_states();
    TrajOutput out;
    out.occupation.assign(static_cast<std::size_t>(n_states), 0.0);
    out.cp_coords.assign(opts.checkpoints.size() *
                             static_cast<std::size_t>(n_states) * 4,
                         0.0);

    CheckpointCursor cp;
    if (!opts.checkpoints.empty()) {
        cp.times = &opts.checkpoints;
        cp.n_states = n_states;
        cp.coords = &out.cp_coords;
    }

    Eigen::Index r = stream.choose(pops, static_cast<int>(n_states));
    Vector2cd psi = opts.cold_start
                        ? Vector2cd(0.0, 1.0)
                        : draw_state(caches[static_cast<std::size_t>(r)], stream);

    const Matrix2cd* drift = &caches[static_cast<std::size_t>(r)].drift;
    auto stepper = ode::make_stepper<Vector2cd>(
        [&drift](double, const Vector2cd& v, Vector2cd& dv) {
            dv.noalias() = (*drift) * v;
        },
        opts.tol);

    double t = 0.0;
    while (t < t_max) {
        const LevelCache& lc = caches[static_cast<std::size_t>(r)];
        drift = &lc.drift;
        stepper.reset_state(t, psi);
        const double log_u = std::log(stream.uniform_open());
        double t_stop = t_max;
        const bool jumped = evolve_segment(stepper, lc, t, log_u, t_max, r, cp,
                                           out.renorms, t_stop);
        out.occupation[static_cast<std::size_t>(r)] += t_stop - t;
        if (!jumped) break;

        Vector2cd at_jump;
        stepper.interpolate(t_stop, at_jump);
        psi = at_jump / std::sqrt(at_jump.squaredNorm());
        const double emit_rate = lc.gamma * std::norm(psi(0));
        const double total_rate = emit_rate + lc.phi_out;
        if (total_rate <= 0.0) { // no open channel at this instant: no jump
            t = t_stop;
            continue;
        }
        if (stream.uniform() * total_rate < emit_rate) {
            ++out.n;
            psi = Vector2cd(0.0, 1.0); // sigma psi, normalized
            if (keep_events)
                out.events.push_back({t_stop, EventKind::Emission, -1, -1});
        } else {
            const int dest = stream.choose(lc.hop, static_cast<int>(n_states));
            if (keep_events)
                out.events.push_back({t_stop, EventKind::BathJump,
                                      static_cast<int>(r), dest});
            r = dest;
        }
        t = t_stop;
    }
    return out;
}

TrajOutput run_doubly_stochastic(const model::ModulatedFluorophore& m,
                                 const std::vector<LevelCache>& full_caches,
                                 const std::vector<LevelCache>& single_caches,
                                 const Eigen::VectorXd& pops, double t_max,
                                 const SimOptions& opts, rng::Stream stream,
                                 bool keep_events) {
    const Eigen::Index n_states = m.n_states();
    TrajOutput out;
    out.occupation.assign(static_cast<std::size_t>(n_states), 0.0);

    Eigen::Index r = stream.choose(pops, static_cast<int>(n_states));
    const Matrix2cd* drift = nullptr;
    auto stepper = ode::make_stepper<Vector2cd>(
        [&drift](double, const Vector2cd& v, Vector2cd& dv) {
            dv.noalias() = (*drift) * v;
        },
        opts.tol);
    CheckpointCursor no_cp;

    double t = 0.0;
    while (t < t_max) {
        const LevelCache& bath_lc = full_caches[static_cast<std::size_t>(r)];
        const LevelCache& sys_lc = single_caches[static_cast<std::size_t>(r)];
        const double sojourn = stream.exponential(bath_lc.phi_out);
        const double remaining = t_max - t;
        const double duration = std::min(sojourn, remaining);

        // independent single-state counting segment, restarted per sojourn
        drift = &sys_lc.drift;
        Vector2cd psi = draw_state(sys_lc, stream);
        double t_local = t;
        const double t_seg_end = t + duration;
        while (t_local < t_seg_end) {
            stepper.reset_state(t_local, psi);
            const double log_u = std::log(stream.uniform_open());
            double t_stop = t_seg_end;
            const bool jumped =
                evolve_segment(stepper, sys_lc, t_local, log_u, t_seg_end, r,
                               no_cp, out.renorms, t_stop);
            if (!jumped) break;
            ++out.n;
            if (keep_events)
                out.events.push_back({t_stop, EventKind::Emission, -1, -1});
            psi = Vector2cd(0.0, 1.0);
            t_local = t_stop;
        }

        out.occupation[static_cast<std::size_t>(r)] += duration;
        t += duration;
        if (sojourn >= remaining) break;
        const int dest = stream.choose(bath_lc.hop, static_cast<int>(n_states));
        if (keep_events)
            out.events.push_back({t, EventKind::BathJump, static_cast<int>(r), dest});
        r = dest;
    }
    return out;
}

EnsembleStats reduce_stats(const std::vector<std::uint64_t>& counts, double t) {
    EnsembleStats stats;
    stats.n_traj = static_cast<std::int64_t>(counts.size());
    stats.t = t;
    const double n = static_cast<double>(counts.size());
    double sum = 0.0;
    for (auto c : counts) sum += static_cast<double>(c);
    const double mean_n = sum / n;
    double m2 = 0.0, m4 = 0.0;
    for (auto c : counts) {
        const double d = static_cast<double>(c) - mean_n;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    stats.mean_rate = mean_n / t;
    if (counts.size() > 1) {
        const double s2 = m2 / (n - 1.0);
        stats.var_rate = s2 / t;
        stats.stderr_mean = std::sqrt(s2 / n) / t;
        const double var_s2 = (m4 / n - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
        stats.stderr_var = std::sqrt(std::max(0.0, var_s2)) / t;
    }
    std::map<std::uint64_t, std::uint64_t> hist;
    for (auto c : counts) ++hist[c];
    stats.empirical_p.assign(hist.begin(), hist.end());
    return stats;
}

void validate_run(std::int64_t n_traj, double t_max, const SimOptions& opts) {
    if (n_traj < 1)
        throw ValidationError("simulate: n_traj must be >= 1");
    if (!(t_max > 0.0))
        throw ValidationError("simulate: t_max must be > 0");
    for (std::size_t i = 0; i < opts.checkpoints.size(); ++i) {
        const double c = opts.checkpoints[i];
        if (!(c > 0.0) || c > t_max)
            throw ValidationError("simulate: checkpoints must lie in (0, t_max]");
        if (i > 0 && c <= opts.checkpoints[i - 1])
            throw ValidationError("simulate: checkpoints must be strictly increasing");
    }
}

SimResult assemble_result(const model::ModulatedFluorophore& m,
                          std::vector<TrajOutput>& slots, double t_max,
                          const SimOptions& opts) {
    const Eigen::Index n_states = m.n_states();
    SimResult result;
    result.counts.resize(slots.size());
    for (std::size_t k = 0; k < slots.size(); ++k)
        result.counts[k] = slots[k].n;
    result.stats = reduce_stats(result.counts, t_max);

    for (std::size_t k = 0; k < slots.size(); ++k)
        result.renormalizations += slots[k].renorms;

    if (opts.keep_records) {
        result.records.resize(slots.size());
        for (std::size_t k = 0; k < slots.size(); ++k) {
            TrajectoryRecord& rec = result.records[k];
            rec.seed = k;
            rec.events = std::move(slots[k].events);
            rec.t_final = t_max;
            rec.n_emissions = slots[k].n;
            rec.bath_occupation = slots[k].occupation;
        }
    }

    if (!opts.checkpoints.empty()) {
        const std::size_t n_cp = opts.checkpoints.size();
        const std::size_t stride = static_cast<std::size_t>(n_states) * 4;
        const double n = static_cast<double>(slots.size());
        std::vector<double> mean(n_cp * stride, 0.0), sq(n_cp * stride, 0.0);
        for (std::size_t k = 0; k < slots.size(); ++k)
            for (std::size_t i = 0; i < n_cp * stride; ++i) {
                mean[i] += slots[k].cp_coords[i];
                sq[i] += slots[k].cp_coords[i] * slots[k].cp_coords[i];
            }
        for (std::size_t i = 0; i < n_cp * stride; ++i) {
            mean[i] /= n;
            sq[i] = sq[i] / n - mean[i] * mean[i];
        }
        result.checkpoints.resize(n_cp);
        for (std::size_t c = 0; c < n_cp; ++c) {
            CheckpointAverage& avg = result.checkpoints[c];
            avg.t = opts.checkpoints[c];
            avg.mean_blocks.resize(static_cast<std::size_t>(n_states));
            avg.stderr_coords.resize(static_cast<std::size_t>(n_states));
            for (Eigen::Index r = 0; r < n_states; ++r) {
                const std::size_t base = c * stride + static_cast<std::size_t>(r) * 4;
                Matrix2cd b;
                b << mean[base + 0],
                    std::complex<double>(mean[base + 1], mean[base + 2]),
                    std::complex<double>(mean[base + 1], -mean[base + 2]),
                    mean[base + 3];
                avg.mean_blocks[static_cast<std::size_t>(r)] = b;
                Eigen::Array4d se;
                for (int j = 0; j < 4; ++j)
                    se(j) = std::sqrt(std::max(0.0, sq[base + static_cast<std::size_t>(j)]) / n);
                avg.stderr_coords[static_cast<std::size_t>(r)] = se;
            }
        }
    }
    return result;
}

} // namespace

SimResult simulate_ensemble(const model::ModulatedFluorophore& m,
                            std::int64_t n_traj, double t_max,
                            std::uint64_t master_seed, SimOptions opts) {
    validate_run(n_traj, t_max, opts);
    const Eigen::VectorXd pops =
        model::stationary_populations(model::bath_generator(m.bath));
    const counting::BlockState ss = counting::stationary_blocks(m);

    std::vector<LevelCache> caches;
    for (Eigen::Index r = 0; r < m.n_states(); ++r) {
        LevelCache lc = make_level_cache(m, r);
        set_state_sampler(lc, pops(r) > 1e-14
                                  ? Matrix2cd(ss[static_cast<std::size_t>(r)] / pops(r))
                                  : Matrix2cd(Matrix2cd::Zero()));
        caches.push_back(std::move(lc));
    }

    std::vector<TrajOutput> slots(static_cast<std::size_t>(n_traj));
    parallel_for(static_cast<std::size_t>(n_traj), opts.threads, [&](std::size_t k) {
        slots[k] = run_full_trajectory(m, caches, pops, t_max, opts,
                                       rng::Stream(master_seed, k),
                                       opts.keep_records);
    });
    return assemble_result(m, slots, t_max, opts);
}

SimResult doubly_stochastic_sample(const model::ModulatedFluorophore& m,
                                   std::int64_t n_traj, double t_max,
                                   std::uint64_t master_seed, SimOptions opts) {
    validate_run(n_traj, t_max, opts);
    if (!opts.checkpoints.empty())
        throw ValidationError(
            "doubly_stochastic_sample: checkpoints are not supported");
    const Eigen::VectorXd pops =
        model::stationary_populations(model::bath_generator(m.bath));

    std::vector<LevelCache> full_caches, single_caches;
    for (Eigen::Index r = 0; r < m.n_states(); ++r) {
        full_caches.push_back(make_level_cache(m, r));
        // single-state companion model for the per-sojourn counting process
        model::ModulatedFluorophore single;
        single.levels = {m.levels[static_cast<std::size_t>(r)]};
        single.drive = m.drive;
        single.bath.n_states = 1;
        single.bath.rates = Eigen::MatrixXd::Zero(1, 1);
        LevelCache lc = make_level_cache(single, 0);
        lc.hop.assign(static_cast<std::size_t>(m.n_states()), 0.0);
        set_state_sampler(lc, counting::stationary_blocks(single)[0]);
        single_caches.push_back(std::move(lc));
    }

    std::vector<TrajOutput> slots(static_cast<std::size_t>(n_traj));
    parallel_for(static_cast<std::size_t>(n_traj), opts.threads, [&](std::size_t k) {
        slots[k] = run_doubly_stochastic(m, full_caches, single_caches, pops,
                                         t_max, opts, rng::Stream(master_seed, k),
                                         opts.keep_records);
    });
    return assemble_result(m, slots, t_max, opts);
}

PartitionEstimate empirical_partition(std::span<const std::uint64_t> counts,
                                      double s) {
    if (counts.empty())
        throw ValidationError("empirical_partition: empty record set");
    const double n = static_cast<double>(counts.size());
    double sum = 0.0;
    for (auto c : counts) sum += std::exp(-s * static_cast<double>(c));
    PartitionEstimate est;
    est.z = sum / n;
    est.log_z = std::log(est.z);
    if (counts.size() > 1) {
        // jackknife over leave-one-out means
        double acc = 0.0;
        for (auto c : counts) {
            const double loo = (sum - std::exp(-s * static_cast<double>(c))) / (n - 1.0);
            acc += (loo - est.z) * (loo - est.z);
        }
        est.z_stderr = std::sqrt((n - 1.0) / n * acc);
    }
    return est;
}

PartitionEstimate empirical_partition(std::span<const TrajectoryRecord> records,
                                      double s, double t) {
    std::vector<std::uint64_t> counts;
    counts.reserve(records.size());
    for (const auto& rec : records) {
        if (std::abs(rec.t_final - t) > 1e-9 * std::max(1.0, std::abs(t)))
            throw ValidationError(
                "empirical_partition: records are not at the common time t");
        counts.push_back(rec.n_emissions);
    }
    return empirical_partition(counts, s);
}

void dump_records(std::span<const TrajectoryRecord> records,
                  const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw ValidationError("dump_records: cannot open '" + path + "'");
    for (const auto& rec : records) {
        nlohmann::ordered_json j;
        j["seed"] = rec.seed;
        nlohmann::ordered_json events = nlohmann::ordered_json::array();
        for (const auto& ev : rec.events) {
            nlohmann::ordered_json e;
            e["t"] = ev.t;
            if (ev.kind == EventKind::Emission) {
                e["kind"] = "emission";
            } else {
                e["kind"] = "bath_jump";
                e["from"] = ev.from;
                e["to"] = ev.to;
            }
            events.push_back(std::move(e));
        }
        j["events"] = std::move(events);
        j["n"] = rec.n_emissions;
        out << j.dump() << '\n';
    }
}

} // namespace jumpthermo::trajectory
