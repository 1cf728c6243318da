#include "jumpthermo/counting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jumpthermo/common.hpp"
#include "jumpthermo/liouville.hpp"

namespace jumpthermo::counting {

namespace {

using Eigen::Index;
using Eigen::Matrix2cd;
using Eigen::VectorXcd;
using std::complex;

VectorXcd stack_blocks(const BlockState& blocks) {
    VectorXcd v(4 * static_cast<Index>(blocks.size()));
    for (Index r = 0; r < static_cast<Index>(blocks.size()); ++r) {
        const Matrix2cd& b = blocks[static_cast<std::size_t>(r)];
        v(4 * r + 0) = b(0, 0);
        v(4 * r + 1) = b(1, 0);
        v(4 * r + 2) = b(0, 1);
        v(4 * r + 3) = b(1, 1);
    }
    return v;
}

BlockState unstack_blocks(const VectorXcd& v) {
    BlockState blocks(static_cast<std::size_t>(v.size() / 4));
    for (Index r = 0; r < static_cast<Index>(blocks.size()); ++r) {
        Matrix2cd b;
        b << v(4 * r + 0), v(4 * r + 2),
             v(4 * r + 1), v(4 * r + 3);
        blocks[static_cast<std::size_t>(r)] = b;
    }
    return blocks;
}

complex<double> stacked_trace(const VectorXcd& v) {
    complex<double> tr = 0.0;
    for (Index r = 0; 4 * r < v.size(); ++r) tr += v(4 * r) + v(4 * r + 3);
    return tr;
}

} // namespace

BlockState stationary_blocks(const model::ModulatedFluorophore& m) {
    const auto sd = liouville::leading_eigen(liouville::build_tilted_generator(m, 0.0));
    BlockState blocks(static_cast<std::size_t>(m.n_states()));
    for (Index r = 0; r < m.n_states(); ++r) {
        Matrix2cd b = sd.right_block(r);
        blocks[static_cast<std::size_t>(r)] = 0.5 * (b + b.adjoint());
    }
    return blocks;
}

BlockState initial_blocks(const model::ModulatedFluorophore& m, InitialCondition init) {
    if (init == InitialCondition::Stationary) return stationary_blocks(m);
    const Eigen::VectorXd pops =
        model::stationary_populations(model::bath_generator(m.bath));
    BlockState blocks(static_cast<std::size_t>(m.n_states()));
    for (Index r = 0; r < m.n_states(); ++r) {
        Matrix2cd b = Matrix2cd::Zero();
        b(1, 1) = pops(r); // ground state |-><-| weighted by P_R^inf
        blocks[static_cast<std::size_t>(r)] = b;
    }
    return blocks;
}

GeneratingResult integrate_generating(const model::ModulatedFluorophore& m,
                                      double s, double t, InitialCondition init,
                                      ode::Tolerances tol) {
    if (t < 0.0)
        throw ValidationError("integrate_generating: t must be >= 0");
    const Eigen::MatrixXcd gen = liouville::build_tilted_parts(m).at(s);
    VectorXcd y = stack_blocks(initial_blocks(m, init));

    double log_scale = 0.0;
    auto stepper = ode::make_stepper<VectorXcd>(
        [&gen](double, const VectorXcd& v, VectorXcd& dv) { dv.noalias() = gen * v; },
        tol);
    stepper.init(0.0, y);
    while (stepper.time() < t) {
        stepper.step(t);
        const double nrm = stepper.state().norm();
        if (nrm < 0.5 || nrm > 2.0) {
            // rescale so tolerances keep acting relatively over e^{+-Theta t}
            VectorXcd rescaled = stepper.state() / nrm;
            log_scale += std::log(nrm);
            stepper.reset_state(stepper.time(), rescaled);
        }
    }

    const complex<double> tr = stacked_trace(stepper.state());
    if (std::abs(tr.imag()) > 1e-9 * std::max(1.0, std::abs(tr.real())))
        throw NumericalError("integrate_generating: trace has imaginary residue " +
                             std::to_string(tr.imag()));
    if (tr.real() <= 0.0)
        throw NumericalError("integrate_generating: nonpositive Z at t = " +
                             std::to_string(stepper.time()));
    GeneratingResult out;
    out.log_z = log_scale + std::log(tr.real());
    out.z = std::exp(out.log_z);
    return out;
}

CountingDistribution integrate_hierarchy(const model::ModulatedFluorophore& m,
                                         double t, double tail_tol,
                                         InitialCondition init,
                                         ode::Tolerances tol) {
    if (!(tail_tol > 0.0) || tail_tol > 1e-3)
        throw ValidationError("integrate_hierarchy: tail_tol must be in (0, 1e-3]");
    if (t < 0.0)
        throw ValidationError("integrate_hierarchy: t must be >= 0");

    const auto parts = liouville::build_tilted_parts(m);
    const Index bdim = parts.dim;
    const VectorXcd y0 = stack_blocks(initial_blocks(m, init));

    // sizing heuristic from the stationary emission rate
    double rate = 0.0;
    {
        const BlockState ss = stationary_blocks(m);
        for (Index r = 0; r < m.n_states(); ++r)
            rate += m.levels[static_cast<std::size_t>(r)].gamma *
                    ss[static_cast<std::size_t>(r)](0, 0).real();
    }

    constexpr Index kCap = 100000;
    Index n_max = static_cast<Index>(std::ceil(5.0 * rate * t)) + 10;
    double achieved_tail = 1.0;

    while (n_max <= kCap) {
        VectorXcd y = VectorXcd::Zero(bdim * (n_max + 1));
        y.head(bdim) = y0;

        auto rhs = [&](double, const VectorXcd& v, VectorXcd& dv) {
            for (Index n = 0; n <= n_max; ++n) {
                dv.segment(n * bdim, bdim).noalias() =
                    parts.no_jump * v.segment(n * bdim, bdim);
                if (n > 0)
                    dv.segment(n * bdim, bdim).noalias() +=
                        parts.jump * v.segment((n - 1) * bdim, bdim);
            }
        };
        ode::integrate_to(rhs, 0.0, t, y, tol);

        CountingDistribution dist;
        dist.t = t;
        dist.probs.resize(static_cast<std::size_t>(n_max) + 1);
        double total = 0.0;
        for (Index n = 0; n <= n_max; ++n) {
            const complex<double> tr = stacked_trace(
                VectorXcd(y.segment(n * bdim, bdim)));
            if (std::abs(tr.imag()) > 1e-9)
                throw NumericalError("integrate_hierarchy: P_n has imaginary residue");
            const double p = std::clamp(tr.real(), 0.0, 1.0);
            dist.probs[static_cast<std::size_t>(n)] = p;
            total += p;
        }
        dist.tail_mass = std::max(0.0, 1.0 - total);
        achieved_tail = dist.tail_mass;
        if (dist.tail_mass < tail_tol) return dist;
        n_max *= 2;
    }
    throw NumericalError("integrate_hierarchy: n_max cap " + std::to_string(kCap) +
                         " exceeded; achieved tail mass " +
                         std::to_string(achieved_tail));
}

SEnsembleStats s_ensemble(const CountingDistribution& dist, double s) {
    const std::size_t n_probs = dist.probs.size();
    SEnsembleStats out;
    out.s = s;
    out.q.assign(n_probs, 0.0);

    // log-sum-exp over w_n = ln P_n - s n
    double w_max = -std::numeric_limits<double>::infinity();
    std::vector<double> w(n_probs, -std::numeric_limits<double>::infinity());
    for (std::size_t n = 0; n < n_probs; ++n) {
        const double p = dist.probs[n];
        if (p < 0.0)
            throw NumericalError("s_ensemble: negative probability at n = " +
                                 std::to_string(n));
        if (p == 0.0) continue;
        w[n] = std::log(p) - s * static_cast<double>(n);
        w_max = std::max(w_max, w[n]);
    }
    if (!std::isfinite(w_max))
        throw NumericalError("s_ensemble: distribution has no support");
    double sum = 0.0;
    for (std::size_t n = 0; n < n_probs; ++n)
        if (std::isfinite(w[n])) sum += std::exp(w[n] - w_max);
    out.log_z = w_max + std::log(sum);
    out.z = std::exp(out.log_z);
    out.grand_potential = -out.log_z;

    for (std::size_t n = 0; n < n_probs; ++n) {
        if (!std::isfinite(w[n])) continue;
        const double q = std::exp(w[n] - out.log_z);
        out.q[n] = q;
        if (q > 0.0) {
            out.entropy -= q * std::log(q);
            out.internal_energy -= q * std::log(dist.probs[n]);
            out.particle_number += q * static_cast<double>(n);
        }
    }
    out.residual = std::abs(out.grand_potential -
                            (out.internal_energy - out.entropy +
                             s * out.particle_number));
    return out;
}

std::vector<BlockState> integrate_master(const model::ModulatedFluorophore& m,
                                         const BlockState& init,
                                         const std::vector<double>& times,
                                         ode::Tolerances tol) {
    const Eigen::MatrixXcd gen = liouville::build_tilted_parts(m).at(0.0);
    VectorXcd y = stack_blocks(init);
    std::vector<BlockState> out;
    out.reserve(times.size());
    double t_now = 0.0;
    for (double t : times) {
        if (t < t_now)
            throw ValidationError("integrate_master: times must be ascending");
        if (t > t_now) {
            ode::integrate_to(
                [&gen](double, const VectorXcd& v, VectorXcd& dv) {
                    dv.noalias() = gen * v;
                },
                t_now, t, y, tol);
            t_now = t;
        }
        out.push_back(unstack_blocks(y));
    }
    return out;
}

} // namespace jumpthermo::counting
