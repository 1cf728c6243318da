#include "jumpthermo/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jumpthermo/common.hpp"

namespace jumpthermo::liouville {

namespace {

using Eigen::Index;
using Eigen::Matrix2cd;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using std::complex;

constexpr complex<double> kI{0.0, 1.0};

// vec(A X B) = (B^T kron A) vec(X) for column-stacked vec; place the 4x4
// superoperator of X -> A X B into the (row_block, col_block) slot.
void add_sandwich(MatrixXcd& target, Index row_block, Index col_block,
                  const Matrix2cd& a, const Matrix2cd& b,
                  complex<double> weight) {
    const Matrix2cd bt = b.transpose();
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j)
            target.block<2, 2>(4 * row_block + 2 * i, 4 * col_block + 2 * j) +=
                weight * bt(i, j) * a;
}

} // namespace

TiltedParts build_tilted_parts(const model::ModulatedFluorophore& m) {
    const Index n = m.n_states();
    const Index dim = 4 * n;
    const Matrix2cd id = Matrix2cd::Identity();
    const Matrix2cd sigma = model::lowering_op();
    const Matrix2cd sigma_dag = model::raising_op();
    const Matrix2cd num = model::excited_projector();

    TiltedParts parts;
    parts.dim = dim;
    parts.no_jump = MatrixXcd::Zero(dim, dim);
    parts.jump = MatrixXcd::Zero(dim, dim);

    for (Index r = 0; r < n; ++r) {
        const auto& level = m.levels[static_cast<std::size_t>(r)];
        const Matrix2cd h = model::rotating_frame_hamiltonian(level, m.drive);

        // -i [H, X] = -i (H X - X H)
        add_sandwich(parts.no_jump, r, r, h, id, -kI);
        add_sandwich(parts.no_jump, r, r, id, h, kI);
        // -gamma/2 {n, X}
        add_sandwich(parts.no_jump, r, r, num, id, -0.5 * level.gamma);
        add_sandwich(parts.no_jump, r, r, id, num, -0.5 * level.gamma);
        // tilt-carrying jump: gamma sigma X sigma^dag
        add_sandwich(parts.jump, r, r, sigma, sigma_dag, level.gamma);

        // bath coupling: gain from R', loss out of R
        double outflow = 0.0;
        for (Index rp = 0; rp < n; ++rp) {
            if (rp == r) continue;
            add_sandwich(parts.no_jump, r, rp, id, id, m.bath.rates(r, rp));
            outflow += m.bath.rates(rp, r);
        }
        add_sandwich(parts.no_jump, r, r, id, id, -outflow);
    }
    return parts;
}

TiltedGenerator build_tilted_generator(const model::ModulatedFluorophore& m,
                                       double s) {
    TiltedParts parts = build_tilted_parts(m);
    TiltedGenerator gen;
    gen.s = s;
    gen.dim = parts.dim;
    gen.matrix = parts.at(s);
    return gen;
}

namespace {

// Sum of block traces of a stacked vector (indices 0 and 3 of each block).
complex<double> stacked_trace(const VectorXcd& v) {
    complex<double> tr = 0.0;
    for (Index r = 0; 4 * r < v.size(); ++r) tr += v(4 * r) + v(4 * r + 3);
    return tr;
}

SpectralData leading_of_matrix(const MatrixXcd& a) {
    const Index dim = a.rows();

    Eigen::ComplexEigenSolver<MatrixXcd> right_solver(a);
    if (right_solver.info() != Eigen::Success)
        throw NumericalError("leading_eigen: eigen decomposition failed");
    const auto& evals = right_solver.eigenvalues();

    Index lead = 0;
    double best = evals(0).real();
    for (Index k = 1; k < dim; ++k)
        if (evals(k).real() > best) { best = evals(k).real(); lead = k; }

    // Break near-ties by the largest trace overlap (a physical state has
    // nonvanishing total trace).
    double radius = 0.0;
    for (Index k = 0; k < dim; ++k) radius = std::max(radius, std::abs(evals(k)));
    const double tie_tol = 1e-12 * std::max(1.0, radius);
    for (Index k = 0; k < dim; ++k) {
        if (k == lead || evals(k).real() < best - tie_tol) continue;
        VectorXcd cand = right_solver.eigenvectors().col(k);
        VectorXcd cur = right_solver.eigenvectors().col(lead);
        if (std::abs(stacked_trace(cand)) > std::abs(stacked_trace(cur)))
            lead = k;
    }

    SpectralData out;
    out.lambda_max = evals(lead);
    out.right = right_solver.eigenvectors().col(lead);

    double gap = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < dim; ++k) {
        if (k == lead) continue;
        gap = std::min(gap, out.lambda_max.real() - evals(k).real());
    }
    out.gap = std::max(0.0, gap);
    out.degenerate_warning = out.gap < 1e-8 * std::max(radius, 1e-300);

    if (!std::isfinite(out.lambda_max.real()) || !std::isfinite(out.lambda_max.imag()))
        throw NumericalError("leading_eigen: non-finite leading eigenvalue");
    if (std::abs(out.lambda_max.imag()) >
        1e-9 * std::max(1.0, std::abs(out.lambda_max.real())))
        throw NumericalError(
            "leading_eigen: leading eigenvalue has imaginary part " +
            std::to_string(out.lambda_max.imag()));

    // Left eigenvector from the adjoint problem, matched by eigenvalue.
    Eigen::ComplexEigenSolver<MatrixXcd> left_solver(a.adjoint());
    if (left_solver.info() != Eigen::Success)
        throw NumericalError("leading_eigen: adjoint decomposition failed");
    Index lmatch = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < dim; ++k) {
        double d = std::abs(left_solver.eigenvalues()(k) - std::conj(out.lambda_max));
        if (d < dist) { dist = d; lmatch = k; }
    }
    out.left = left_solver.eigenvectors().col(lmatch);

    // Normalize: sum_R Tr[g_R] = 1, then <l|g> = sum_R Tr[l_R^dag g_R] = 1.
    complex<double> tr = stacked_trace(out.right);
    if (std::abs(tr) < 1e-12)
        throw NumericalError("leading_eigen: leading right eigenvector is traceless");
    out.right /= tr;
    complex<double> pairing = out.left.dot(out.right);
    if (std::abs(pairing) < 1e-12)
        throw NumericalError("leading_eigen: left/right pairing is singular");
    out.left /= std::conj(pairing);

    // Residual check against the matrix norm.
    const double anorm = a.norm();
    const double resid = (a * out.right - out.lambda_max * out.right).norm();
    if (resid > 1e-10 * std::max(anorm, 1.0))
        throw NumericalError("leading_eigen: eigenpair residual " +
                             std::to_string(resid) + " exceeds tolerance");
    return out;
}

} // namespace

SpectralData leading_eigen(const TiltedGenerator& gen, Eigen::Index max_dim) {
    if (gen.dim > max_dim)
        throw ValidationError("leading_eigen: dim " + std::to_string(gen.dim) +
                              " exceeds configured max " + std::to_string(max_dim));
    return leading_of_matrix(gen.matrix);
}

double theta(const model::ModulatedFluorophore& m, double s) {
    return -leading_eigen(build_tilted_generator(m, s)).lambda_max.real();
}

// ---------------------------------------------------------------------------
// theta_poly: independent route. Each Hermitian block X is tracked by the
// real coordinates (x1, x2, x3, x4) = (X++, Re X+-, Im X+-, X--); the
// generator is then a real matrix assembled directly from the equations of
// motion, and the largest real root of det(A - u*1) is bracketed through
// determinant sign changes.
// ---------------------------------------------------------------------------

namespace {

MatrixXd real_representation(const model::ModulatedFluorophore& m, double s) {
    const Index n = m.n_states();
    const Index dim = 4 * n;
    const double z = std::exp(-s);
    MatrixXd a = MatrixXd::Zero(dim, dim);
    for (Index r = 0; r < n; ++r) {
        const auto& level = m.levels[static_cast<std::size_t>(r)];
        const double g = level.gamma;
        const double om = level.rabi;
        const double d = m.detuning(r);
        const Index o = 4 * r;
        // d/dt (x1,x2,x3,x4): unitary part
        a(o + 0, o + 2) += -om;
        a(o + 3, o + 2) += om;
        a(o + 1, o + 2) += -d;
        a(o + 2, o + 1) += d;
        a(o + 2, o + 0) += 0.5 * om;
        a(o + 2, o + 3) += -0.5 * om;
        // dissipator with tilted feeding of the ground population
        a(o + 0, o + 0) += -g;
        a(o + 1, o + 1) += -0.5 * g;
        a(o + 2, o + 2) += -0.5 * g;
        a(o + 3, o + 0) += g * z;
        // bath hopping acts identically on all four coordinates
        double outflow = 0.0;
        for (Index rp = 0; rp < n; ++rp) {
            if (rp == r) continue;
            const double rate = m.bath.rates(r, rp);
            for (Index c = 0; c < 4; ++c) a(o + c, 4 * rp + c) += rate;
            outflow += m.bath.rates(rp, r);
        }
        for (Index c = 0; c < 4; ++c) a(o + c, o + c) += -outflow;
    }
    return a;
}

double char_poly(const MatrixXd& a, double u) {
    MatrixXd shifted = a;
    shifted.diagonal().array() -= u;
    // det(A - u) = prod(lambda_i - u); positive above the largest real root.
    return shifted.partialPivLu().determinant();
}

} // namespace

double theta_poly(const model::ModulatedFluorophore& m, double s) {
    if (m.n_states() > 2)
        throw ValidationError("theta_poly: supported for n_states <= 2");
    const MatrixXd a = real_representation(m, s);

    // Gershgorin bounds for the real spectrum.
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < a.rows(); ++i) {
        double radius = 0.0;
        for (Index j = 0; j < a.cols(); ++j)
            if (j != i) radius += std::abs(a(i, j));
        hi = std::max(hi, a(i, i) + radius);
        lo = std::min(lo, a(i, i) - radius);
    }
    hi += 1.0;
    lo -= 1.0;

    // March downward until the determinant changes sign. The step must be
    // finer than the smallest gap between the two leading real roots, which
    // shrinks near the slow-modulation crossing.
    const int n_steps = 20000;
    const double du = (hi - lo) / n_steps;
    double u_prev = hi;
    double p_prev = char_poly(a, u_prev);
    if (p_prev <= 0.0)
        throw NumericalError("theta_poly: determinant not positive above the "
                             "Gershgorin bound (u=" + std::to_string(u_prev) + ")");
    double u_lo = 0.0, u_hi = 0.0;
    bool bracketed = false;
    for (int k = 1; k <= n_steps; ++k) {
        const double u = hi - k * du;
        const double p = char_poly(a, u);
        if (p <= 0.0) {
            u_lo = u;
            u_hi = u_prev;
            bracketed = true;
            break;
        }
        u_prev = u;
        p_prev = p;
    }
    if (!bracketed)
        throw NumericalError(
            "theta_poly: no sign change of det(A - u) in [" + std::to_string(lo) +
            ", " + std::to_string(hi) + "]; " + std::to_string(n_steps) +
            " bracketing steps of " + std::to_string(du));

    // Bisection to machine-limited width.
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (u_lo + u_hi);
        if (u_hi - u_lo < 1e-15 * std::max(1.0, std::abs(mid))) break;
        if (char_poly(a, mid) <= 0.0)
            u_lo = mid;
        else
            u_hi = mid;
    }
    return -0.5 * (u_lo + u_hi);
}

// ---------------------------------------------------------------------------
// Cumulants and populations
// ---------------------------------------------------------------------------

namespace {

// Exact eigenvalue derivative: <<N>> = -d(lambda)/ds = e^{-s} <l| J |g> with
// the normalization <l|g> = 1.
double mean_from_pair(const TiltedParts& parts, double s, const SpectralData& sd) {
    const complex<double> overlap = sd.left.dot(parts.jump * sd.right);
    const double mean = std::exp(-s) * overlap.real();
    if (std::abs(overlap.imag()) > 1e-9 * std::max(1.0, std::abs(overlap.real())))
        throw NumericalError("cumulants: mean has imaginary residue " +
                             std::to_string(overlap.imag()));
    return mean;
}

double mean_at(const TiltedParts& parts, double s) {
    const SpectralData sd = leading_of_matrix(parts.at(s));
    return mean_from_pair(parts, s, sd);
}

// 5-point first derivative of f at x with step h.
template <class F>
double stencil_d1(F&& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

} // namespace

std::pair<double, double> cumulants(const model::ModulatedFluorophore& m, double s,
                                    double h) {
    if (!(h > 0.0))
        throw ValidationError("cumulants: step must be positive");
    if (h < 1e-7)
        throw ValidationError(
            "cumulants: step " + std::to_string(h) +
            " is below the eigenvalue noise floor; use a larger h");

    const TiltedParts parts = build_tilted_parts(m);
    const SpectralData center = leading_of_matrix(parts.at(s));
    const double mean = mean_from_pair(parts, s, center);

    auto mean_fn = [&](double x) { return mean_at(parts, x); };
    const double coarse = stencil_d1(mean_fn, s, h);
    const double fine = stencil_d1(mean_fn, s, 0.5 * h);
    const double dmean = (16.0 * fine - coarse) / 15.0; // one Richardson pass
    double variance = -dmean;
    if (variance < -1e-9)
        throw NumericalError("cumulants: variance " + std::to_string(variance) +
                             " below the numerical floor");
    return {mean, variance};
}

namespace {

Eigen::VectorXd populations_from(const SpectralData& sd, Index n) {
    Eigen::VectorXd pops(n);
    complex<double> total = 0.0;
    std::vector<complex<double>> raw(static_cast<std::size_t>(n));
    for (Index r = 0; r < n; ++r) {
        const Matrix2cd lg = sd.left_block(r) * sd.right_block(r);
        raw[static_cast<std::size_t>(r)] = lg.trace();
        total += lg.trace();
    }
    if (std::abs(total) < 1e-12)
        throw NumericalError("s_populations: total weight vanishes");
    for (Index r = 0; r < n; ++r) {
        const complex<double> p = raw[static_cast<std::size_t>(r)] / total;
        if (std::abs(p.imag()) > 1e-9)
            throw NumericalError("s_populations: population has imaginary residue " +
                                 std::to_string(p.imag()));
        pops(r) = p.real();
    }
    // clamp roundoff-negative entries, keep the sum exactly one
    pops = pops.cwiseMax(0.0);
    pops /= pops.sum();
    return pops;
}

} // namespace

Eigen::VectorXd s_populations(const model::ModulatedFluorophore& m, double s) {
    const SpectralData sd = leading_eigen(build_tilted_generator(m, s));
    return populations_from(sd, m.n_states());
}

SweepOutcome sweep(const model::ModulatedFluorophore& m,
                   const std::vector<double>& s_grid, unsigned threads,
                   double h) {
    const TiltedParts parts = build_tilted_parts(m);
    const Index n = m.n_states();

    struct Slot {
        bool ok = false;
        ThermoPoint point;
        std::string error;
    };
    std::vector<Slot> slots(s_grid.size());

    parallel_for(s_grid.size(), threads, [&](std::size_t i) {
        const double s = s_grid[i];
        try {
            const SpectralData sd = leading_of_matrix(parts.at(s));
            ThermoPoint pt;
            pt.s = s;
            pt.theta = -sd.lambda_max.real();
            pt.mean = mean_from_pair(parts, s, sd);
            auto mean_fn = [&](double x) { return mean_at(parts, x); };
            const double coarse = stencil_d1(mean_fn, s, h);
            const double fine = stencil_d1(mean_fn, s, 0.5 * h);
            pt.variance = -(16.0 * fine - coarse) / 15.0;
            pt.pops = populations_from(sd, n);
            slots[i].point = std::move(pt);
            slots[i].ok = true;
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    });

    SweepOutcome out;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].ok)
            out.points.push_back(std::move(slots[i].point));
        else
            out.errors.push_back({s_grid[i], slots[i].error});
    }
    return out;
}

} // namespace jumpthermo::liouville
