// ode.hpp — Embedded Dormand–Prince 5(4) stepper with PI-free step control
// and a cubic-Hermite continuous extension for in-step event location.
//
// State is any Eigen dense vector (real or complex). The low-level Stepper
// exposes the last accepted step so callers can interpolate inside it;
// integrate_to() is the plain drive-to-endpoint loop.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

#include "jumpthermo/common.hpp"

namespace jumpthermo::ode {

namespace detail {
inline double comp_abs(double x) { return std::abs(x); }
inline double comp_abs(const std::complex<double>& x) { return std::abs(x); }
} // namespace detail

struct Tolerances {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
};

// Dormand–Prince 5(4), FSAL. RHS signature: void(double t, const State&, State&).
template <class State, class Rhs>
class Stepper {
public:
    Stepper(Rhs rhs, Tolerances tol = {}) : rhs_(std::move(rhs)), tol_(tol) {}

    void init(double t0, const State& y0) {
        t_ = t0;
        y_ = y0;
        resize_work();
        rhs_(t_, y_, k1_);
        h_ = 0.0;
        t_prev_ = t0;
        y_prev_ = y0;
        k_prev_ = k1_;
    }

    double time() const { return t_; }
    const State& state() const { return y_; }

    // Last accepted step, for interpolation: [prev_time, time].
    double prev_time() const { return t_prev_; }
    const State& prev_state() const { return y_prev_; }

    // Replace the current state (e.g. after a jump); re-evaluates the RHS.
    void reset_state(double t, const State& y) { init(t, y); }

    // Advance by one accepted step, not beyond t_limit. Returns the new time.
    double step(double t_limit) {
        if (t_ >= t_limit) return t_;
        if (h_ <= 0.0) h_ = initial_step(t_limit);
        for (int attempt = 0; attempt < 200; ++attempt) {
            double h = std::min(h_, t_limit - t_);
            bool clipped = h < h_;
            double err = try_step(h);
            if (err <= 1.0) {
                t_prev_ = t_;
                y_prev_.swap(y_);
                k_prev_.swap(k1_);
                t_ += h;
                y_ = y_new_;
                k1_ = k7_; // FSAL
                double grow = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
                if (!clipped) h_ = h * std::min(5.0, std::max(0.2, grow));
                return t_;
            }
            double shrink = std::max(0.2, 0.9 * std::pow(err, -0.2));
            h_ = h * shrink;
            if (h_ < 1e-14 * std::max(1.0, std::abs(t_)))
                throw NumericalError("ode: step size underflow at t=" + std::to_string(t_));
        }
        throw NumericalError("ode: step repeatedly rejected at t=" + std::to_string(t_));
    }

    // Cubic Hermite interpolant on the last accepted step.
    void interpolate(double t, State& out) const {
        double h = t_ - t_prev_;
        if (h <= 0.0) { out = y_; return; }
        double th = (t - t_prev_) / h;
        double th2 = th * th;
        double h00 = (1 + 2 * th) * (1 - th) * (1 - th);
        double h10 = th * (1 - th) * (1 - th);
        double h01 = th2 * (3 - 2 * th);
        double h11 = th2 * (th - 1);
        out = h00 * y_prev_ + (h * h10) * k_prev_ + h01 * y_ + (h * h11) * k1_;
    }

private:
    void resize_work() {
        k1_ = y_; k2_ = y_; k3_ = y_; k4_ = y_;
        k5_ = y_; k6_ = y_; k7_ = y_;
        y_new_ = y_; y_stage_ = y_; y_err_ = y_;
    }

    double initial_step(double t_limit) const {
        double scale = 0.0;
        for (Eigen::Index i = 0; i < y_.size(); ++i)
            scale = std::max(scale, detail::comp_abs(k1_[i]) /
                                        (tol_.abs_tol + tol_.rel_tol * detail::comp_abs(y_[i])));
        double h = scale > 0.0 ? 0.01 / scale : 1e-3;
        return std::min(h, t_limit - t_);
    }

    // One trial step of size h; fills y_new_, k2_..k7_; returns scaled error.
    double try_step(double h) {
        y_stage_ = y_ + (h * (1.0 / 5.0)) * k1_;
        rhs_(t_ + h / 5.0, y_stage_, k2_);
        y_stage_ = y_ + h * ((3.0 / 40.0) * k1_ + (9.0 / 40.0) * k2_);
        rhs_(t_ + 3.0 * h / 10.0, y_stage_, k3_);
        y_stage_ = y_ + h * ((44.0 / 45.0) * k1_ - (56.0 / 15.0) * k2_ + (32.0 / 9.0) * k3_);
        rhs_(t_ + 4.0 * h / 5.0, y_stage_, k4_);
        y_stage_ = y_ + h * ((19372.0 / 6561.0) * k1_ - (25360.0 / 2187.0) * k2_ +
                             (64448.0 / 6561.0) * k3_ - (212.0 / 729.0) * k4_);
        rhs_(t_ + 8.0 * h / 9.0, y_stage_, k5_);
        y_stage_ = y_ + h * ((9017.0 / 3168.0) * k1_ - (355.0 / 33.0) * k2_ +
                             (46732.0 / 5247.0) * k3_ + (49.0 / 176.0) * k4_ -
                             (5103.0 / 18656.0) * k5_);
        rhs_(t_ + h, y_stage_, k6_);
        y_new_ = y_ + h * ((35.0 / 384.0) * k1_ + (500.0 / 1113.0) * k3_ +
                           (125.0 / 192.0) * k4_ - (2187.0 / 6784.0) * k5_ +
                           (11.0 / 84.0) * k6_);
        rhs_(t_ + h, y_new_, k7_);
        y_err_ = h * ((71.0 / 57600.0) * k1_ - (71.0 / 16695.0) * k3_ +
                      (71.0 / 1920.0) * k4_ - (17253.0 / 339200.0) * k5_ +
                      (22.0 / 525.0) * k6_ - (1.0 / 40.0) * k7_);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < y_.size(); ++i) {
            double sc = tol_.abs_tol +
                        tol_.rel_tol * std::max(detail::comp_abs(y_[i]), detail::comp_abs(y_new_[i]));
            double e = detail::comp_abs(y_err_[i]) / sc;
            sum += e * e;
        }
        return std::sqrt(sum / static_cast<double>(y_.size()));
    }

    Rhs rhs_;
    Tolerances tol_;
    double t_ = 0.0, h_ = 0.0, t_prev_ = 0.0;
    State y_, y_prev_, k_prev_;
    State k1_, k2_, k3_, k4_, k5_, k6_, k7_;
    State y_new_, y_stage_, y_err_;
};

template <class State, class Rhs>
Stepper<State, std::decay_t<Rhs>> make_stepper(Rhs&& rhs, Tolerances tol = {}) {
    return Stepper<State, std::decay_t<Rhs>>(std::forward<Rhs>(rhs), tol);
}

// Integrate y from t0 to t1 in place.
template <class State, class Rhs>
void integrate_to(Rhs&& rhs, double t0, double t1, State& y, Tolerances tol = {}) {
    auto stepper = make_stepper<State>(std::forward<Rhs>(rhs), tol);
    stepper.init(t0, y);
    while (stepper.time() < t1) stepper.step(t1);
    y = stepper.state();
}

} // namespace jumpthermo::ode
