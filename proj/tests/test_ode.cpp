#include <doctest.h>

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "jumpthermo/ode.hpp"

using namespace jumpthermo;
using Eigen::Vector2cd;
using Eigen::VectorXd;

TEST_CASE("scalar exponential decay to tolerance") {
    VectorXd y(1);
    y << 1.0;
    ode::integrate_to(
        [](double, const VectorXd& v, VectorXd& dv) { dv = -2.0 * v; }, 0.0, 3.0,
        y);
    CHECK(std::abs(y(0) - std::exp(-6.0)) < 1e-9);
}

TEST_CASE("complex rotation preserves norm and phase") {
    Vector2cd y(1.0, 0.0);
    const std::complex<double> i(0.0, 1.0);
    Eigen::Matrix2cd h;
    h << 0.0, 1.0, 1.0, 0.0; // sigma_x rotation
    ode::integrate_to(
        [&](double, const Vector2cd& v, Vector2cd& dv) { dv = -i * (h * v); }, 0.0,
        1.3, y);
    // exp(-i sigma_x t): (cos t, -i sin t)
    CHECK(std::abs(y(0) - std::cos(1.3)) < 1e-9);
    CHECK(std::abs(y(1) - (-i * std::sin(1.3))) < 1e-9);
    CHECK(std::abs(y.norm() - 1.0) < 1e-9);
}

TEST_CASE("stepper interpolation tracks the solution inside a step") {
    auto rhs = [](double, const VectorXd& v, VectorXd& dv) { dv = -1.0 * v; };
    auto stepper = ode::make_stepper<VectorXd>(rhs, {1e-10, 1e-10});
    VectorXd y(1);
    y << 1.0;
    stepper.init(0.0, y);
    while (stepper.time() < 2.0) {
        stepper.step(2.0);
        const double t_mid = 0.5 * (stepper.prev_time() + stepper.time());
        VectorXd mid;
        stepper.interpolate(t_mid, mid);
        CHECK(std::abs(mid(0) - std::exp(-t_mid)) < 1e-8);
    }
}

TEST_CASE("integrate_to lands exactly on the endpoint") {
    VectorXd y(2);
    y << 1.0, 0.0;
    ode::integrate_to(
        [](double, const VectorXd& v, VectorXd& dv) {
            dv.resize(2);
            dv(0) = v(1);
            dv(1) = -v(0);
        },
        0.0, 3.14159, y);
    CHECK(std::abs(y(0) - std::cos(3.14159)) < 1e-8);
    CHECK(std::abs(y(1) + std::sin(3.14159)) < 1e-8);
}
