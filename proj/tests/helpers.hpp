// helpers.hpp — shared model builders for the test suites.

#pragma once

#include <Eigen/Dense>

#include "jumpthermo/model.hpp"
#include "jumpthermo/rng.hpp"

namespace jt_test {

using jumpthermo::model::ModelConfig;
using jumpthermo::model::ModulatedFluorophore;

// Slow-modulation blinking model: gamma_A = 2.5, gamma_B = 0.5,
// phi_AB = 4e-4, phi_BA = 8e-4, resonance, alpha = 2.15.
inline ModulatedFluorophore blinking_model() {
    ModelConfig cfg;
    cfg.n_states = 2;
    cfg.levels = {{2.5, 0.0, 1.0}, {0.5, 0.0, 1.0}};
    cfg.omega_laser = 0.0;
    Eigen::MatrixXd rates(2, 2);
    rates << 0.0, 4e-4,
             8e-4, 0.0;
    cfg.rates = rates;
    cfg.alpha = 2.15;
    return build_model(cfg);
}

// Fast-modulation model with symmetric hopping.
inline ModulatedFluorophore fast_model(double gamma_a, double gamma_b,
                                       double phi) {
    ModelConfig cfg;
    cfg.n_states = 2;
    cfg.levels = {{gamma_a, 0.0, 1.0}, {gamma_b, 0.0, 1.0}};
    cfg.omega_laser = 0.0;
    Eigen::MatrixXd rates(2, 2);
    rates << 0.0, phi,
             phi, 0.0;
    cfg.rates = rates;
    return build_model(cfg);
}

// Single-state (Markovian) resonant model.
inline ModulatedFluorophore markov_model(double gamma, double rabi = 1.0) {
    ModelConfig cfg;
    cfg.n_states = 1;
    cfg.levels = {{gamma, 0.0, rabi}};
    cfg.omega_laser = 0.0;
    return build_model(cfg);
}

// Random 1- or 2-state model, optionally detuned.
inline ModulatedFluorophore random_model(jumpthermo::rng::Stream& stream,
                                         int n_states, bool detuned = true) {
    ModelConfig cfg;
    cfg.n_states = n_states;
    for (int r = 0; r < n_states; ++r)
        cfg.levels.push_back({0.3 + stream.uniform() * 2.7,
                              detuned ? stream.uniform() - 0.5 : 0.0,
                              0.3 + stream.uniform() * 1.7});
    cfg.omega_laser = detuned ? stream.uniform() - 0.5 : 0.0;
    if (n_states > 1) {
        Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(n_states, n_states);
        for (int r = 0; r < n_states; ++r)
            for (int c = 0; c < n_states; ++c)
                if (r != c) rates(r, c) = 0.05 + stream.uniform() * 1.5;
        cfg.rates = rates;
    }
    return build_model(cfg);
}

} // namespace jt_test
