#include <doctest.h>

#include <cmath>

#include "jumpthermo/common.hpp"
#include "jumpthermo/config.hpp"
#include "jumpthermo/model.hpp"
#include "jumpthermo/rng.hpp"

using namespace jumpthermo;
using namespace jumpthermo::model;

namespace {

// Two-state model used throughout: gamma_A/O = 2.5, gamma_B/O = 0.5,
// phi_AB/O = 4e-4, phi_BA/O = 8e-4, resonance.
ModelConfig blinking_config() {
    ModelConfig cfg;
    cfg.n_states = 2;
    cfg.levels = {{2.5, 0.0, 1.0}, {0.5, 0.0, 1.0}};
    cfg.omega_laser = 0.0;
    Eigen::MatrixXd rates(2, 2);
    rates << 0.0, 4e-4,
             8e-4, 0.0;
    cfg.rates = rates;
    cfg.alpha = 2.15;
    return cfg;
}

} // namespace

TEST_CASE("build_model accepts the blinking configuration") {
    const auto m = build_model(blinking_config());
    CHECK(m.n_states() == 2);
    CHECK(m.levels[0].gamma == 2.5);
    CHECK(m.bath.rates(0, 1) == 4e-4);
    CHECK(m.alpha.value() == 2.15);
}

TEST_CASE("build_model accepts a single-state config without rates") {
    ModelConfig cfg;
    cfg.n_states = 1;
    cfg.levels = {{2.0, 0.0, 1.0}};
    cfg.omega_laser = 0.0;
    const auto m = build_model(cfg);
    CHECK(m.n_states() == 1);
    CHECK(m.bath.rates(0, 0) == 0.0);
}

TEST_CASE("build_model rejects invalid fields by name") {
    auto cfg = blinking_config();
    cfg.levels[0].gamma = -1.0;
    CHECK_THROWS_WITH_AS(build_model(cfg), doctest::Contains("gamma"),
                         ValidationError);

    cfg = blinking_config();
    cfg.levels.pop_back();
    CHECK_THROWS_AS(build_model(cfg), ValidationError);

    cfg = blinking_config();
    (*cfg.rates)(0, 1) = -2.0;
    CHECK_THROWS_WITH_AS(build_model(cfg), doctest::Contains("rates"),
                         ValidationError);

    cfg = blinking_config();
    cfg.levels[1].rabi = std::nan("");
    CHECK_THROWS_WITH_AS(build_model(cfg), doctest::Contains("rabi"),
                         ValidationError);
}

TEST_CASE("bath_generator columns sum to zero exactly") {
    SUBCASE("symmetric two-state") {
        BathProcess bath;
        bath.n_states = 2;
        bath.rates = Eigen::MatrixXd::Zero(2, 2);
        bath.rates(0, 1) = 0.7;
        bath.rates(1, 0) = 0.7;
        const auto gen = bath_generator(bath);
        CHECK(gen.w(0, 0) == -0.7);
        CHECK(gen.w(1, 0) == 0.7);
        CHECK(gen.w(0, 1) == 0.7);
        CHECK(gen.w(1, 1) == -0.7);
    }
    SUBCASE("single state") {
        BathProcess bath;
        bath.n_states = 1;
        bath.rates = Eigen::MatrixXd::Zero(1, 1);
        CHECK(bath_generator(bath).w(0, 0) == 0.0);
    }
    SUBCASE("blinking rates and random baths") {
        rng::Stream stream(2024, 0);
        for (int trial = 0; trial < 20; ++trial) {
            const Eigen::Index n = 2 + trial % 4;
            BathProcess bath;
            bath.n_states = n;
            bath.rates = Eigen::MatrixXd::Zero(n, n);
            for (Eigen::Index r = 0; r < n; ++r)
                for (Eigen::Index c = 0; c < n; ++c)
                    if (r != c) bath.rates(r, c) = stream.uniform() * 3.0;
            const auto gen = bath_generator(bath);
            for (Eigen::Index c = 0; c < n; ++c) {
                double offdiag = 0.0;
                for (Eigen::Index r = 0; r < n; ++r)
                    if (r != c) offdiag += gen.w(r, c);
                CHECK(offdiag + gen.w(c, c) == 0.0);
            }
        }
    }
}

TEST_CASE("stationary_populations") {
    SUBCASE("symmetric rates give the uniform distribution") {
        BathProcess bath;
        bath.n_states = 2;
        bath.rates = Eigen::MatrixXd::Zero(2, 2);
        bath.rates(0, 1) = 0.3;
        bath.rates(1, 0) = 0.3;
        const auto p = stationary_populations(bath_generator(bath));
        CHECK(std::abs(p(0) - 0.5) < 1e-12);
        CHECK(std::abs(p(1) - 0.5) < 1e-12);
    }
    SUBCASE("blinking rates give (1/3, 2/3)") {
        const auto m = build_model(blinking_config());
        const auto p = stationary_populations(bath_generator(m.bath));
        CHECK(std::abs(p(0) - 1.0 / 3.0) < 1e-12);
        CHECK(std::abs(p(1) - 2.0 / 3.0) < 1e-12);
    }
    SUBCASE("single state") {
        BathProcess bath;
        bath.n_states = 1;
        bath.rates = Eigen::MatrixXd::Zero(1, 1);
        CHECK(stationary_populations(bath_generator(bath))(0) == 1.0);
    }
    SUBCASE("disconnected bath is rejected") {
        BathProcess bath;
        bath.n_states = 4;
        bath.rates = Eigen::MatrixXd::Zero(4, 4);
        bath.rates(0, 1) = 1.0;
        bath.rates(1, 0) = 1.0;
        bath.rates(2, 3) = 1.0;
        bath.rates(3, 2) = 1.0;
        CHECK_THROWS_AS(stationary_populations(bath_generator(bath)),
                        NumericalError);
    }
    SUBCASE("random connected baths: residual and closed form") {
        rng::Stream stream(7, 0);
        for (int trial = 0; trial < 50; ++trial) {
            BathProcess bath;
            bath.n_states = 2;
            bath.rates = Eigen::MatrixXd::Zero(2, 2);
            const double pab = 0.01 + stream.uniform() * 2.0;
            const double pba = 0.01 + stream.uniform() * 2.0;
            bath.rates(0, 1) = pab;
            bath.rates(1, 0) = pba;
            const auto gen = bath_generator(bath);
            const auto p = stationary_populations(gen);
            CHECK((gen.w * p).norm() <= 1e-12 * gen.w.norm());
            CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
            CHECK(std::abs(p(0) - pab / (pab + pba)) < 1e-12);
        }
    }
}

TEST_CASE("rotating_frame_hamiltonian") {
    SUBCASE("resonance gives (Omega/2) sigma_x") {
        const auto h = rotating_frame_hamiltonian({2.0, 0.0, 1.0}, {0.0});
        CHECK(h(0, 0) == std::complex<double>(0.0));
        CHECK(h(0, 1) == std::complex<double>(0.5));
        CHECK(h(1, 0) == std::complex<double>(0.5));
    }
    SUBCASE("no drive gives -(delta/2) sigma_z") {
        const auto h = rotating_frame_hamiltonian({1.0, 0.3, 0.0}, {1.0});
        const double delta = 1.0 - 0.3;
        CHECK(std::abs(h(0, 0) - std::complex<double>(-delta / 2)) == 0.0);
        CHECK(std::abs(h(1, 1) - std::complex<double>(delta / 2)) == 0.0);
        CHECK(h(0, 1) == std::complex<double>(0.0));
    }
    SUBCASE("delta=1, Omega=2 matches the direct construction") {
        const auto h = rotating_frame_hamiltonian({1.0, 0.0, 2.0}, {1.0});
        CHECK(h(0, 0).real() == -0.5);
        CHECK(h(0, 1).real() == 1.0);
        CHECK(h(1, 0).real() == 1.0);
        CHECK(h(1, 1).real() == 0.5);
        // eigenvalues +-sqrt(delta^2 + Omega^2)/2 from the characteristic polynomial
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h);
        const double expected = 0.5 * std::sqrt(1.0 + 4.0);
        CHECK(std::abs(es.eigenvalues()(0) + expected) < 1e-14);
        CHECK(std::abs(es.eigenvalues()(1) - expected) < 1e-14);
    }
    SUBCASE("Hermitian to machine precision for random parameters") {
        rng::Stream stream(11, 0);
        for (int trial = 0; trial < 30; ++trial) {
            LevelParams lv{0.1 + stream.uniform() * 3.0, stream.uniform() - 0.5,
                           stream.uniform() * 2.0};
            DriveParams dr{stream.uniform() - 0.5};
            const auto h = rotating_frame_hamiltonian(lv, dr);
            CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() <= 1e-15);
        }
    }
}

TEST_CASE("JSON config round trip") {
    const std::string text = R"({
        "n_states": 2,
        "levels": [{"gamma": 2.5, "omega_shift": 0.0, "rabi": 1.0},
                   {"gamma": 0.5, "omega_shift": 0.0, "rabi": 1.0}],
        "omega_laser": 0.0,
        "rates": [[0.0, 4e-4], [8e-4, 0.0]],
        "alpha": 2.15
    })";
    const auto cfg = config::parse_config(text);
    const auto m = build_model(cfg);
    CHECK(m.n_states() == 2);
    CHECK(m.levels[1].gamma == 0.5);
    CHECK(m.bath.rates(1, 0) == 8e-4);
    CHECK(m.alpha.value() == 2.15);

    CHECK_THROWS_AS(config::parse_config("{"), ValidationError);
    CHECK_THROWS_WITH_AS(config::parse_config(R"({"n_states": 1})"),
                         doctest::Contains("levels"), ValidationError);
}
