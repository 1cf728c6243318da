#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "jumpthermo/analytic.hpp"
#include "jumpthermo/counting.hpp"
#include "jumpthermo/liouville.hpp"
#include "jumpthermo/trajectory.hpp"

using namespace jumpthermo;
using namespace jumpthermo::trajectory;
using jt_test::blinking_model;
using jt_test::fast_model;
using jt_test::markov_model;

namespace {

model::ModulatedFluorophore moderate_model() {
    model::ModelConfig cfg;
    cfg.n_states = 2;
    cfg.levels = {{2.5, 0.0, 1.0}, {0.5, 0.0, 1.0}};
    cfg.omega_laser = 0.0;
    Eigen::MatrixXd rates(2, 2);
    rates << 0.0, 0.3,
             0.15, 0.0;
    cfg.rates = rates;
    return model::build_model(cfg);
}

} // namespace

TEST_CASE("no drive means no emissions") {
    model::ModelConfig cfg;
    cfg.n_states = 2;
    cfg.levels = {{1.0, 0.0, 0.0}, {2.0, 0.0, 0.0}};
    cfg.omega_laser = 0.0;
    Eigen::MatrixXd rates(2, 2);
    rates << 0.0, 0.4,
             0.4, 0.0;
    cfg.rates = rates;
    const auto m = model::build_model(cfg);

    SimOptions opts;
    opts.keep_records = true;
    const auto result = simulate_ensemble(m, 50, 100.0, 5, opts);
    for (auto n : result.counts) CHECK(n == 0);
    CHECK(result.stats.mean_rate == 0.0);
    // bath jumps still happen
    bool saw_bath_jump = false;
    for (const auto& rec : result.records)
        for (const auto& ev : rec.events)
            if (ev.kind == EventKind::BathJump) saw_bath_jump = true;
    CHECK(saw_bath_jump);
}

TEST_CASE("single-state scale-invariant statistics") {
    const auto m = markov_model(2.0);
    SimOptions opts;
    opts.threads = 2;
    const auto result = simulate_ensemble(m, 2000, 300.0, 20250731, opts);
    CHECK(std::abs(result.stats.mean_rate - 1.0 / 3.0) <=
          3.0 * result.stats.stderr_mean);
    CHECK(std::abs(result.stats.var_rate - 1.0 / 9.0) <=
          3.0 * result.stats.stderr_var);
    CHECK(result.renormalizations == 0);
    std::uint64_t hist_total = 0;
    for (const auto& [n, c] : result.stats.empirical_p) hist_total += c;
    CHECK(hist_total == 2000);
}

TEST_CASE("ensemble averages match the master equation at checkpoints") {
    const auto m = moderate_model();
    SimOptions opts;
    opts.threads = 2;
    opts.cold_start = true;
    opts.checkpoints = {1.0, 3.0, 6.0, 10.0, 15.0};
    const auto result = simulate_ensemble(m, 10000, 15.0, 99, opts);

    const auto init = counting::initial_blocks(m, counting::InitialCondition::Ground);
    const auto exact = counting::integrate_master(m, init, opts.checkpoints);

    REQUIRE(result.checkpoints.size() == 5);
    for (std::size_t c = 0; c < 5; ++c) {
        for (Eigen::Index r = 0; r < 2; ++r) {
            const auto& mc = result.checkpoints[c].mean_blocks[static_cast<std::size_t>(r)];
            const auto& ex = exact[c][static_cast<std::size_t>(r)];
            const auto& se = result.checkpoints[c].stderr_coords[static_cast<std::size_t>(r)];
            const double coords_mc[4] = {mc(0, 0).real(), mc(0, 1).real(),
                                         mc(0, 1).imag(), mc(1, 1).real()};
            const double coords_ex[4] = {ex(0, 0).real(), ex(0, 1).real(),
                                         ex(0, 1).imag(), ex(1, 1).real()};
            for (int j = 0; j < 4; ++j)
                CHECK(std::abs(coords_mc[j] - coords_ex[j]) <=
                      3.0 * se(j) + 1e-6);
        }
    }
}

TEST_CASE("bit-identical results for any thread count") {
    const auto m = moderate_model();
    SimOptions a_opts, b_opts;
    a_opts.threads = 1;
    b_opts.threads = 4;
    a_opts.checkpoints = b_opts.checkpoints = {2.0, 5.0};
    a_opts.keep_records = b_opts.keep_records = true;
    const auto a = simulate_ensemble(m, 200, 20.0, 777, a_opts);
    const auto b = simulate_ensemble(m, 200, 20.0, 777, b_opts);

    REQUIRE(a.counts.size() == b.counts.size());
    for (std::size_t k = 0; k < a.counts.size(); ++k)
        CHECK(a.counts[k] == b.counts[k]);
    CHECK(a.stats.mean_rate == b.stats.mean_rate);
    CHECK(a.stats.var_rate == b.stats.var_rate);
    CHECK(a.stats.stderr_mean == b.stats.stderr_mean);
    for (std::size_t c = 0; c < a.checkpoints.size(); ++c)
        for (Eigen::Index r = 0; r < 2; ++r)
            CHECK((a.checkpoints[c].mean_blocks[static_cast<std::size_t>(r)] -
                   b.checkpoints[c].mean_blocks[static_cast<std::size_t>(r)])
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        REQUIRE(a.records[k].events.size() == b.records[k].events.size());
        for (std::size_t e = 0; e < a.records[k].events.size(); ++e)
            CHECK(a.records[k].events[e].t == b.records[k].events[e].t);
    }
}

TEST_CASE("records are well-formed and dump with a stable schema") {
    const auto m = moderate_model();
    SimOptions opts;
    opts.keep_records = true;
    const auto result = simulate_ensemble(m, 20, 30.0, 4242, opts);

    for (const auto& rec : result.records) {
        CHECK(rec.t_final == 30.0);
        double prev = 0.0;
        std::uint64_t emissions = 0;
        for (const auto& ev : rec.events) {
            CHECK(ev.t > prev);
            CHECK(ev.t <= rec.t_final);
            prev = ev.t;
            if (ev.kind == EventKind::Emission) ++emissions;
        }
        CHECK(emissions == rec.n_emissions);
        double occ = 0.0;
        for (double o : rec.bath_occupation) occ += o;
        CHECK(std::abs(occ - rec.t_final) <= 1e-9 * rec.t_final);
    }

    const std::string path = "records_test.jsonl";
    dump_records(result.records, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        if (lines == 0) {
            CHECK(line.rfind("{\"seed\":", 0) == 0);
            CHECK(line.find("\"events\":") != std::string::npos);
        }
        ++lines;
    }
    CHECK(lines == result.records.size());
    std::remove(path.c_str());
}

TEST_CASE("doubly stochastic sampler") {
    SUBCASE("without modulation it matches the single-state sampler") {
        const auto m = markov_model(2.0);
        SimOptions opts;
        opts.threads = 2;
        const auto direct = simulate_ensemble(m, 500, 200.0, 11, opts);
        const auto doubly = doubly_stochastic_sample(m, 500, 200.0, 12, opts);
        const double joint = std::hypot(direct.stats.stderr_mean,
                                        doubly.stats.stderr_mean);
        CHECK(std::abs(direct.stats.mean_rate - doubly.stats.mean_rate) <=
              3.0 * joint);
        CHECK(std::abs(direct.stats.mean_rate - 1.0 / 3.0) <=
              3.0 * direct.stats.stderr_mean);
        CHECK(std::abs(doubly.stats.mean_rate - 1.0 / 3.0) <=
              3.0 * doubly.stats.stderr_mean);
    }
    SUBCASE("blinking model mean matches the weighted intensities") {
        const auto m = blinking_model();
        SimOptions opts;
        opts.threads = 2;
        const auto result = doubly_stochastic_sample(m, 150, 5000.0, 31, opts);
        double oracle = 0.0;
        const auto pops =
            model::stationary_populations(model::bath_generator(m.bath));
        for (int r = 0; r < 2; ++r)
            oracle += pops(r) * analytic::intensity_and_mandel(
                                    m.levels[static_cast<std::size_t>(r)], m.drive)
                                    .intensity;
        CHECK(std::abs(result.stats.mean_rate - oracle) <=
              3.0 * result.stats.stderr_mean);
    }
    SUBCASE("equal intensities suppress the cross term") {
        const auto m = fast_model(1.5, 1.5, 0.05);
        SimOptions opts;
        opts.threads = 2;
        const auto result = doubly_stochastic_sample(m, 800, 500.0, 77, opts);
        const double mandel =
            analytic::intensity_and_mandel({1.5, 0.0, 1.0}, {0.0}).mandel_variance;
        CHECK(std::abs(result.stats.var_rate - mandel) <=
              3.0 * result.stats.stderr_var);
    }
}

TEST_CASE("empirical_partition") {
    SUBCASE("s = 0 is exactly one") {
        const std::vector<std::uint64_t> counts{3, 7, 1, 0, 12};
        const auto est = empirical_partition(counts, 0.0);
        CHECK(est.z == 1.0);
        CHECK(est.z_stderr == 0.0);
    }
    SUBCASE("single record") {
        const std::vector<std::uint64_t> counts{3};
        const auto est = empirical_partition(counts, 0.4);
        CHECK(est.z == doctest::Approx(std::exp(-1.2)).epsilon(1e-15));
    }
    SUBCASE("empty record set is rejected") {
        CHECK_THROWS_AS(empirical_partition(std::vector<std::uint64_t>{}, 0.1),
                        ValidationError);
    }
    SUBCASE("fast-limit estimate brackets the spectral grand potential") {
        const auto m = fast_model(2.0, 3.0, 10.0);
        const double t = 200.0;
        SimOptions opts;
        opts.threads = 2;
        const auto result = simulate_ensemble(m, 1200, t, 2026, opts);
        for (double s : {0.25, 0.5}) {
            const auto est = empirical_partition(result.counts, s);
            const double theta_ref = liouville::theta(m, s);
            const double band = 3.0 * est.z_stderr / est.z / t + 2e-4;
            CHECK(std::abs(-est.log_z / t - theta_ref) <= band);
        }
    }
    SUBCASE("record overload enforces a common evaluation time") {
        const auto m = markov_model(2.0);
        SimOptions opts;
        opts.keep_records = true;
        const auto result = simulate_ensemble(m, 10, 5.0, 1, opts);
        CHECK_NOTHROW(empirical_partition(result.records, 0.1, 5.0));
        CHECK_THROWS_AS(empirical_partition(result.records, 0.1, 6.0),
                        ValidationError);
    }
}

TEST_CASE("weak-drive waiting statistics approach the closed-form intensity") {
    const auto m = markov_model(1.0, 0.2);
    SimOptions opts;
    opts.threads = 2;
    const auto result = simulate_ensemble(m, 300, 3000.0, 8, opts);
    const double intensity =
        analytic::intensity_and_mandel({1.0, 0.0, 0.2}, {0.0}).intensity;
    CHECK(std::abs(result.stats.mean_rate - intensity) <=
          3.0 * result.stats.stderr_mean);
}

TEST_CASE("input validation") {
    const auto m = markov_model(2.0);
    CHECK_THROWS_AS(simulate_ensemble(m, 0, 1.0, 1), ValidationError);
    CHECK_THROWS_AS(simulate_ensemble(m, 1, -1.0, 1), ValidationError);
    SimOptions opts;
    opts.checkpoints = {2.0, 1.0};
    CHECK_THROWS_AS(simulate_ensemble(m, 1, 5.0, 1, opts), ValidationError);
    opts.checkpoints = {0.0};
    CHECK_THROWS_AS(simulate_ensemble(m, 1, 5.0, 1, opts), ValidationError);
}
