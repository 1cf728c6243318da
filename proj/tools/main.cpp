// jumpthermo CLI — parameter sweeps, figure-data regeneration, Monte Carlo
// runs, and machine-readable outputs. Every output file is accompanied by a
// <file>.manifest.json run manifest.

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jumpthermo/analytic.hpp"
#include "jumpthermo/common.hpp"
#include "jumpthermo/config.hpp"
#include "jumpthermo/counting.hpp"
#include "jumpthermo/liouville.hpp"
#include "jumpthermo/trajectory.hpp"

namespace {

using nlohmann::ordered_json;
namespace jt = jumpthermo;

// Shortest round-trip decimal representation.
std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&tt));
    return buf;
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

void write_csv(const std::string& path, const Csv& csv) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw jt::ValidationError("cannot open output file '" + path + "'");
    for (std::size_t i = 0; i < csv.header.size(); ++i)
        out << (i ? "," : "") << csv.header[i];
    out << '\n';
    for (const auto& row : csv.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << fmt(row[i]);
        out << '\n';
    }
}

void write_json(const std::string& path, const ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw jt::ValidationError("cannot open output file '" + path + "'");
    out << j.dump(2) << '\n';
}

void write_manifest(const std::string& output_path, const std::string& command,
                    const std::string& config_path, const ordered_json& params,
                    std::optional<std::uint64_t> seed = {}) {
    ordered_json m;
    m["command"] = command;
    m["config"] = config_path;
    m["parameters"] = params;
    if (seed) m["seed"] = *seed;
    m["version"] = jt::kVersion;
    m["output"] = output_path;
    m["written_at"] = now_iso8601();
    write_json(output_path + ".manifest.json", m);
}

std::vector<double> linspace(double lo, double hi, int points) {
    if (points < 2) return {lo};
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    return g;
}

unsigned resolve_cli_threads(unsigned flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("JUMPTHERMO_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 0; // auto
}

// ---------------------------------------------------------------------------

struct CommonArgs {
    std::string config;
    std::string out;
    unsigned threads = 0;
};

int cmd_theta(const CommonArgs& c, double s_min, double s_max, int points, double h) {
    const auto m = jt::config::load_model(c.config);
    const auto grid = linspace(s_min, s_max, points);
    const auto outcome = jt::liouville::sweep(m, grid, resolve_cli_threads(c.threads), h);
    if (!outcome.errors.empty())
        throw jt::NumericalError("sweep failed at s = " +
                                 fmt(outcome.errors.front().s) + ": " +
                                 outcome.errors.front().message);
    Csv csv;
    csv.header = {"s", "theta", "mean", "variance"};
    for (Eigen::Index r = 0; r < m.n_states(); ++r)
        csv.header.push_back("pop_" + std::to_string(r + 1));
    for (const auto& pt : outcome.points) {
        std::vector<double> row{pt.s, pt.theta, pt.mean, pt.variance};
        for (Eigen::Index r = 0; r < pt.pops.size(); ++r) row.push_back(pt.pops(r));
        csv.rows.push_back(std::move(row));
    }
    write_csv(c.out, csv);
    write_manifest(c.out, "theta", c.config,
                   {{"s_min", s_min}, {"s_max", s_max}, {"points", points}, {"h", h}});
    return 0;
}

int cmd_fast_limit(const CommonArgs& c, double s_min, double s_max, int points) {
    const auto m = jt::config::load_model(c.config);
    const auto avg = jt::analytic::averaged_parameters(m);
    const auto grid = linspace(s_min, s_max, points);
    const auto outcome = jt::liouville::sweep(m, grid, resolve_cli_threads(c.threads));
    if (!outcome.errors.empty())
        throw jt::NumericalError("sweep failed at s = " +
                                 fmt(outcome.errors.front().s));
    Csv csv;
    csv.header = {"s", "theta_full", "mean_full", "variance_full", "fano_full",
                  "theta_markov", "mean_markov", "variance_markov", "fano_markov"};
    for (const auto& pt : outcome.points) {
        const auto mk = jt::analytic::markov_cumulants(avg.gamma, avg.rabi, pt.s);
        csv.rows.push_back({pt.s, pt.theta, pt.mean, pt.variance,
                            pt.variance / pt.mean, mk.theta, mk.mean, mk.variance,
                            mk.variance / mk.mean});
    }
    write_csv(c.out, csv);
    write_manifest(c.out, "fast-limit", c.config,
                   {{"s_min", s_min}, {"s_max", s_max}, {"points", points},
                    {"gamma_avg", avg.gamma}, {"rabi_avg", avg.rabi}});
    return 0;
}

int cmd_slow_limit(const CommonArgs& c, double s_min, double s_max, int points,
                   const std::string& report_path) {
    const auto m = jt::config::load_model(c.config);
    const auto sm = jt::analytic::slow_mod_params(m);
    const auto peak = jt::analytic::peak_scaling(m);
    const auto grid = linspace(s_min, s_max, points);
    const auto outcome = jt::liouville::sweep(m, grid, resolve_cli_threads(c.threads));
    if (!outcome.errors.empty())
        throw jt::NumericalError("sweep failed at s = " +
                                 fmt(outcome.errors.front().s));

    Csv csv;
    csv.header = {"s", "theta", "mean_numeric", "variance_numeric",
                  "mean_slow", "variance_slow", "pop_a_numeric", "pop_a_slow"};
    for (const auto& pt : outcome.points) {
        const auto [mean_s, var_s] = jt::analytic::slow_cumulants(m, pt.s);
        csv.rows.push_back({pt.s, pt.theta, pt.mean, pt.variance, mean_s, var_s,
                            pt.pops(sm.label_a), sm.pop_a(pt.s)});
    }
    write_csv(c.out, csv);
    const ordered_json params{{"s_min", s_min}, {"s_max", s_max}, {"points", points}};
    write_manifest(c.out, "slow-limit", c.config, params);

    // numeric peak location from the sweep
    double peak_s = grid.front(), peak_var = -1.0;
    for (const auto& pt : outcome.points)
        if (pt.variance > peak_var) { peak_var = pt.variance; peak_s = pt.s; }

    ordered_json report;
    report["s_p"] = sm.s_p;
    report["peak_height"] = peak.height;
    report["peak_width"] = peak.width;
    report["mean_at_peak"] = peak.mean_at_peak;
    report["eps0"] = sm.eps0;
    report["d_eps"] = sm.d_eps;
    report["alpha"] = sm.alpha;
    report["phi_tot"] = sm.phi_tot;
    report["numeric_peak_s"] = peak_s;
    report["numeric_peak_variance"] = peak_var;
    write_json(report_path, report);
    write_manifest(report_path, "slow-limit", c.config, params);
    return 0;
}

int cmd_distribution(const CommonArgs& c, std::vector<double> s_values,
                     std::optional<double> n_min, std::optional<double> n_max,
                     int points) {
    const auto m = jt::config::load_model(c.config);
    if (s_values.empty()) s_values = {jt::analytic::slow_mod_params(m).s_p};

    Csv csv;
    csv.header = {"s", "N", "density"};
    for (double s : s_values) {
        const auto dg = jt::analytic::double_gaussian(m, s);
        const double sd = std::sqrt(std::max(dg.var_a, dg.var_b));
        const double lo = n_min.value_or(std::min(dg.mean_a, dg.mean_b) - 8.0 * sd);
        const double hi = n_max.value_or(std::max(dg.mean_a, dg.mean_b) + 8.0 * sd);
        for (double n : linspace(lo, hi, points))
            csv.rows.push_back({s, n, dg.density(n)});
    }
    write_csv(c.out, csv);
    ordered_json params;
    params["s"] = s_values;
    params["points"] = points;
    write_manifest(c.out, "distribution", c.config, params);
    return 0;
}

int cmd_counting(const CommonArgs& c, double t, std::vector<double> s_values,
                 double tail_tol, const std::string& init_name,
                 const std::string& summary_path) {
    const auto m = jt::config::load_model(c.config);
    const auto init = init_name == "ground"
                          ? jt::counting::InitialCondition::Ground
                          : jt::counting::InitialCondition::Stationary;
    if (s_values.empty()) s_values = {0.0};
    const auto dist = jt::counting::integrate_hierarchy(m, t, tail_tol, init);

    Csv csv;
    csv.header = {"n", "P"};
    for (double s : s_values) csv.header.push_back("q_s" + fmt(s));
    std::vector<jt::counting::SEnsembleStats> stats;
    stats.reserve(s_values.size());
    for (double s : s_values) stats.push_back(jt::counting::s_ensemble(dist, s));
    for (std::size_t n = 0; n < dist.probs.size(); ++n) {
        std::vector<double> row{static_cast<double>(n), dist.probs[n]};
        for (const auto& st : stats) row.push_back(st.q[n]);
        csv.rows.push_back(std::move(row));
    }
    write_csv(c.out, csv);
    const ordered_json params{{"t", t}, {"tail_tol", tail_tol}, {"init", init_name}};
    write_manifest(c.out, "counting", c.config, params);

    ordered_json summary;
    summary["t"] = t;
    summary["tail_mass"] = dist.tail_mass;
    summary["n_max"] = dist.probs.size() - 1;
    ordered_json entries = ordered_json::array();
    for (const auto& st : stats) {
        const auto gen = jt::counting::integrate_generating(m, st.s, t, init);
        ordered_json e;
        e["s"] = st.s;
        e["Z"] = st.z;
        e["Z_generating"] = gen.z;
        e["entropy"] = st.entropy;
        e["internal_energy"] = st.internal_energy;
        e["particle_number"] = st.particle_number;
        e["grand_potential"] = st.grand_potential;
        e["grand_relation_residual"] = st.residual;
        entries.push_back(std::move(e));
    }
    summary["s_ensemble"] = std::move(entries);
    write_json(summary_path, summary);
    write_manifest(summary_path, "counting", c.config, params);
    return 0;
}

int cmd_simulate(const CommonArgs& c, std::int64_t n_traj, double t_max,
                 std::uint64_t seed, const std::string& mode, bool cold_start,
                 const std::string& dump_path,
                 const std::vector<double>& checkpoints) {
    const auto m = jt::config::load_model(c.config);
    jt::trajectory::SimOptions opts;
    opts.threads = resolve_cli_threads(c.threads);
    opts.cold_start = cold_start;
    opts.keep_records = !dump_path.empty();
    opts.checkpoints = checkpoints;

    const auto result =
        mode == "doubly-stochastic"
            ? jt::trajectory::doubly_stochastic_sample(m, n_traj, t_max, seed, opts)
            : jt::trajectory::simulate_ensemble(m, n_traj, t_max, seed, opts);

    ordered_json j;
    j["mode"] = mode;
    j["n_traj"] = result.stats.n_traj;
    j["t_max"] = result.stats.t;
    j["seed"] = seed;
    j["mean_rate"] = result.stats.mean_rate;
    j["var_rate"] = result.stats.var_rate;
    j["stderr_mean"] = result.stats.stderr_mean;
    j["stderr_var"] = result.stats.stderr_var;
    j["renormalizations"] = result.renormalizations;
    ordered_json hist = ordered_json::array();
    for (const auto& [n, count] : result.stats.empirical_p)
        hist.push_back(ordered_json::array({n, count}));
    j["empirical_p"] = std::move(hist);
    if (!result.checkpoints.empty()) {
        ordered_json cps = ordered_json::array();
        for (const auto& cp : result.checkpoints) {
            ordered_json e;
            e["t"] = cp.t;
            ordered_json blocks = ordered_json::array();
            for (std::size_t r = 0; r < cp.mean_blocks.size(); ++r) {
                const auto& b = cp.mean_blocks[r];
                blocks.push_back(ordered_json::array(
                    {b(0, 0).real(), b(0, 1).real(), b(0, 1).imag(), b(1, 1).real()}));
            }
            e["mean_blocks"] = std::move(blocks);
            cps.push_back(std::move(e));
        }
        j["checkpoints"] = std::move(cps);
    }
    write_json(c.out, j);
    write_manifest(c.out, "simulate", c.config,
                   {{"n_traj", n_traj}, {"t_max", t_max}, {"mode", mode},
                    {"cold_start", cold_start}},
                   seed);
    if (!dump_path.empty()) {
        jt::trajectory::dump_records(result.records, dump_path);
        write_manifest(dump_path, "simulate", c.config,
                       {{"n_traj", n_traj}, {"t_max", t_max}, {"mode", mode}}, seed);
    }
    return 0;
}

int cmd_rate_function(const CommonArgs& c, double s_min, double s_max, int points,
                      std::optional<double> n_min, std::optional<double> n_max,
                      int n_points) {
    const auto m = jt::config::load_model(c.config);
    const auto grid = linspace(s_min, s_max, points);
    const auto outcome = jt::liouville::sweep(m, grid, resolve_cli_threads(c.threads));
    if (!outcome.errors.empty())
        throw jt::NumericalError("sweep failed at s = " +
                                 fmt(outcome.errors.front().s));
    std::vector<double> s_samples, theta_samples, means;
    for (const auto& pt : outcome.points) {
        s_samples.push_back(pt.s);
        theta_samples.push_back(pt.theta);
        means.push_back(pt.mean);
    }
    // default N range: interior of the attained mean rates
    const auto [mn, mx] = std::minmax_element(means.begin(), means.end());
    const double lo = n_min.value_or(*mn + 0.02 * (*mx - *mn));
    const double hi = n_max.value_or(*mx - 0.02 * (*mx - *mn));
    const auto n_grid = linspace(lo, hi, n_points);
    const auto pts = jt::analytic::rate_function(s_samples, theta_samples, n_grid);

    Csv csv;
    csv.header = {"N", "phi", "s_star", "boundary"};
    for (const auto& pt : pts)
        csv.rows.push_back({pt.n, pt.phi, pt.s_star, pt.boundary ? 1.0 : 0.0});
    write_csv(c.out, csv);
    write_manifest(c.out, "rate-function", c.config,
                   {{"s_min", s_min}, {"s_max", s_max}, {"points", points},
                    {"n_min", lo}, {"n_max", hi}, {"n_points", n_points}});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Large-deviation thermodynamics of photon-counting trajectories "
                 "for a classically modulated two-level fluorophore"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&](CLI::App* sub, const std::string& default_out) {
        sub->add_option("--config", common.config, "model configuration (JSON)")
            ->required();
        sub->add_option("--out", common.out, "output file")->default_val(default_out);
        sub->add_option("--threads", common.threads,
                        "worker threads (0 = auto; env JUMPTHERMO_THREADS)");
    };

    double s_min = -1.0, s_max = 1.0, h = jumpthermo::liouville::kDefaultStep;
    int points = 201;
    auto* theta_cmd = app.add_subcommand("theta", "sweep the grand potential");
    add_common(theta_cmd, "theta.csv");
    theta_cmd->add_option("--s-min", s_min);
    theta_cmd->add_option("--s-max", s_max);
    theta_cmd->add_option("--points", points);
    theta_cmd->add_option("--step", h, "cumulant differentiation step");

    double f_s_min = -2.0, f_s_max = 3.0;
    int f_points = 101;
    auto* fast_cmd =
        app.add_subcommand("fast-limit", "full model vs averaged Markov system");
    add_common(fast_cmd, "fast_limit.csv");
    fast_cmd->add_option("--s-min", f_s_min);
    fast_cmd->add_option("--s-max", f_s_max);
    fast_cmd->add_option("--points", f_points);

    double sl_s_min = -0.03, sl_s_max = 0.02;
    int sl_points = 400;
    std::string report_path = "slow_limit_report.json";
    auto* slow_cmd = app.add_subcommand(
        "slow-limit", "numeric vs stochastic approximation, with peak scaling");
    add_common(slow_cmd, "slow_limit.csv");
    slow_cmd->add_option("--s-min", sl_s_min);
    slow_cmd->add_option("--s-max", sl_s_max);
    slow_cmd->add_option("--points", sl_points);
    slow_cmd->add_option("--report", report_path, "peak-scaling report (JSON)");

    std::vector<double> dist_s;
    std::optional<double> dist_n_min, dist_n_max;
    int dist_points = 400;
    auto* dist_cmd =
        app.add_subcommand("distribution", "double-Gaussian P(N) samples");
    add_common(dist_cmd, "distribution.csv");
    dist_cmd->add_option("--s", dist_s, "s values (repeatable)");
    dist_cmd->add_option("--n-min", dist_n_min);
    dist_cmd->add_option("--n-max", dist_n_max);
    dist_cmd->add_option("--points", dist_points);

    double count_t = 0.0, tail_tol = 1e-8;
    std::vector<double> count_s;
    std::string init_name = "stationary", summary_path = "counting_summary.json";
    auto* count_cmd =
        app.add_subcommand("counting", "finite-time P_n and the s-ensemble");
    add_common(count_cmd, "counting.csv");
    count_cmd->add_option("--t", count_t, "evaluation time")->required();
    count_cmd->add_option("--s", count_s, "s values (repeatable)");
    count_cmd->add_option("--tail-tol", tail_tol);
    count_cmd->add_option("--init", init_name)
        ->check(CLI::IsMember({"stationary", "ground"}));
    count_cmd->add_option("--summary", summary_path, "summary output (JSON)");

    std::int64_t n_traj = 0;
    double t_max = 0.0;
    std::uint64_t seed = 1;
    std::string mode = "jump", dump_path;
    bool cold_start = false;
    std::vector<double> checkpoints;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo ensemble");
    add_common(sim_cmd, "stats.json");
    sim_cmd->add_option("--trajectories", n_traj)->required();
    sim_cmd->add_option("--t-max", t_max)->required();
    sim_cmd->add_option("--seed", seed);
    sim_cmd->add_option("--mode", mode)
        ->check(CLI::IsMember({"jump", "doubly-stochastic"}));
    sim_cmd->add_flag("--cold-start", cold_start,
                      "start from the ground state instead of stationarity");
    sim_cmd->add_option("--dump-records", dump_path,
                        "write line-delimited trajectory records");
    sim_cmd->add_option("--checkpoints", checkpoints,
                        "record ensemble-averaged states at these times");

    double rf_s_min = -2.0, rf_s_max = 3.0;
    int rf_points = 601, rf_n_points = 101;
    std::optional<double> rf_n_min, rf_n_max;
    auto* rf_cmd =
        app.add_subcommand("rate-function", "Legendre-Fenchel rate function");
    add_common(rf_cmd, "rate_function.csv");
    rf_cmd->add_option("--s-min", rf_s_min);
    rf_cmd->add_option("--s-max", rf_s_max);
    rf_cmd->add_option("--points", rf_points);
    rf_cmd->add_option("--n-min", rf_n_min);
    rf_cmd->add_option("--n-max", rf_n_max);
    rf_cmd->add_option("--n-points", rf_n_points);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        ordered_json err{{"error", "usage"}, {"message", e.what()}};
        std::cerr << err.dump() << '\n';
        return e.get_exit_code();
    }

    try {
        if (theta_cmd->parsed())
            return cmd_theta(common, s_min, s_max, points, h);
        if (fast_cmd->parsed())
            return cmd_fast_limit(common, f_s_min, f_s_max, f_points);
        if (slow_cmd->parsed())
            return cmd_slow_limit(common, sl_s_min, sl_s_max, sl_points, report_path);
        if (dist_cmd->parsed())
            return cmd_distribution(common, dist_s, dist_n_min, dist_n_max,
                                    dist_points);
        if (count_cmd->parsed())
            return cmd_counting(common, count_t, count_s, tail_tol, init_name,
                                summary_path);
        if (sim_cmd->parsed())
            return cmd_simulate(common, n_traj, t_max, seed, mode, cold_start,
                                dump_path, checkpoints);
        if (rf_cmd->parsed())
            return cmd_rate_function(common, rf_s_min, rf_s_max, rf_points,
                                     rf_n_min, rf_n_max, rf_n_points);
    } catch (const jumpthermo::ValidationError& e) {
        ordered_json err{{"error", "validation"}, {"message", e.what()}};
        std::cerr << err.dump() << '\n';
        return 2;
    } catch (const jumpthermo::NumericalError& e) {
        ordered_json err{{"error", "numerical"}, {"message", e.what()}};
        std::cerr << err.dump() << '\n';
        return 3;
    } catch (const std::exception& e) {
        ordered_json err{{"error", "internal"}, {"message", e.what()}};
        std::cerr << err.dump() << '\n';
        return 4;
    }
    return 0;
}
