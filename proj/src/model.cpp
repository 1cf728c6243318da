#include "jumpthermo/model.hpp"

#include <cmath>
#include <string>

#include <Eigen/SVD>

namespace jumpthermo::model {

namespace {

void require_finite(double x, const std::string& field) {
    if (!std::isfinite(x))
        throw ValidationError("model: non-finite value in " + field);
}

} // namespace

ModulatedFluorophore build_model(const ModelConfig& config) {
    if (config.n_states < 1)
        throw ValidationError("model: n_states must be >= 1");
    if (static_cast<Eigen::Index>(config.levels.size()) != config.n_states)
        throw ValidationError("model: levels length " +
                              std::to_string(config.levels.size()) +
                              " does not match n_states " +
                              std::to_string(config.n_states));

    for (std::size_t i = 0; i < config.levels.size(); ++i) {
        const auto& lv = config.levels[i];
        const std::string tag = "levels[" + std::to_string(i) + "].";
        require_finite(lv.gamma, tag + "gamma");
        require_finite(lv.omega, tag + "omega_shift");
        require_finite(lv.rabi, tag + "rabi");
        if (lv.gamma <= 0.0)
            throw ValidationError("model: " + tag + "gamma must be > 0");
        if (lv.rabi < 0.0)
            throw ValidationError("model: " + tag + "rabi must be >= 0");
    }
    require_finite(config.omega_laser, "omega_laser");
    if (config.alpha) {
        require_finite(*config.alpha, "alpha");
        if (*config.alpha < 0.0)
            throw ValidationError("model: alpha must be >= 0");
    }

    BathProcess bath;
    bath.n_states = config.n_states;
    if (config.rates) {
        if (config.rates->rows() != config.n_states ||
            config.rates->cols() != config.n_states)
            throw ValidationError("model: rates must be n_states x n_states");
        bath.rates = *config.rates;
        for (Eigen::Index r = 0; r < config.n_states; ++r)
            for (Eigen::Index c = 0; c < config.n_states; ++c) {
                if (r == c) continue; // diagonal ignored
                const double v = bath.rates(r, c);
                require_finite(v, "rates[" + std::to_string(r) + "][" +
                                      std::to_string(c) + "]");
                if (v < 0.0)
                    throw ValidationError("model: rates[" + std::to_string(r) +
                                          "][" + std::to_string(c) +
                                          "] must be >= 0");
            }
    } else {
        if (config.n_states != 1)
            throw ValidationError("model: rates required when n_states > 1");
        bath.rates = Eigen::MatrixXd::Zero(1, 1);
    }

    ModulatedFluorophore m;
    m.levels = config.levels;
    m.drive.omega_laser = config.omega_laser;
    m.bath = std::move(bath);
    m.alpha = config.alpha;
    return m;
}

BathGenerator bath_generator(const BathProcess& bath) {
    const Eigen::Index n = bath.n_states;
    BathGenerator gen;
    gen.w = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index src = 0; src < n; ++src) {
        double outflow = 0.0;
        for (Eigen::Index dst = 0; dst < n; ++dst) {
            if (dst == src) continue;
            gen.w(dst, src) = bath.rates(dst, src);
            outflow += bath.rates(dst, src);
        }
        gen.w(src, src) = -outflow;
    }
    return gen;
}

Eigen::VectorXd stationary_populations(const BathGenerator& gen) {
    const Eigen::Index n = gen.w.rows();
    if (n == 1) return Eigen::VectorXd::Ones(1);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gen.w, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double scale = sv(0);
    if (scale > 0.0 && sv(n - 2) < 1e-10 * scale)
        throw NumericalError(
            "stationary_populations: bath generator zero mode is degenerate "
            "(disconnected bath?)");
    if (scale == 0.0)
        throw NumericalError(
            "stationary_populations: all hopping rates vanish with n_states > 1");

    Eigen::VectorXd p = svd.matrixV().col(n - 1);
    if (p.sum() < 0.0) p = -p;
    double min_entry = p.minCoeff();
    if (min_entry < -1e-10 * p.cwiseAbs().maxCoeff())
        throw NumericalError(
            "stationary_populations: null vector has significant negative entries");
    p = p.cwiseMax(0.0);
    p /= p.sum();
    return p;
}

Eigen::Matrix2cd rotating_frame_hamiltonian(const LevelParams& level,
                                            const DriveParams& drive) {
    const double delta = drive.omega_laser - level.omega;
    Eigen::Matrix2cd h;
    h << -0.5 * delta, 0.5 * level.rabi,
         0.5 * level.rabi, 0.5 * delta;
    return h;
}

} // namespace jumpthermo::model
