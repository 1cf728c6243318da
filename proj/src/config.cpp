#include "jumpthermo/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace jumpthermo::config {

namespace {

using nlohmann::json;

double number_at(const json& j, const std::string& key) {
    if (!j.contains(key))
        throw ValidationError("config: missing key '" + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number())
        throw ValidationError("config: '" + key + "' must be a number");
    return v.get<double>();
}

} // namespace

model::ModelConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }

    model::ModelConfig cfg;
    if (!j.contains("n_states") || !j.at("n_states").is_number_integer())
        throw ValidationError("config: 'n_states' must be an integer");
    cfg.n_states = j.at("n_states").get<Eigen::Index>();

    if (!j.contains("levels") || !j.at("levels").is_array())
        throw ValidationError("config: 'levels' must be an array");
    for (std::size_t i = 0; i < j.at("levels").size(); ++i) {
        const auto& lj = j.at("levels")[i];
        if (!lj.is_object())
            throw ValidationError("config: levels[" + std::to_string(i) +
                                  "] must be an object");
        model::LevelParams lv;
        lv.gamma = number_at(lj, "gamma");
        lv.omega = number_at(lj, "omega_shift");
        lv.rabi = number_at(lj, "rabi");
        cfg.levels.push_back(lv);
    }

    cfg.omega_laser = number_at(j, "omega_laser");

    if (j.contains("rates")) {
        const auto& rj = j.at("rates");
        if (!rj.is_array())
            throw ValidationError("config: 'rates' must be an array of rows");
        const auto n = static_cast<Eigen::Index>(rj.size());
        Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto& row = rj[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
                throw ValidationError("config: 'rates' must be square");
            for (Eigen::Index c = 0; c < n; ++c) {
                const auto& v = row[static_cast<std::size_t>(c)];
                if (!v.is_number())
                    throw ValidationError("config: rates[" + std::to_string(r) +
                                          "][" + std::to_string(c) +
                                          "] must be a number");
                rates(r, c) = v.get<double>();
            }
        }
        cfg.rates = std::move(rates);
    }

    if (j.contains("alpha")) cfg.alpha = number_at(j, "alpha");
    return cfg;
}

model::ModelConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

model::ModulatedFluorophore load_model(const std::string& path) {
    return model::build_model(load_config(path));
}

} // namespace jumpthermo::config
