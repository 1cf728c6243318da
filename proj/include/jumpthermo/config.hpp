// config.hpp — JSON configuration loading for the model layer.
//
// Schema (all numbers dimensionless in units of the reference Rabi frequency):
// {
//   "n_states":    integer >= 1,
//   "levels":      [{"gamma": g, "omega_shift": w, "rabi": o}, ...],
//   "omega_laser": w_L,
//   "rates":       row-major n_states x n_states array, rates[R][R'] = phi_{RR'}
//                  (optional when n_states == 1),
//   "alpha":       optional slow-modulation fit parameter
// }

#pragma once

#include <string>

#include "jumpthermo/model.hpp"

namespace jumpthermo::config {

// Parse a configuration from JSON text. Throws ValidationError on schema
// violations, with the offending key in the message.
model::ModelConfig parse_config(const std::string& json_text);

// Read and parse a configuration file.
model::ModelConfig load_config(const std::string& path);

// Convenience: load, validate, and build the model in one step.
model::ModulatedFluorophore load_model(const std::string& path);

} // namespace jumpthermo::config
