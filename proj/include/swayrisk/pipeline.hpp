#pragma once

// Coarse end-to-end steps behind the C API and the CLI. Each takes a JSON
// config, rejects unknown keys, fills defaults, writes its outputs plus
// run_config.json (the resolved config) under config["output"], and returns
// a JSON summary whose "config" member is that resolved config.

#include <nlohmann/json.hpp>

namespace swayrisk::pipeline {

/// Treadmill or scene trials into <output>/trials/<id>/.
nlohmann::json simulate(const nlohmann::json& config);

/// Delta sigma_z vs Delta theta_z detection over trial directories.
nlohmann::json detect(const nlohmann::json& config);

/// Trial directories into a training-set exchange directory.
nlohmann::json build_dataset(const nlohmann::json& config);

/// Predictions equal to the labels of a training set.
nlohmann::json identity_predictions(const nlohmann::json& config);

/// Horizon curves, CSV and SVG from prediction directories.
nlohmann::json evaluate(const nlohmann::json& config);

/// sigma_z, Delta sigma_z, theta_z, Delta theta_z for one trial.
nlohmann::json sway(const nlohmann::json& config);

/// Panorama of one trial tick as .pano and .pgm.
nlohmann::json panorama(const nlohmann::json& config);

}  // namespace swayrisk::pipeline
