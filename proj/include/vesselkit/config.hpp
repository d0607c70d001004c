#pragma once

// Tunable defaults. A JSON file named by VESSELKIT_CONFIG may override any of them;
// command-line flags override the file.

#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "vesselkit/errors.hpp"
#include "vesselkit/matrix_kernel.hpp"

namespace vesselkit {

struct Config {
    double tol = 1e-8;
    std::size_t steps_per_unit = 200;
    std::size_t probes = 20;
    double eps_spec = 1e-9;
    double eps_pd = 1e-12;
    double eps_det = 1e-10;
    /// C in the tol + C h^2 slack for residuals that contain a finite difference.
    double allowance = 10.0;

    KernelConfig kernel() const { return KernelConfig{eps_spec, eps_pd}; }
};

inline void apply_config_json(Config& cfg, const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::InvalidInput, "config must be a JSON object");
    auto number = [&](const char* key, double& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number()) fail(ErrorKind::InvalidInput, std::string("config key ") + key + " must be a number");
        out = j[key].get<double>();
        if (!(out > 0.0)) fail(ErrorKind::InvalidInput, std::string("config key ") + key + " must be positive");
    };
    auto count = [&](const char* key, std::size_t& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_unsigned() || j[key].get<std::size_t>() == 0) {
            fail(ErrorKind::InvalidInput, std::string("config key ") + key + " must be a positive integer");
        }
        out = j[key].get<std::size_t>();
    };
    number("tol", cfg.tol);
    count("steps_per_unit", cfg.steps_per_unit);
    count("probes", cfg.probes);
    number("eps_spec", cfg.eps_spec);
    number("eps_pd", cfg.eps_pd);
    number("eps_det", cfg.eps_det);
    number("allowance", cfg.allowance);
}

/// Defaults, then the file named by VESSELKIT_CONFIG if set.
inline Config load_config() {
    Config cfg;
    const char* path = std::getenv("VESSELKIT_CONFIG");
    if (path == nullptr || *path == '\0') return cfg;
    std::ifstream in(path);
    if (!in) fail(ErrorKind::InvalidInput, std::string("cannot open config file ") + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidInput, std::string("config file is not valid JSON: ") + e.what());
    }
    apply_config_json(cfg, j);
    return cfg;
}

}  // namespace vesselkit
