#ifndef MAXCQ_CONFIG_HPP
#define MAXCQ_CONFIG_HPP

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxcq/discretization.hpp"
#include "maxcq/material.hpp"

namespace maxcq {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SchemeChoice { Ade, CqDirect, CqFocq };

inline std::string scheme_name(SchemeChoice s) {
    switch (s) {
        case SchemeChoice::Ade: return "ade";
        case SchemeChoice::CqDirect: return "cq-direct";
        case SchemeChoice::CqFocq: return "cq-focq";
    }
    return "?";
}

inline SchemeChoice parse_scheme(const std::string& name) {
    if (name == "ade") return SchemeChoice::Ade;
    if (name == "cq-direct") return SchemeChoice::CqDirect;
    if (name == "cq-focq") return SchemeChoice::CqFocq;
    throw ConfigError("scheme: unknown scheme '" + name + "' (ade, cq-direct, cq-focq)");
}

struct GaussianPulse {
    double amplitude = 10.0;
    double width = 10.0;  // h0(z) = amplitude * exp(-width * (z-center)^2)
    double center = 0.0;

    double operator()(double z) const {
        const double d = z - center;
        return amplitude * std::exp(-width * d * d);
    }
};

struct WeightsConfig {
    std::string method = "recurrence";  // or "fft"
    double rho = 0.0;                   // 0: default contour radius
    long fft_length = 0;                // 0: default length
    std::optional<std::string> dump_path;
};

struct FocqConfig {
    int base = 2;
    int contour_nodes = 24;
    double tolerance = 1e-6;
};

struct OutputConfig {
    long snapshot_stride = 0;  // 0: no snapshots
    std::string snapshot_dir = ".";
    std::string energy_path;
    std::optional<std::string> comparison_path;
};

struct SimConfig {
    double z_min = -1.0;
    double z_max = 1.0;
    Eigen::Index n_cells = 0;
    std::optional<double> dt;
    std::optional<double> cfl_fraction;
    long n_steps = 0;
    SchemeChoice scheme = SchemeChoice::Ade;
    MaterialLayout layout;
    GaussianPulse initial_condition;
    FocqConfig focq;
    WeightsConfig weights;
    OutputConfig outputs;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                                     const std::string& path) {
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigError(path + key + ": missing");
    return *it;
}

inline double number_at(const nlohmann::json& j, const std::string& key,
                        const std::string& path) {
    const nlohmann::json& v = require(j, key, path);
    if (!v.is_number()) throw ConfigError(path + key + ": expected a number");
    return v.get<double>();
}

inline MaterialModel parse_material(const std::string& name, const nlohmann::json& j,
                                    const std::string& path) {
    std::vector<DebyePole> poles;
    if (j.contains("poles")) {
        const nlohmann::json& arr = j.at("poles");
        if (!arr.is_array()) throw ConfigError(path + "poles: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const nlohmann::json& p = arr[i];
            const std::string ppath = path + "poles[" + std::to_string(i) + "].";
            const double deps = number_at(p, "delta_eps", ppath);
            const bool has_tau = p.contains("tau_relax");
            const bool has_corner = p.contains("omega_corner");
            if (has_tau == has_corner) {
                throw ConfigError(ppath + "tau_relax/omega_corner: exactly one required");
            }
            if (has_tau) {
                poles.push_back({deps, number_at(p, "tau_relax", ppath)});
            } else {
                poles.push_back(pole_from_corner(deps, number_at(p, "omega_corner", ppath)));
            }
        }
    }
    return make_material(name, number_at(j, "eps_inf_prime", path), std::move(poles));
}

}  // namespace detail

inline SimConfig parse_config(const nlohmann::json& j) {
    using detail::number_at;
    using detail::require;
    SimConfig c;
    const nlohmann::json& dom = require(j, "domain", "");
    c.z_min = number_at(dom, "z_min", "domain.");
    c.z_max = number_at(dom, "z_max", "domain.");
    if (!(c.z_max > c.z_min)) throw ConfigError("domain: z_max must exceed z_min");
    c.n_cells = static_cast<Eigen::Index>(number_at(j, "n_cells", ""));
    if (c.n_cells < 2) throw ConfigError("n_cells: must be at least 2");

    const nlohmann::json& time = require(j, "time", "");
    if (time.contains("dt") == time.contains("cfl_fraction")) {
        throw ConfigError("time: exactly one of dt / cfl_fraction required");
    }
    if (time.contains("dt")) {
        c.dt = number_at(time, "dt", "time.");
        if (!(*c.dt > 0.0)) throw ConfigError("time.dt: must be positive");
    } else {
        c.cfl_fraction = number_at(time, "cfl_fraction", "time.");
        if (!(*c.cfl_fraction > 0.0 && *c.cfl_fraction <= 1.0)) {
            throw ConfigError("time.cfl_fraction: must lie in (0, 1]");
        }
    }
    c.n_steps = static_cast<long>(number_at(j, "n_steps", ""));
    if (c.n_steps < 1) throw ConfigError("n_steps: must be at least 1");
    c.scheme = parse_scheme(require(j, "scheme", "").get<std::string>());

    const nlohmann::json& mats = require(j, "materials", "");
    if (!mats.is_object() || mats.empty()) {
        throw ConfigError("materials: expected a non-empty object");
    }
    for (const auto& [name, body] : mats.items()) {
        c.layout.materials.push_back(
            detail::parse_material(name, body, "materials." + name + "."));
    }
    const nlohmann::json& lay = require(j, "layout", "");
    if (!lay.is_array() || lay.empty()) throw ConfigError("layout: expected a non-empty array");
    for (std::size_t i = 0; i < lay.size(); ++i) {
        const std::string lpath = "layout[" + std::to_string(i) + "].";
        MaterialRegion r;
        r.z_lo = number_at(lay[i], "from", lpath);
        r.z_hi = number_at(lay[i], "to", lpath);
        r.material = require(lay[i], "material", lpath).get<std::string>();
        c.layout.regions.push_back(std::move(r));
    }
    {
        const std::vector<std::string> issues = validate_layout(c.layout, c.z_min, c.z_max);
        if (!issues.empty()) throw ConfigError(issues.front());
    }

    if (j.contains("initial_condition")) {
        const nlohmann::json& ic = require(j.at("initial_condition"), "gaussian",
                                           "initial_condition.");
        c.initial_condition.amplitude = number_at(ic, "amplitude", "initial_condition.gaussian.");
        c.initial_condition.width = number_at(ic, "width", "initial_condition.gaussian.");
        c.initial_condition.center = number_at(ic, "center", "initial_condition.gaussian.");
    }
    if (j.contains("focq")) {
        const nlohmann::json& f = j.at("focq");
        if (f.contains("base")) c.focq.base = static_cast<int>(number_at(f, "base", "focq."));
        if (f.contains("contour_nodes")) {
            c.focq.contour_nodes = static_cast<int>(number_at(f, "contour_nodes", "focq."));
        }
        if (f.contains("tolerance")) c.focq.tolerance = number_at(f, "tolerance", "focq.");
        if (c.focq.base < 2) throw ConfigError("focq.base: must be at least 2");
        if (c.focq.contour_nodes < 4) throw ConfigError("focq.contour_nodes: must be at least 4");
    }
    if (j.contains("weights")) {
        const nlohmann::json& w = j.at("weights");
        if (w.contains("method")) {
            c.weights.method = w.at("method").get<std::string>();
            if (c.weights.method != "recurrence" && c.weights.method != "fft") {
                throw ConfigError("weights.method: expected 'recurrence' or 'fft'");
            }
        }
        if (w.contains("rho")) c.weights.rho = number_at(w, "rho", "weights.");
        if (w.contains("fft_length")) {
            c.weights.fft_length = static_cast<long>(number_at(w, "fft_length", "weights."));
        }
        if (w.contains("dump_path")) c.weights.dump_path = w.at("dump_path").get<std::string>();
    }
    if (j.contains("outputs")) {
        const nlohmann::json& o = j.at("outputs");
        if (o.contains("snapshot_stride")) {
            c.outputs.snapshot_stride =
                static_cast<long>(number_at(o, "snapshot_stride", "outputs."));
            if (c.outputs.snapshot_stride < 0) {
                throw ConfigError("outputs.snapshot_stride: must be >= 0");
            }
        }
        if (o.contains("snapshot_dir")) {
            c.outputs.snapshot_dir = o.at("snapshot_dir").get<std::string>();
        }
        if (o.contains("energy_path")) c.outputs.energy_path = o.at("energy_path").get<std::string>();
        if (o.contains("comparison_path")) {
            c.outputs.comparison_path = o.at("comparison_path").get<std::string>();
        }
    }
    return c;
}

inline SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config parse error in '" + path + "': " + e.what());
    }
    return parse_config(j);
}

/// Air outside, the five-pole tissue model on [0.5, 0.7], Gaussian magnetic
/// pulse 10*exp(-10 z^2) on (-1, 1). Discretization defaults: 1024 cells at
/// 90% of the CFL bound.
inline const char* tissue_interface_preset_json() {
    return R"json({
  "domain": {"z_min": -1.0, "z_max": 1.0},
  "n_cells": 1024,
  "time": {"cfl_fraction": 0.9},
  "n_steps": 2500,
  "scheme": "ade",
  "materials": {
    "air": {"eps_inf_prime": 0.0, "poles": []},
    "tissue": {
      "eps_inf_prime": 3.3,
      "poles": [
        {"delta_eps": 45.8,  "omega_corner": 125663706143.59172},
        {"delta_eps": 32.0,  "omega_corner": 1445132620.6513047},
        {"delta_eps": 1190.0, "omega_corner": 4209734.155810323},
        {"delta_eps": 8190.0, "omega_corner": 270176.9682087222},
        {"delta_eps": 850000.0, "omega_corner": 433.5397861953914}
      ]
    }
  },
  "layout": [
    {"from": -1.0, "to": 0.5, "material": "air"},
    {"from": 0.5, "to": 0.7, "material": "tissue"},
    {"from": 0.7, "to": 1.0, "material": "air"}
  ],
  "initial_condition": {"gaussian": {"amplitude": 10.0, "width": 10.0, "center": 0.0}},
  "focq": {"base": 2, "contour_nodes": 24, "tolerance": 1e-6},
  "weights": {"method": "recurrence"},
  "outputs": {"snapshot_stride": 250, "snapshot_dir": "out", "energy_path": "out/energy.csv"}
})json";
}

inline SimConfig preset_config(const std::string& name) {
    if (name == "tissue-interface") {
        return parse_config(nlohmann::json::parse(tissue_interface_preset_json()));
    }
    throw ConfigError("unknown preset '" + name + "' (available: tissue-interface)");
}

}  // namespace maxcq

#endif
