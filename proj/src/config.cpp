// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace chromaforge::config {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

void apply(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto as_double = [&] { return std::stod(value); };
    auto as_int = [&] { return std::stoi(value); };
    auto as_u64 = [&] { return std::stoull(value); };

    auto& t = cfg.train;
    if (key == "learning_rate")
        t.learning_rate = as_double();
    else if (key == "moment1")
        t.moment1 = as_double();
    else if (key == "moment2")
        t.moment2 = as_double();
    else if (key == "adam_epsilon")
        t.adam_epsilon = as_double();
    else if (key == "plateau_patience")
        t.plateau_patience = as_int();
    else if (key == "lr_decay")
        t.lr_decay = as_double();
    else if (key == "early_stop_factor")
        t.early_stop_factor = as_int();
    else if (key == "max_epochs")
        t.max_epochs = as_int();
    else if (key == "eta")
        t.eta = as_double();
    else if (key == "seed")
        t.seed = as_u64();
    else if (key == "n_scenes")
        t.batch.n_scenes = as_int();
    else if (key == "n_pipelines")
        t.batch.n_pipelines = as_int();
    else if (key == "n_patches")
        t.batch.n_patches = as_int();
    else if (key == "rho_hi")
        t.filters.rho_hi = as_int();
    else if (key == "rho_lo")
        t.filters.rho_lo = as_int();
    else if (key == "delta_hi")
        t.filters.delta_hi = as_double();
    else if (key == "delta_lo")
        t.filters.delta_lo = as_double();
    else if (key == "n_hi")
        t.filters.n_hi = as_int();
    else if (key == "n_lo")
        t.filters.n_lo = as_int();
    else if (key == "delta_lab")
        t.filters.delta_lab = as_double();
    else if (key == "val_fraction")
        cfg.val_fraction = as_double();
    else if (key == "scene_height")
        cfg.scene_height = as_int();
    else if (key == "scene_width")
        cfg.scene_width = as_int();
    else if (key == "stride")
        cfg.stride = as_int();
    else if (key == "analysis_larger_dim")
        cfg.analysis_larger_dim = as_int();
    else
        throw std::invalid_argument("unknown config key: " + key);
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected KEY=VALUE");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": empty key or value");
        apply(cfg, key, value);
    }
    validate(cfg);
    return cfg;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("parse_run_config: cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config_text(buf.str());
}

void validate(const RunConfig& cfg) {
    const auto& t = cfg.train;
    if (t.learning_rate <= 0 || t.moment1 <= 0 || t.moment2 <= 0 || t.lr_decay <= 0)
        throw std::invalid_argument("config: rates must be positive");
    if (t.plateau_patience < 1)
        throw std::invalid_argument("config: plateau_patience must be >= 1");
    if (t.max_epochs < 0)
        throw std::invalid_argument("config: max_epochs must be >= 0");
    if (t.batch.n_scenes < 1 || t.batch.n_pipelines < 1 || t.batch.n_patches < 1)
        throw std::invalid_argument("config: batch dimensions must be positive");
    if (t.batch.n_pipelines >= 12)
        throw std::invalid_argument("config: n_pipelines must be smaller than the 12 pipelines");
    if (t.filters.rho_hi < 0 || t.filters.rho_lo < 0 || t.filters.delta_hi < 0 ||
        t.filters.delta_lo < 0 || t.filters.n_hi < 0 || t.filters.n_lo < 0 ||
        t.filters.delta_lab < 0)
        throw std::invalid_argument("config: filter thresholds must be nonnegative");
    if (cfg.val_fraction <= 0.0 || cfg.val_fraction >= 1.0)
        throw std::invalid_argument("config: val_fraction must be in (0, 1)");
    if (cfg.scene_height < 256 || cfg.scene_width < 256)
        throw std::invalid_argument("config: scene dimensions must be >= 256");
}

}  // namespace chromaforge::config
