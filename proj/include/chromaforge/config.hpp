// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include "chromaforge/embedder.hpp"

#include <filesystem>
#include <string>

namespace chromaforge::config {

/// Plain-text KEY=VALUE run configuration ('#' starts a comment). Unknown
/// keys are rejected; all defaults carry the reference operating point.
struct RunConfig {
    embedder::TrainConfig train;  // includes batch config and filter params
    double val_fraction = 0.2;
    int scene_height = 512;
    int scene_width = 512;
    int stride = 32;
    int analysis_larger_dim = 1536;
};

RunConfig parse_run_config(const std::filesystem::path& path);
RunConfig parse_run_config_text(const std::string& text);

/// Validates invariants (positive rates, patience >= 1, batch arithmetic).
void validate(const RunConfig& cfg);

}  // namespace chromaforge::config
