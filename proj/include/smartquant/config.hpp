#pragma once

#include "smartquant/dram.hpp"
#include "smartquant/quant.hpp"
#include "smartquant/workload.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sq {

/// Everything a comparison run depends on. Every field has a default, so an
/// empty JSON object is a valid config.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    FormatLadder ladder = FormatLadder::defaults();
    GuardConfig guard;
    RoundingMode rounding = RoundingMode::TruncateTowardZero;
    double predictor_fraction = 0.0176;
    ModelGeometry geometry = ModelGeometry::scaled_opt30b(0.0176);
    ImportanceModel importance;
    ThresholdFamily thresholds;
    std::vector<double> targets{1.6, 3.2, 4.8, 6.4, 8.0};
    bool plane_line_buffer = true;
    DramConfig dram;

    static ExperimentConfig defaults();
};

/// Parses a JSON document; missing keys keep their defaults, unknown keys are errors.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully expanded JSON form (round-trips through parse_config).
std::string dump_config(const ExperimentConfig& config, int indent = 2);

}  // namespace sq
