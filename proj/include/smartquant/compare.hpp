#pragma once

#include "smartquant/config.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace sq {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::size_t kNumKinds = 3;

/// Per-kind numbers are indexed by ChunkKind.
struct ModeMetrics {
    LoadMode mode = LoadMode::SmartQuant;
    std::uint64_t requests = 0;
    std::uint64_t total_cycles = 0;
    double total_ns = 0;
    EnergyTotals energy_pj;
    std::uint64_t activates = 0;
    std::uint64_t reads = 0;
    CategoryEnergy breakdown;
    std::array<double, kNumKinds> energy_per_weight_pj{};
    /// Mean chunk load latency over every chunk of a kind; skipped chunks count as 0.
    std::array<double, kNumKinds> chunk_latency_ns{};
};

/// Geometry, layouts, and address tables shared by all runs of one config.
class Experiment {
public:
    explicit Experiment(const ExperimentConfig& config);

    const ExperimentConfig& config() const { return config_; }
    const ChunkDirectory& directory() const { return directory_; }
    const RegionTable& regions() const { return regions_; }
    const PlaneLayout& planes() const { return planes_; }
    const TraditionalLayout& traditional() const { return traditional_; }
    std::uint64_t weights_of(ChunkKind kind) const;

    std::vector<PhysicalRequest> trace(const FormatAssignment& assignment, LoadMode mode) const;
    ModeMetrics evaluate(const FormatAssignment& assignment, LoadMode mode) const;

private:
    ExperimentConfig config_;
    ChunkDirectory directory_;
    RegionTable regions_;
    PlaneLayout planes_;
    TraditionalLayout traditional_;
    std::array<std::uint64_t, kNumKinds> kind_weights_{};
};

/// Percent reduction of `ours` relative to `base` (0 when base is 0).
double reduction_pct(double base, double ours);

struct TargetResult {
    double target_bits = 0;
    std::vector<double> thresholds;
    double avg_bits_model = 0;
    double avg_bits_quantized = 0;
    /// Weight count per ladder entry, per kind.
    std::array<std::vector<std::uint64_t>, kNumKinds> format_weights;
    ModeMetrics traditional;
    ModeMetrics smartquant;
    /// Predictor share of the requested payload bits of the bit-plane load.
    double predictor_bit_share = 0;
    /// Predictor share of the bytes the bit-plane run actually transferred
    /// (includes 64-byte alignment slack of partial lines).
    double predictor_byte_share = 0;

    double energy_reduction(ChunkKind k) const;
    double latency_reduction(ChunkKind k) const;
    double total_energy_reduction() const;
};

struct ComparisonReport {
    ExperimentConfig config;
    std::vector<TargetResult> results;
};

ComparisonReport run_comparison(const ExperimentConfig& config);

/// Scores and thresholds for one target, as run_comparison computes them.
FormatAssignment assignment_for_target(const Experiment& experiment, const ChunkScores& scores,
                                       double target_bits, ThresholdSet* thresholds_out = nullptr);

std::string report_json(const ComparisonReport& report);
/// One row per target; column schema in docs/formats.md.
std::string report_csv(const ComparisonReport& report);
std::string report_csv_from_json(std::string_view json_text);
/// Writes compare.json, compare.csv, and provenance.json into `dir`.
void write_report(const ComparisonReport& report, const std::filesystem::path& dir);
/// Human-readable table from a compare.json document; rejects unknown schema versions.
std::string render_report(std::string_view json_text);

/// "chunk_id,kind,score,format" rows for one assignment.
std::string assignment_csv(const ChunkDirectory& directory, const ChunkScores& scores,
                           const FormatAssignment& assignment, const FormatLadder& ladder);

}  // namespace sq
