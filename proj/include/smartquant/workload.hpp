#pragma once

#include "smartquant/address.hpp"
#include "smartquant/bitplane.hpp"
#include "smartquant/dram.hpp"
#include "smartquant/quant.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace sq {

struct ModelGeometry {
    std::uint32_t layers = 0;
    std::uint32_t heads_per_layer = 0;
    std::uint64_t weights_per_head = 0;
    std::uint32_t neurons_per_layer = 0;
    std::uint64_t weights_per_neuron = 0;
    std::uint64_t predictor_weights_per_layer = 0;

    void validate() const;
    std::uint64_t weights_per_layer() const;
    std::uint64_t total_weights() const { return weights_per_layer() * layers; }
    double predictor_fraction() const;

    /// Predictor size such that predictors make up `fraction` of each layer.
    static std::uint64_t predictor_weights_for(double fraction, std::uint64_t quantized_per_layer);
    /// 2 layers, 8 heads x 36,864, 512 neurons x 7,200.
    static ModelGeometry scaled_opt30b(double predictor_fraction);
    /// Chunk sizes of the full OPT-30b model (enumeration only; too large to simulate).
    static ModelGeometry opt30b(double predictor_fraction);
};

ChunkDirectory enumerate_chunks(const ModelGeometry& geometry);

// Importance-score distributions -----------------------------------------

struct ScoreComponent {
    enum class Kind { Uniform, Beta, Point };
    Kind kind = Kind::Uniform;
    double weight = 1.0;
    double a = 1.0;  // beta alpha
    double b = 1.0;  // beta beta
    double value = 0.0;  // point mass location
};

/// Finite mixture of uniform, beta, and point-mass components on [0, 1].
struct ScoreDistribution {
    std::vector<ScoreComponent> components;

    static ScoreDistribution uniform();
    static ScoreDistribution beta(double a, double b);
    static ScoreDistribution two_point(double low, double high, double p_high);
    void validate() const;
    double mean() const;
};

struct ImportanceModel {
    ScoreDistribution attention = ScoreDistribution::uniform();
    ScoreDistribution mlp = ScoreDistribution::uniform();
    std::uint64_t seed = 0;
};

/// One score per chunk; predictor chunks carry no score.
using ChunkScores = std::vector<std::optional<double>>;

ChunkScores gen_scores(const ChunkDirectory& directory, const ImportanceModel& model);

// Threshold assignment ----------------------------------------------------

/// s-1 strictly decreasing thresholds for an s-entry ladder.
struct ThresholdSet {
    std::vector<double> values;

    void validate(std::size_t ladder_size) const;
    /// Ladder index chosen for a score.
    std::size_t bucket(double score) const;
};

struct FormatAssignment {
    std::vector<std::size_t> format;  // ladder index per chunk
};

FormatAssignment assign_formats(const ChunkScores& scores, const ThresholdSet& thresholds,
                                const ChunkDirectory& directory, const FormatLadder& ladder);

/// Weighted average stored bits per weight, predictors counted at 16.
double avg_bits(const FormatAssignment& assignment, const ChunkDirectory& directory,
                const FormatLadder& ladder);
/// Same, over non-predictor chunks only.
double avg_bits_quantized(const FormatAssignment& assignment, const ChunkDirectory& directory,
                          const FormatLadder& ladder);

enum class TargetScope { WholeModel, QuantizedChunks };

std::string_view to_string(TargetScope scope);
TargetScope target_scope_from_string(std::string_view s);

/// Thresholds follow t_k = lambda^e_k for increasing exponents e_k, so a single
/// parameter lambda in (0, 1) sweeps from all-FP16 to all-FP0.
struct ThresholdFamily {
    std::vector<double> exponents;  // empty: 1, 2, ..., s-1
    TargetScope scope = TargetScope::WholeModel;
    double tolerance = 0.05;

    ThresholdSet at(double lambda, std::size_t ladder_size) const;
};

ThresholdSet solve_thresholds(const ChunkScores& scores, const ChunkDirectory& directory,
                              const FormatLadder& ladder, double target_avg_bits,
                              const ThresholdFamily& family = {});

// Trace generation ----------------------------------------------------------

enum class LoadMode { Traditional, SmartQuant };

std::string_view to_string(LoadMode mode);
LoadMode load_mode_from_string(std::string_view s);

struct TraceContext {
    const ChunkDirectory& directory;
    const FormatLadder& ladder;
    const RegionTable& regions;
    const PlaneLayout& planes;
    const TraditionalLayout& traditional;
    GuardConfig guard;
    bool plane_line_buffer = true;
};

/// Chunk-sequential load of the whole model; every request carries its chunk id and kind.
std::vector<PhysicalRequest> gen_trace(const FormatAssignment& assignment, LoadMode mode,
                                       const TraceContext& context);

/// Payload bits a bit-plane load requests, per chunk kind (indexed by ChunkKind),
/// before rounding to 64-byte lines.
std::array<std::uint64_t, 3> fetched_payload_bits(const FormatAssignment& assignment,
                                                  const ChunkDirectory& directory,
                                                  const FormatLadder& ladder, const GuardConfig& guard);

/// Predictor fraction of the transferred bytes in a breakdown (0 when empty).
double predictor_share(const CategoryEnergy& breakdown);
/// Predictor fraction of the breakdown's energy.
double predictor_energy_share(const CategoryEnergy& breakdown);

}  // namespace sq
