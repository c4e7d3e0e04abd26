#pragma once

#include "smartquant/address.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sq {

struct DramTiming {
    std::uint32_t tRCD = 34;
    std::uint32_t tCL = 34;
    std::uint32_t tRP = 34;
    std::uint32_t tRAS = 77;
    std::uint32_t tCCD_L = 12;
    std::uint32_t tCCD_S = 8;
    std::uint32_t burst_cycles = 8;  // BL16 on a double-data-rate bus
};

struct DramEnergy {
    double e_act_pj = 18485.0;  // activate + precharge, whole channel
    double e_rd_pj = 7040.0;    // one 64-byte burst
    double p_bg_mw = 616.0;     // background, per channel
};

/// Multi-channel DDR5 geometry, timing, and energy. Defaults model 4 channels of
/// ten x4 DDR5-4800 devices; derivation in docs/dram_defaults.md.
struct DramConfig {
    std::uint32_t channels = 4;
    std::uint32_t banks_per_channel = 32;
    std::uint32_t bank_groups = 8;
    std::uint64_t row_bytes = 8192;
    std::uint64_t burst_bytes = 64;
    std::uint64_t interleave_bytes = 64;
    double clock_ns = 1.0 / 2.4;
    DramTiming timing;
    DramEnergy energy;

    void validate() const;
    std::uint32_t bank_group_of(std::uint32_t bank) const { return bank % bank_groups; }
};

struct DramLocation {
    std::uint32_t channel = 0;
    std::uint32_t bank = 0;
    std::uint64_t row = 0;
    std::uint64_t column = 0;

    friend bool operator==(const DramLocation&, const DramLocation&) = default;
};

/// Low to high address bits: burst offset | channel | column | bank | row.
DramLocation map_address(const DramConfig& config, std::uint64_t byte_addr);

enum class CommandKind : std::uint8_t { ACT, RD, PRE };

std::string_view to_string(CommandKind kind);

struct DramCommand {
    CommandKind kind = CommandKind::ACT;
    std::uint32_t channel = 0;
    std::uint32_t bank = 0;
    std::uint64_t row = 0;
    std::uint64_t column = 0;
    std::uint64_t cycle = 0;
    std::uint32_t request = 0;  // index of the originating request

    friend bool operator==(const DramCommand&, const DramCommand&) = default;
};

struct CommandStream {
    std::vector<DramCommand> commands;
    std::vector<std::uint64_t> request_bytes;
    std::vector<std::optional<ChunkKind>> request_tags;
};

/// FCFS open-page scheduling, independently per channel.
CommandStream schedule(const DramConfig& config, const std::vector<PhysicalRequest>& requests);

struct EnergyTotals {
    double activation = 0;
    double read = 0;
    double background = 0;
    double total = 0;
};

struct RequestStats {
    std::uint64_t completion_cycle = 0;
    std::uint32_t activates = 0;
    std::uint32_t reads = 0;
};

struct SimResult {
    std::uint64_t total_cycles = 0;
    double total_ns = 0;
    EnergyTotals energy_pj;
    std::uint64_t activates = 0;
    std::uint64_t reads = 0;
    std::uint64_t precharges = 0;
    std::uint64_t bytes_transferred = 0;
    std::vector<RequestStats> requests;
};

/// Replays a command stream, checking every bank-state and timing constraint.
SimResult simulate(const DramConfig& config, const CommandStream& stream);

inline SimResult run_trace(const DramConfig& config, const std::vector<PhysicalRequest>& requests)
{
    return simulate(config, schedule(config, requests));
}

struct CategoryEnergy {
    double attention = 0;
    double mlp = 0;
    double predictor = 0;
    std::uint64_t attention_bytes = 0;
    std::uint64_t mlp_bytes = 0;
    std::uint64_t predictor_bytes = 0;

    double total() const { return attention + mlp + predictor; }
    std::uint64_t total_bytes() const { return attention_bytes + mlp_bytes + predictor_bytes; }
    double& energy_of(ChunkKind k);
    double energy_of(ChunkKind k) const;
    std::uint64_t bytes_of(ChunkKind k) const;
};

/// Activation and read energy go to the requesting chunk kind; background is
/// prorated by transferred bytes.
CategoryEnergy energy_breakdown(const SimResult& result,
                                const std::vector<std::optional<ChunkKind>>& request_tags);

// Trace text format: one "byte_addr len_bytes tag" line per request.
void write_trace(std::ostream& out, const std::vector<PhysicalRequest>& requests);
std::vector<PhysicalRequest> read_trace(std::istream& in);

}  // namespace sq
