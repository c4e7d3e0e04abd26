#include "smartquant/dram.hpp"

#include "smartquant/error.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace sq {

void DramConfig::validate() const
{
    if (channels == 0 || banks_per_channel == 0 || bank_groups == 0 || row_bytes == 0 ||
        burst_bytes == 0 || interleave_bytes == 0)
        throw Error("dram config: geometry fields must be positive");
    if (row_bytes % burst_bytes != 0)
        throw Error("dram config: burst_bytes must divide row_bytes");
    if (interleave_bytes % burst_bytes != 0 || row_bytes % interleave_bytes != 0)
        throw Error("dram config: interleave granule must be a burst multiple dividing the row");
    if (banks_per_channel % bank_groups != 0)
        throw Error("dram config: bank_groups must divide banks_per_channel");
    if (!(clock_ns > 0))
        throw Error("dram config: clock_ns must be positive");
    const auto& t = timing;
    if (t.tRCD == 0 || t.tCL == 0 || t.tRP == 0 || t.tRAS == 0 || t.tCCD_L == 0 || t.tCCD_S == 0 ||
        t.burst_cycles == 0)
        throw Error("dram config: timing values must be positive");
    if (t.tRAS < t.tRCD)
        throw Error("dram config: tRAS must be at least tRCD");
    if (energy.e_act_pj < 0 || energy.e_rd_pj < 0 || energy.p_bg_mw < 0)
        throw Error("dram config: energy values must be non-negative");
}

DramLocation map_address(const DramConfig& config, std::uint64_t byte_addr)
{
    if (byte_addr % config.burst_bytes != 0)
        throw Error("map_address: address " + std::to_string(byte_addr) + " is not burst aligned");
    const std::uint64_t unit = byte_addr / config.interleave_bytes;
    const std::uint64_t bursts_per_unit = config.interleave_bytes / config.burst_bytes;
    DramLocation loc;
    loc.channel = static_cast<std::uint32_t>(unit % config.channels);
    std::uint64_t idx = (unit / config.channels) * bursts_per_unit +
                        (byte_addr % config.interleave_bytes) / config.burst_bytes;
    const std::uint64_t columns = config.row_bytes / config.burst_bytes;
    loc.column = idx % columns;
    idx /= columns;
    loc.bank = static_cast<std::uint32_t>(idx % config.banks_per_channel);
    loc.row = idx / config.banks_per_channel;
    return loc;
}

std::string_view to_string(CommandKind kind)
{
    switch (kind) {
    case CommandKind::ACT: return "ACT";
    case CommandKind::RD: return "RD";
    case CommandKind::PRE: return "PRE";
    }
    return "?";
}

namespace {

struct BankState {
    bool open = false;
    std::uint64_t row = 0;
    std::uint64_t act_cycle = 0;
    std::uint64_t ready_act = 0;
    std::uint64_t last_rd = 0;
    bool has_rd = false;
};

struct ChannelState {
    std::uint64_t next_cmd = 0;
    bool has_rd = false;
    std::uint64_t last_rd = 0;
    std::uint32_t last_rd_group = 0;
    std::vector<BankState> banks;
};

}  // namespace

CommandStream schedule(const DramConfig& config, const std::vector<PhysicalRequest>& requests)
{
    config.validate();
    const DramTiming& t = config.timing;
    std::vector<ChannelState> channels(config.channels);
    for (auto& c : channels)
        c.banks.resize(config.banks_per_channel);

    CommandStream out;
    out.request_bytes.reserve(requests.size());
    out.request_tags.reserve(requests.size());
    for (std::uint32_t ri = 0; ri < requests.size(); ++ri) {
        const PhysicalRequest& req = requests[ri];
        if (req.len_bytes % config.burst_bytes != 0)
            throw Error("schedule: request length is not a burst multiple");
        out.request_bytes.push_back(req.len_bytes);
        out.request_tags.push_back(req.tag);
        for (std::uint64_t a = req.byte_addr; a < req.byte_addr + req.len_bytes; a += config.burst_bytes) {
            const DramLocation loc = map_address(config, a);
            ChannelState& ch = channels[loc.channel];
            BankState& bank = ch.banks[loc.bank];
            auto emit = [&](CommandKind kind, std::uint64_t cycle) {
                out.commands.push_back(DramCommand{kind, loc.channel, loc.bank, loc.row, loc.column, cycle, ri});
                ch.next_cmd = cycle + 1;
            };
            if (!bank.open || bank.row != loc.row) {
                if (bank.open) {
                    std::uint64_t pre = std::max(ch.next_cmd, bank.act_cycle + t.tRAS);
                    if (bank.has_rd)
                        pre = std::max(pre, bank.last_rd + 1);
                    emit(CommandKind::PRE, pre);
                    bank.open = false;
                    bank.ready_act = pre + t.tRP;
                }
                const std::uint64_t act = std::max(ch.next_cmd, bank.ready_act);
                emit(CommandKind::ACT, act);
                bank.open = true;
                bank.row = loc.row;
                bank.act_cycle = act;
                bank.has_rd = false;
            }
            const std::uint32_t group = config.bank_group_of(loc.bank);
            std::uint64_t rd = std::max(ch.next_cmd, bank.act_cycle + t.tRCD);
            if (ch.has_rd)
                rd = std::max(rd, ch.last_rd + (group == ch.last_rd_group ? t.tCCD_L : t.tCCD_S));
            emit(CommandKind::RD, rd);
            ch.has_rd = true;
            ch.last_rd = rd;
            ch.last_rd_group = group;
            bank.has_rd = true;
            bank.last_rd = rd;
        }
    }
    return out;
}

namespace {

[[noreturn]] void violation(const char* constraint, const DramCommand& c, const std::string& detail)
{
    std::ostringstream os;
    os << constraint << " violated: " << to_string(c.kind) << " at cycle " << c.cycle << " (channel "
       << c.channel << ", bank " << c.bank << ", row " << c.row << ")";
    if (!detail.empty())
        os << ": " << detail;
    throw Error(os.str());
}

}  // namespace

SimResult simulate(const DramConfig& config, const CommandStream& stream)
{
    config.validate();
    const DramTiming& t = config.timing;
    std::vector<ChannelState> channels(config.channels);
    for (auto& c : channels)
        c.banks.resize(config.banks_per_channel);
    std::vector<bool> channel_used(config.channels, false);

    SimResult res;
    res.requests.resize(stream.request_bytes.size());
    for (const DramCommand& c : stream.commands) {
        if (c.channel >= config.channels || c.bank >= config.banks_per_channel)
            violation("geometry", c, "channel or bank out of range");
        if (c.request >= res.requests.size())
            violation("request index", c, "command refers to an unknown request");
        ChannelState& ch = channels[c.channel];
        BankState& bank = ch.banks[c.bank];
        if (channel_used[c.channel] && c.cycle < ch.next_cmd)
            violation("command bus", c, "commands on a channel must issue in order, one per cycle");
        channel_used[c.channel] = true;
        ch.next_cmd = c.cycle + 1;
        RequestStats& rs = res.requests[c.request];

        switch (c.kind) {
        case CommandKind::ACT:
            if (bank.open)
                violation("bank state", c, "ACT to a bank with an open row (PRE required)");
            if (c.cycle < bank.ready_act)
                violation("tRP", c, "ACT before precharge completed");
            bank.open = true;
            bank.row = c.row;
            bank.act_cycle = c.cycle;
            bank.has_rd = false;
            ++res.activates;
            ++rs.activates;
            break;
        case CommandKind::PRE:
            if (!bank.open)
                violation("bank state", c, "PRE to a closed bank");
            if (c.cycle < bank.act_cycle + t.tRAS)
                violation("tRAS", c, "PRE before the row was open for tRAS");
            if (bank.has_rd && c.cycle <= bank.last_rd)
                violation("read-to-precharge", c, "PRE must follow the last RD");
            bank.open = false;
            bank.ready_act = c.cycle + t.tRP;
            ++res.precharges;
            break;
        case CommandKind::RD: {
            if (!bank.open)
                violation("bank state", c, "RD to a closed bank (ACT required)");
            if (bank.row != c.row)
                violation("bank state", c, "RD to a row other than the open one");
            if (c.cycle < bank.act_cycle + t.tRCD)
                violation("tRCD", c, "RD issued too soon after ACT");
            const std::uint32_t group = config.bank_group_of(c.bank);
            if (ch.has_rd) {
                const std::uint32_t gap = group == ch.last_rd_group ? t.tCCD_L : t.tCCD_S;
                if (c.cycle < ch.last_rd + gap)
                    violation(group == ch.last_rd_group ? "tCCD_L" : "tCCD_S", c, "RDs too close");
            }
            ch.has_rd = true;
            ch.last_rd = c.cycle;
            ch.last_rd_group = group;
            bank.has_rd = true;
            bank.last_rd = c.cycle;
            const std::uint64_t done = c.cycle + t.tCL + t.burst_cycles;
            rs.completion_cycle = std::max(rs.completion_cycle, done);
            res.total_cycles = std::max(res.total_cycles, done);
            ++res.reads;
            ++rs.reads;
            break;
        }
        }
    }

    for (std::size_t i = 0; i < res.requests.size(); ++i) {
        if (static_cast<std::uint64_t>(res.requests[i].reads) * config.burst_bytes != stream.request_bytes[i])
            throw Error("simulate: request " + std::to_string(i) + " was not fully served");
    }

    res.bytes_transferred = res.reads * config.burst_bytes;
    res.total_ns = static_cast<double>(res.total_cycles) * config.clock_ns;
    res.energy_pj.activation = config.energy.e_act_pj * static_cast<double>(res.activates);
    res.energy_pj.read = config.energy.e_rd_pj * static_cast<double>(res.reads);
    // mW * ns = pJ
    res.energy_pj.background = config.energy.p_bg_mw * config.channels * res.total_ns;
    res.energy_pj.total = res.energy_pj.activation + res.energy_pj.read + res.energy_pj.background;
    return res;
}

double& CategoryEnergy::energy_of(ChunkKind k)
{
    switch (k) {
    case ChunkKind::AttentionHead: return attention;
    case ChunkKind::MlpNeuron: return mlp;
    case ChunkKind::Predictor: return predictor;
    }
    throw Error("bad chunk kind");
}

double CategoryEnergy::energy_of(ChunkKind k) const
{
    return const_cast<CategoryEnergy*>(this)->energy_of(k);
}

std::uint64_t CategoryEnergy::bytes_of(ChunkKind k) const
{
    switch (k) {
    case ChunkKind::AttentionHead: return attention_bytes;
    case ChunkKind::MlpNeuron: return mlp_bytes;
    case ChunkKind::Predictor: return predictor_bytes;
    }
    throw Error("bad chunk kind");
}

CategoryEnergy energy_breakdown(const SimResult& result,
                                const std::vector<std::optional<ChunkKind>>& request_tags)
{
    if (request_tags.size() != result.requests.size())
        throw Error("energy_breakdown: tag count does not match request count");
    CategoryEnergy out;
    const double e_act = result.activates ? result.energy_pj.activation / static_cast<double>(result.activates) : 0;
    const double e_rd = result.reads ? result.energy_pj.read / static_cast<double>(result.reads) : 0;
    const std::uint64_t burst = result.reads ? result.bytes_transferred / result.reads : 0;
    for (std::size_t i = 0; i < request_tags.size(); ++i) {
        if (!request_tags[i])
            throw Error("energy_breakdown: request " + std::to_string(i) + " is untagged");
        const RequestStats& rs = result.requests[i];
        out.energy_of(*request_tags[i]) += e_act * rs.activates + e_rd * rs.reads;
        const std::uint64_t bytes = static_cast<std::uint64_t>(rs.reads) * burst;
        switch (*request_tags[i]) {
        case ChunkKind::AttentionHead: out.attention_bytes += bytes; break;
        case ChunkKind::MlpNeuron: out.mlp_bytes += bytes; break;
        case ChunkKind::Predictor: out.predictor_bytes += bytes; break;
        }
    }
    if (const std::uint64_t total = out.total_bytes(); total > 0) {
        const double bg = result.energy_pj.background;
        out.attention += bg * static_cast<double>(out.attention_bytes) / static_cast<double>(total);
        out.mlp += bg * static_cast<double>(out.mlp_bytes) / static_cast<double>(total);
        out.predictor += bg * static_cast<double>(out.predictor_bytes) / static_cast<double>(total);
    }
    return out;
}

void write_trace(std::ostream& out, const std::vector<PhysicalRequest>& requests)
{
    for (const auto& r : requests)
        out << r.byte_addr << ' ' << r.len_bytes << ' ' << (r.tag ? to_string(*r.tag) : "-") << '\n';
}

std::vector<PhysicalRequest> read_trace(std::istream& in)
{
    std::vector<PhysicalRequest> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ls(line);
        PhysicalRequest r;
        std::string tag, extra;
        if (!(ls >> r.byte_addr >> r.len_bytes >> tag) || (ls >> extra))
            throw Error("trace line " + std::to_string(lineno) + ": expected 'byte_addr len_bytes tag'");
        if (r.byte_addr % kGranuleBytes != 0 || r.len_bytes == 0 || r.len_bytes % kGranuleBytes != 0)
            throw Error("trace line " + std::to_string(lineno) + ": request must be 64-byte aligned");
        if (tag != "-")
            r.tag = chunk_kind_from_string(tag);
        out.push_back(r);
    }
    return out;
}

}  // namespace sq
