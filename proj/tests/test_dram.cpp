#include "smartquant/dram.hpp"
#include "smartquant/error.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

using namespace sq;

namespace {

DramConfig no_background()
{
    DramConfig c;
    c.energy.p_bg_mw = 0;
    return c;
}

PhysicalRequest req(std::uint64_t addr, std::uint64_t len = 64,
                    std::optional<ChunkKind> tag = ChunkKind::MlpNeuron)
{
    PhysicalRequest r;
    r.byte_addr = addr;
    r.len_bytes = len;
    r.tag = tag;
    return r;
}

constexpr std::uint64_t kBank = 32768;     // next bank, same row index
constexpr std::uint64_t kRow = 1u << 20;   // same bank, next row

using Cmd = std::tuple<CommandKind, std::uint32_t, std::uint32_t, std::uint64_t>;  // kind, channel, bank, cycle

std::vector<Cmd> cmds(const CommandStream& s)
{
    std::vector<Cmd> out;
    for (const auto& c : s.commands)
        out.emplace_back(c.kind, c.channel, c.bank, c.cycle);
    return out;
}

// Open-page ACT count by direct replay of per-bank open rows.
std::uint64_t count_acts(const DramConfig& cfg, const std::vector<PhysicalRequest>& reqs)
{
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> open;  // (channel, bank) -> row
    std::uint64_t acts = 0;
    for (const auto& r : reqs)
        for (std::uint64_t a = r.byte_addr; a < r.byte_addr + r.len_bytes; a += 64) {
            const std::uint64_t line = a / 64;
            const std::uint64_t ch = line % cfg.channels;
            const std::uint64_t rest = line / cfg.channels / (cfg.row_bytes / 64);
            const std::uint64_t bank = rest % cfg.banks_per_channel;
            const std::uint64_t row = rest / cfg.banks_per_channel;
            auto it = open.find({ch, bank});
            if (it == open.end() || it->second != row) {
                ++acts;
                open[{ch, bank}] = row;
            }
        }
    return acts;
}

using enum CommandKind;

}  // namespace

TEST(MapAddress, Examples)
{
    const DramConfig c;
    EXPECT_EQ(map_address(c, 0).channel, 0u);
    EXPECT_EQ(map_address(c, 64).channel, 1u);
    const DramLocation l = map_address(c, 256);
    EXPECT_EQ(l.channel, 0u);
    EXPECT_EQ(l.column, 1u);
    EXPECT_EQ(l.bank, 0u);
    EXPECT_EQ(map_address(c, kBank).bank, 1u);
    EXPECT_EQ(map_address(c, kRow).row, 1u);
    EXPECT_EQ(map_address(c, kRow).bank, 0u);
    EXPECT_THROW(map_address(c, 32), Error);
}

TEST(Config, Validation)
{
    DramConfig c;
    EXPECT_NO_THROW(c.validate());
    c.timing.tRAS = 10;
    EXPECT_THROW(c.validate(), Error);
    c = DramConfig{};
    c.burst_bytes = 48;
    EXPECT_THROW(c.validate(), Error);
    c = DramConfig{};
    c.channels = 0;
    EXPECT_THROW(c.validate(), Error);
}

// Hand-computed schedules under the default timing (tRCD=tCL=tRP=34, tRAS=77,
// tCCD_L=12, tCCD_S=8, 8-cycle burst).
TEST(Schedule, SingleBurst)
{
    const DramConfig c = no_background();
    const CommandStream s = schedule(c, {req(0)});
    EXPECT_EQ(cmds(s), (std::vector<Cmd>{{ACT, 0, 0, 0}, {RD, 0, 0, 34}}));
    const SimResult r = simulate(c, s);
    EXPECT_EQ(r.total_cycles, 76u);
    EXPECT_NEAR(r.total_ns, 31.667, 0.001);
    EXPECT_EQ(r.energy_pj.total, c.energy.e_act_pj + c.energy.e_rd_pj);
}

TEST(Schedule, RowHit)
{
    const DramConfig c = no_background();
    const CommandStream s = schedule(c, {req(0), req(256)});
    EXPECT_EQ(cmds(s), (std::vector<Cmd>{{ACT, 0, 0, 0}, {RD, 0, 0, 34}, {RD, 0, 0, 46}}));
    const SimResult r = simulate(c, s);
    EXPECT_EQ(r.total_cycles, 88u);
    EXPECT_EQ(r.requests[0].completion_cycle, 76u);
    EXPECT_EQ(r.requests[1].completion_cycle, 88u);
    EXPECT_EQ(r.energy_pj.total, c.energy.e_act_pj + 2 * c.energy.e_rd_pj);
}

TEST(Schedule, SecondBankOtherGroup)
{
    const DramConfig c = no_background();
    const CommandStream s = schedule(c, {req(0), req(kBank)});
    EXPECT_EQ(cmds(s), (std::vector<Cmd>{{ACT, 0, 0, 0}, {RD, 0, 0, 34}, {ACT, 0, 1, 35}, {RD, 0, 1, 69}}));
    const SimResult r = simulate(c, s);
    EXPECT_EQ(r.total_cycles, 111u);
    EXPECT_EQ(r.energy_pj.total, 2 * c.energy.e_act_pj + 2 * c.energy.e_rd_pj);
}

TEST(Schedule, RowConflict)
{
    const DramConfig c = no_background();
    const CommandStream s = schedule(c, {req(0), req(kRow)});
    EXPECT_EQ(cmds(s), (std::vector<Cmd>{{ACT, 0, 0, 0}, {RD, 0, 0, 34}, {PRE, 0, 0, 77}, {ACT, 0, 0, 111},
                                         {RD, 0, 0, 145}}));
    const SimResult r = simulate(c, s);
    EXPECT_EQ(r.total_cycles, 187u);
    EXPECT_EQ(r.precharges, 1u);
    EXPECT_EQ(r.energy_pj.total, 2 * c.energy.e_act_pj + 2 * c.energy.e_rd_pj);
}

TEST(Schedule, ChannelsRunIndependently)
{
    const DramConfig c = no_background();
    const CommandStream s = schedule(c, {req(0, 256)});
    EXPECT_EQ(cmds(s), (std::vector<Cmd>{{ACT, 0, 0, 0}, {RD, 0, 0, 34}, {ACT, 1, 0, 0}, {RD, 1, 0, 34},
                                         {ACT, 2, 0, 0}, {RD, 2, 0, 34}, {ACT, 3, 0, 0}, {RD, 3, 0, 34}}));
    const SimResult r = simulate(c, s);
    EXPECT_EQ(r.total_cycles, 76u);
    EXPECT_EQ(r.energy_pj.total, 4 * c.energy.e_act_pj + 4 * c.energy.e_rd_pj);
}

TEST(Schedule, ShortCcdAcrossGroups)
{
    const DramConfig c = no_background();
    const CommandStream s = schedule(c, {req(0), req(kBank), req(256)});
    EXPECT_EQ(cmds(s), (std::vector<Cmd>{{ACT, 0, 0, 0}, {RD, 0, 0, 34}, {ACT, 0, 1, 35}, {RD, 0, 1, 69},
                                         {RD, 0, 0, 77}}));
    const SimResult r = simulate(c, s);
    EXPECT_EQ(r.requests[2].completion_cycle, 119u);
    EXPECT_EQ(r.total_cycles, 119u);
}

TEST(Simulate, EmptyStream)
{
    const SimResult r = run_trace(DramConfig{}, {});
    EXPECT_EQ(r.total_cycles, 0u);
    EXPECT_EQ(r.energy_pj.total, 0.0);
}

TEST(Simulate, BackToBackHitsAreLinear)
{
    const DramConfig c = no_background();
    for (std::uint64_t n : {1u, 10u, 100u}) {
        std::vector<PhysicalRequest> reqs;
        for (std::uint64_t i = 0; i < n; ++i)
            reqs.push_back(req(i * 256));  // channel 0, same row
        const SimResult r = run_trace(c, reqs);
        EXPECT_EQ(r.total_cycles, 34 + (n - 1) * 12 + 34 + 8) << n;
    }
}

TEST(Simulate, RejectsIllegalStreams)
{
    const DramConfig c;
    CommandStream s = schedule(c, {req(0)});
    CommandStream early = s;
    early.commands[1].cycle = 20;
    try {
        simulate(c, early);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("tRCD"), std::string::npos);
    }
    CommandStream no_act = s;
    no_act.commands.erase(no_act.commands.begin());
    EXPECT_THROW(simulate(c, no_act), Error);

    CommandStream conflict = schedule(c, {req(0), req(kRow)});
    conflict.commands[2].cycle = 50;  // PRE before tRAS
    try {
        simulate(c, conflict);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("tRAS"), std::string::npos);
    }
}

TEST(Schedule, RowBoundaryCrossing)
{
    const DramConfig c = no_background();
    // 4 KiB straddling the first bank boundary: channel 0 sees 8 lines in bank 0 and 8 in bank 1.
    const std::vector<PhysicalRequest> reqs{req(kBank - 2048, 4096)};
    const CommandStream s = schedule(c, reqs);
    std::uint64_t ch0_acts = 0;
    for (const auto& cmd : s.commands)
        ch0_acts += cmd.kind == ACT && cmd.channel == 0;
    EXPECT_EQ(ch0_acts, 2u);
    EXPECT_EQ(simulate(c, s).activates, count_acts(c, reqs));
}

TEST(Schedule, ActCountMatchesReplayOracle)
{
    const DramConfig c;
    std::mt19937_64 rng(2);
    for (int k = 0; k < 50; ++k) {
        std::vector<PhysicalRequest> reqs;
        for (int i = 0; i < 40; ++i)
            reqs.push_back(req((rng() % (8u << 20)) / 64 * 64, 64 * (1 + rng() % 40)));
        ASSERT_EQ(run_trace(c, reqs).activates, count_acts(c, reqs));
    }
}

TEST(Properties, ByteConservationAndDeterminism)
{
    const DramConfig c;
    std::mt19937_64 rng(3);
    std::vector<PhysicalRequest> reqs;
    std::uint64_t bytes = 0;
    for (int i = 0; i < 200; ++i) {
        reqs.push_back(req((rng() % (4u << 20)) / 64 * 64, 64 * (1 + rng() % 20)));
        bytes += reqs.back().len_bytes;
    }
    const SimResult a = run_trace(c, reqs);
    const SimResult b = run_trace(c, reqs);
    EXPECT_EQ(a.bytes_transferred, bytes);
    EXPECT_EQ(a.bytes_transferred, 64 * a.reads);
    EXPECT_EQ(a.total_cycles, b.total_cycles);
    EXPECT_EQ(a.energy_pj.total, b.energy_pj.total);
    EXPECT_DOUBLE_EQ(a.energy_pj.total, a.energy_pj.activation + a.energy_pj.read + a.energy_pj.background);
}

TEST(Properties, AddingRequestNeverHelps)
{
    const DramConfig c;
    std::mt19937_64 rng(4);
    for (int k = 0; k < 100; ++k) {
        std::vector<PhysicalRequest> reqs;
        for (int i = 0; i < 10; ++i)
            reqs.push_back(req((rng() % (4u << 20)) / 64 * 64, 64 * (1 + rng() % 8)));
        const SimResult before = run_trace(c, reqs);
        reqs.push_back(req((rng() % (4u << 20)) / 64 * 64, 64 * (1 + rng() % 8)));
        const SimResult after = run_trace(c, reqs);
        ASSERT_GE(after.total_cycles, before.total_cycles);
        ASSERT_GE(after.energy_pj.total, before.energy_pj.total);
    }
}

TEST(Properties, SortedTraceMinimisesActivates)
{
    const DramConfig c;
    std::mt19937_64 rng(5);
    const std::uint64_t spots[] = {0, 256, kBank, kRow, kRow + 256, 2 * kRow, kRow + kBank};
    for (int k = 0; k < 30; ++k) {
        std::vector<PhysicalRequest> reqs;
        const int n = 3 + static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i)
            reqs.push_back(req(spots[rng() % 7] + 1024 * (rng() % 2)));
        std::sort(reqs.begin(), reqs.end(), [](auto& a, auto& b) { return a.byte_addr < b.byte_addr; });
        const std::uint64_t sorted_acts = run_trace(c, reqs).activates;
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i)
            idx[i] = i;
        do {
            std::vector<PhysicalRequest> perm;
            for (int i : idx)
                perm.push_back(reqs[i]);
            ASSERT_LE(sorted_acts, run_trace(c, perm).activates);
        } while (std::next_permutation(idx.begin(), idx.end()));
    }
}

TEST(Properties, EnergyLinearWithoutBackground)
{
    const DramConfig c = no_background();
    std::mt19937_64 rng(6);
    std::vector<PhysicalRequest> reqs;
    for (int i = 0; i < 300; ++i)
        reqs.push_back(req((rng() % (16u << 20)) / 64 * 64, 64 * (1 + rng() % 16)));
    const SimResult r = run_trace(c, reqs);
    EXPECT_EQ(r.energy_pj.total, c.energy.e_act_pj * static_cast<double>(r.activates) +
                                     c.energy.e_rd_pj * static_cast<double>(r.reads));
}

TEST(Breakdown, Categories)
{
    const DramConfig c;
    std::vector<PhysicalRequest> preds{req(0, 4096, ChunkKind::Predictor)};
    const CommandStream s1 = schedule(c, preds);
    const CategoryEnergy e1 = energy_breakdown(simulate(c, s1), s1.request_tags);
    EXPECT_DOUBLE_EQ(e1.predictor, simulate(c, s1).energy_pj.total);
    EXPECT_EQ(e1.attention + e1.mlp, 0.0);

    // Mirror-image placement in two banks of different groups.
    std::vector<PhysicalRequest> sym{req(0, 8192, ChunkKind::AttentionHead), req(kBank, 8192, ChunkKind::MlpNeuron)};
    const CommandStream s2 = schedule(c, sym);
    const CategoryEnergy e2 = energy_breakdown(simulate(c, s2), s2.request_tags);
    EXPECT_NEAR(e2.attention / e2.total(), 0.5, 0.01);
    EXPECT_EQ(e2.attention_bytes, 8192u);

    std::vector<PhysicalRequest> untagged{req(0, 64, std::nullopt)};
    const CommandStream s3 = schedule(c, untagged);
    EXPECT_THROW(energy_breakdown(simulate(c, s3), s3.request_tags), Error);
}

TEST(TraceFile, RoundTrip)
{
    std::vector<PhysicalRequest> reqs{req(0, 64, ChunkKind::AttentionHead), req(4096, 640, ChunkKind::Predictor),
                                      req(128, 64, std::nullopt)};
    std::stringstream ss;
    write_trace(ss, reqs);
    const auto back = read_trace(ss);
    ASSERT_EQ(back.size(), reqs.size());
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        EXPECT_EQ(back[i].byte_addr, reqs[i].byte_addr);
        EXPECT_EQ(back[i].len_bytes, reqs[i].len_bytes);
        EXPECT_EQ(back[i].tag, reqs[i].tag);
    }
    std::stringstream bad("# comment\n100 64 mlp\n");
    EXPECT_THROW(read_trace(bad), Error);
    std::stringstream short_line("0 64\n");
    EXPECT_THROW(read_trace(short_line), Error);
}
