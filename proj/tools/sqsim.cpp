// sqsim: pack bit-plane images and run traditional vs bit-plane load studies.

#include "smartquant/compare.hpp"
#include "smartquant/config.hpp"
#include "smartquant/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace sq;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
};

ExperimentConfig resolve_config(const Common& c)
{
    ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig::defaults() : load_config(c.config_path);
    if (c.seed) {
        cfg.seed = *c.seed;
        cfg.importance.seed = *c.seed;
    }
    return cfg;
}

// --out wins over SMARTQUANT_OUT_DIR, which wins over the config file.
fs::path output_dir(const Common& c, const ExperimentConfig& cfg)
{
    fs::path dir = cfg.output_dir;
    if (const char* env = std::getenv("SMARTQUANT_OUT_DIR"); env && *env)
        dir = env;
    if (!c.out.empty())
        dir = c.out;
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error("cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& body)
{
    std::ofstream out(p, std::ios::binary);
    out << body;
    if (!out)
        throw Error("cannot write " + p.string());
}

std::vector<std::uint16_t> seeded_weights(std::uint64_t count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    std::vector<std::uint16_t> w(count);
    for (auto& x : w)
        x = encode_fp16(normal(rng)).bits;
    return w;
}

std::vector<std::uint16_t> raw_fp16(const fs::path& p, std::optional<std::uint64_t> expect)
{
    const std::string bytes = read_file(p);
    if (bytes.size() % 2)
        throw Error("raw FP16 input has an odd byte count: " + p.string());
    std::vector<std::uint16_t> w(bytes.size() / 2);
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[2 * i]) |
                                          static_cast<unsigned char>(bytes[2 * i + 1]) << 8);
    if (expect && *expect != w.size())
        throw Error("size mismatch: --count " + std::to_string(*expect) + " but input holds " +
                    std::to_string(w.size()) + " weights");
    return w;
}

int cmd_pack(const Common& c, std::optional<std::uint64_t> count, const std::string& input,
             const std::string& image_name)
{
    const ExperimentConfig cfg = resolve_config(c);
    std::vector<std::uint16_t> weights;
    if (!input.empty())
        weights = raw_fp16(input, count);
    else
        weights = seeded_weights(count.value_or(cfg.geometry.total_weights()), cfg.seed);
    if (weights.empty())
        throw Error("pack: weight source is empty");
    const BitPlaneImage image = pack(weights);
    const fs::path path = output_dir(c, cfg) / image_name;
    write_image(path, image, cfg.ladder);
    std::printf("wrote %s\nL=%llu plane_stride=%llu footprint=%llu\n", path.c_str(),
                static_cast<unsigned long long>(image.layout().num_weights),
                static_cast<unsigned long long>(image.layout().plane_stride),
                static_cast<unsigned long long>(image.layout().footprint()));
    return 0;
}

int cmd_unpack(const std::string& image_path, const std::string& output)
{
    const LoadedImage loaded = read_image(image_path);
    const auto words = unpack_full(loaded.image, {0, loaded.image.layout().num_weights});
    std::string bytes(words.size() * 2, '\0');
    for (std::size_t i = 0; i < words.size(); ++i) {
        bytes[2 * i] = static_cast<char>(words[i] & 0xFF);
        bytes[2 * i + 1] = static_cast<char>(words[i] >> 8);
    }
    write_file(output, bytes);
    std::printf("wrote %s (%zu weights)\n", output.c_str(), words.size());
    return 0;
}

int cmd_regions(const Common& c)
{
    const ExperimentConfig cfg = resolve_config(c);
    const std::uint64_t L = cfg.geometry.total_weights();
    const RegionTable table = build_regions(L, cfg.ladder);
    nlohmann::json j;
    j["num_weights"] = L;
    j["physical_bytes"] = table.physical_bits() / 8;
    j["logical_bits"] = table.total_logical_bits();
    // Byte fields are exact only when L * N_i is a multiple of 8; bit fields always are.
    j["regions"] = nlohmann::json::array();
    for (const Region& r : table.regions())
        j["regions"].push_back({{"format", r.format.name},
                                {"ladder_index", r.ladder_index},
                                {"bits_per_weight", r.format.total_bits()},
                                {"base_byte", static_cast<double>(r.base_bit) / 8},
                                {"size_bytes", static_cast<double>(r.size_bits) / 8},
                                {"base_bit", r.base_bit},
                                {"size_bits", r.size_bits}});
    const std::string text = j.dump(2) + "\n";
    write_file(output_dir(c, cfg) / "regions.json", text);
    std::fputs(text.c_str(), stdout);
    return 0;
}

int cmd_config(const Common& c)
{
    std::fputs(dump_config(resolve_config(c)).c_str(), stdout);
    return 0;
}

int cmd_trace(const Common& c, double target, const std::string& mode_name)
{
    const ExperimentConfig cfg = resolve_config(c);
    const LoadMode mode = load_mode_from_string(mode_name);
    const Experiment exp(cfg);
    const ChunkScores scores = gen_scores(exp.directory(), cfg.importance);
    const FormatAssignment a = assignment_for_target(exp, scores, target);
    const auto requests = exp.trace(a, mode);
    const fs::path dir = output_dir(c, cfg);
    char stem[64];
    std::snprintf(stem, sizeof stem, "%s_%.2f", std::string(to_string(mode)).c_str(), target);
    std::ofstream out(dir / (std::string(stem) + ".trace"));
    write_trace(out, requests);
    if (!out)
        throw Error("cannot write trace");
    write_file(dir / (std::string(stem) + "_assignment.csv"), assignment_csv(exp.directory(), scores, a, cfg.ladder));
    std::printf("wrote %s.trace: %zu requests, %llu bytes, avg_bits=%.4f\n", (dir / stem).c_str(), requests.size(),
                static_cast<unsigned long long>(total_bytes(requests)), avg_bits(a, exp.directory(), cfg.ladder));
    return 0;
}

int cmd_sim(const Common& c, const std::string& trace_path)
{
    const ExperimentConfig cfg = resolve_config(c);
    std::ifstream in(trace_path);
    if (!in)
        throw Error("cannot open " + trace_path);
    const auto requests = read_trace(in);
    const CommandStream stream = schedule(cfg.dram, requests);
    const SimResult r = simulate(cfg.dram, stream);
    std::printf("requests=%zu bytes=%llu cycles=%llu ns=%.3f ACT=%llu RD=%llu PRE=%llu\n", requests.size(),
                static_cast<unsigned long long>(r.bytes_transferred), static_cast<unsigned long long>(r.total_cycles),
                r.total_ns, static_cast<unsigned long long>(r.activates), static_cast<unsigned long long>(r.reads),
                static_cast<unsigned long long>(r.precharges));
    std::printf("energy_pj activation=%.1f read=%.1f background=%.1f total=%.1f\n", r.energy_pj.activation,
                r.energy_pj.read, r.energy_pj.background, r.energy_pj.total);
    bool tagged = !requests.empty();
    for (const auto& q : requests)
        tagged = tagged && q.tag.has_value();
    if (tagged) {
        const CategoryEnergy e = energy_breakdown(r, stream.request_tags);
        std::printf("by_kind_pj attention=%.1f mlp=%.1f predictor=%.1f\n", e.attention, e.mlp, e.predictor);
    }
    return 0;
}

int cmd_compare(const Common& c)
{
    const ExperimentConfig cfg = resolve_config(c);
    const ComparisonReport report = run_comparison(cfg);
    const fs::path dir = output_dir(c, cfg);
    write_report(report, dir);
    std::fputs(render_report(report_json(report)).c_str(), stdout);
    std::printf("wrote %s\n", (dir / "compare.json").c_str());
    return 0;
}

int cmd_report(const std::string& path, const std::string& csv_out)
{
    const std::string text = read_file(path);
    std::fputs(render_report(text).c_str(), stdout);
    if (!csv_out.empty())
        write_file(csv_out, report_csv_from_json(text));
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bit-plane weight store: packing, traces, DRAM simulation, and comparisons"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "JSON experiment config")->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed, "Override the config seed");
        sub->add_option("--out", common.out, "Output directory (overrides SMARTQUANT_OUT_DIR)");
    };

    auto* pack_cmd = app.add_subcommand("pack", "Pack FP16 weights into a bit-plane image");
    add_common(pack_cmd);
    std::optional<std::uint64_t> count;
    std::string input, image_name = "model.sqbp";
    pack_cmd->add_option("--count", count, "Number of seeded weights (default: geometry size)");
    pack_cmd->add_option("--input", input, "Raw little-endian FP16 file instead of seeded weights");
    pack_cmd->add_option("--name", image_name, "Image file name inside the output directory");

    auto* unpack_cmd = app.add_subcommand("unpack", "Write an image back out as raw FP16");
    std::string image_path, raw_out;
    unpack_cmd->add_option("image", image_path)->required()->check(CLI::ExistingFile);
    unpack_cmd->add_option("output", raw_out)->required();

    auto* regions_cmd = app.add_subcommand("regions", "Write the logical region table as JSON");
    add_common(regions_cmd);

    auto* config_cmd = app.add_subcommand("config", "Print the resolved configuration as JSON");
    add_common(config_cmd);

    auto* trace_cmd = app.add_subcommand("trace", "Generate a load trace for one target");
    add_common(trace_cmd);
    double target = 8.0;
    std::string mode = "smartquant";
    trace_cmd->add_option("--target", target, "Target bits/weight");
    trace_cmd->add_option("--mode", mode, "traditional or smartquant");

    auto* sim_cmd = app.add_subcommand("sim", "Simulate a trace file");
    add_common(sim_cmd);
    std::string trace_path;
    sim_cmd->add_option("trace", trace_path)->required()->check(CLI::ExistingFile);

    auto* compare_cmd = app.add_subcommand("compare", "Traditional vs bit-plane sweep over all targets");
    add_common(compare_cmd);

    auto* report_cmd = app.add_subcommand("report", "Render a compare.json report");
    std::string report_path, csv_out;
    report_cmd->add_option("report", report_path)->required();
    report_cmd->add_option("--csv", csv_out, "Also write the plot-ready CSV here");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*pack_cmd)
            return cmd_pack(common, count, input, image_name);
        if (*unpack_cmd)
            return cmd_unpack(image_path, raw_out);
        if (*regions_cmd)
            return cmd_regions(common);
        if (*config_cmd)
            return cmd_config(common);
        if (*trace_cmd)
            return cmd_trace(common, target, mode);
        if (*sim_cmd)
            return cmd_sim(common, trace_path);
        if (*compare_cmd)
            return cmd_compare(common);
        if (*report_cmd)
            return cmd_report(report_path, csv_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
