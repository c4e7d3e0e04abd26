#include "smartquant/compare.hpp"

#include "smartquant/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <future>
#include <sstream>

namespace sq {

using nlohmann::json;

namespace {

std::size_t kind_index(ChunkKind k) { return static_cast<std::size_t>(k); }

constexpr std::array<ChunkKind, kNumKinds> kKinds{ChunkKind::AttentionHead, ChunkKind::MlpNeuron,
                                                  ChunkKind::Predictor};

}  // namespace

Experiment::Experiment(const ExperimentConfig& config)
    : config_(config),
      directory_(enumerate_chunks(config.geometry)),
      regions_(build_regions(directory_.num_weights(), config.ladder)),
      planes_(PlaneLayout::for_weights(directory_.num_weights())),
      traditional_(TraditionalLayout::from_directory(directory_))
{
    config_.dram.validate();
    for (const Chunk& c : directory_.chunks())
        kind_weights_[kind_index(c.kind)] += c.length;
}

std::uint64_t Experiment::weights_of(ChunkKind kind) const { return kind_weights_[kind_index(kind)]; }

std::vector<PhysicalRequest> Experiment::trace(const FormatAssignment& assignment, LoadMode mode) const
{
    const TraceContext ctx{directory_, config_.ladder, regions_,       planes_,
                           traditional_, config_.guard, config_.plane_line_buffer};
    return gen_trace(assignment, mode, ctx);
}

ModeMetrics Experiment::evaluate(const FormatAssignment& assignment, LoadMode mode) const
{
    const std::vector<PhysicalRequest> requests = trace(assignment, mode);
    const CommandStream stream = schedule(config_.dram, requests);
    const SimResult sim = simulate(config_.dram, stream);

    ModeMetrics m;
    m.mode = mode;
    m.requests = requests.size();
    m.total_cycles = sim.total_cycles;
    m.total_ns = sim.total_ns;
    m.energy_pj = sim.energy_pj;
    m.activates = sim.activates;
    m.reads = sim.reads;
    m.breakdown = energy_breakdown(sim, stream.request_tags);
    for (ChunkKind k : kKinds) {
        const auto w = weights_of(k);
        m.energy_per_weight_pj[kind_index(k)] = w ? m.breakdown.energy_of(k) / static_cast<double>(w) : 0.0;
    }

    // A chunk's load latency is the time by which it pushes out the running
    // completion frontier of the trace.
    std::vector<double> chunk_cycles(directory_.size(), 0.0);
    std::uint64_t frontier = 0;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        const std::uint64_t done = sim.requests[i].completion_cycle;
        if (done > frontier) {
            if (requests[i].chunk != kNoChunk)
                chunk_cycles[requests[i].chunk] += static_cast<double>(done - frontier);
            frontier = done;
        }
    }
    std::array<double, kNumKinds> sum{};
    std::array<std::uint64_t, kNumKinds> count{};
    for (const Chunk& c : directory_.chunks()) {
        sum[kind_index(c.kind)] += chunk_cycles[c.id];
        ++count[kind_index(c.kind)];
    }
    for (std::size_t k = 0; k < kNumKinds; ++k)
        m.chunk_latency_ns[k] = count[k] ? sum[k] / static_cast<double>(count[k]) * config_.dram.clock_ns : 0.0;
    return m;
}

double reduction_pct(double base, double ours) { return base > 0 ? 100.0 * (1.0 - ours / base) : 0.0; }

double TargetResult::energy_reduction(ChunkKind k) const
{
    return reduction_pct(traditional.energy_per_weight_pj[kind_index(k)],
                         smartquant.energy_per_weight_pj[kind_index(k)]);
}

double TargetResult::latency_reduction(ChunkKind k) const
{
    return reduction_pct(traditional.chunk_latency_ns[kind_index(k)],
                         smartquant.chunk_latency_ns[kind_index(k)]);
}

double TargetResult::total_energy_reduction() const
{
    return reduction_pct(traditional.energy_pj.total, smartquant.energy_pj.total);
}

FormatAssignment assignment_for_target(const Experiment& experiment, const ChunkScores& scores,
                                       double target_bits, ThresholdSet* thresholds_out)
{
    const auto& cfg = experiment.config();
    ThresholdSet t = solve_thresholds(scores, experiment.directory(), cfg.ladder, target_bits, cfg.thresholds);
    FormatAssignment a = assign_formats(scores, t, experiment.directory(), cfg.ladder);
    if (thresholds_out)
        *thresholds_out = std::move(t);
    return a;
}

ComparisonReport run_comparison(const ExperimentConfig& config)
{
    const Experiment exp(config);
    const ChunkScores scores = gen_scores(exp.directory(), config.importance);
    ComparisonReport report{config, {}};
    std::vector<FormatAssignment> assignments;
    for (double target : config.targets) {
        TargetResult r;
        r.target_bits = target;
        ThresholdSet t;
        FormatAssignment a = assignment_for_target(exp, scores, target, &t);
        r.thresholds = t.values;
        r.avg_bits_model = avg_bits(a, exp.directory(), config.ladder);
        r.avg_bits_quantized = avg_bits_quantized(a, exp.directory(), config.ladder);
        for (auto& v : r.format_weights)
            v.assign(config.ladder.size(), 0);
        for (const Chunk& c : exp.directory().chunks())
            r.format_weights[kind_index(c.kind)][a.format[c.id]] += c.length;
        const auto bits = fetched_payload_bits(a, exp.directory(), config.ladder, config.guard);
        const std::uint64_t all_bits = bits[0] + bits[1] + bits[2];
        r.predictor_bit_share =
            all_bits ? static_cast<double>(bits[kind_index(ChunkKind::Predictor)]) / static_cast<double>(all_bits) : 0.0;
        report.results.push_back(std::move(r));
        assignments.push_back(std::move(a));
    }

    // Grid points are independent; results are joined in target order.
    std::vector<std::future<ModeMetrics>> jobs;
    for (const FormatAssignment& a : assignments)
        for (LoadMode mode : {LoadMode::Traditional, LoadMode::SmartQuant})
            jobs.push_back(std::async(std::launch::async, [&exp, &a, mode] { return exp.evaluate(a, mode); }));
    for (std::size_t i = 0; i < report.results.size(); ++i) {
        TargetResult& r = report.results[i];
        r.traditional = jobs[2 * i].get();
        r.smartquant = jobs[2 * i + 1].get();
        r.predictor_byte_share = predictor_share(r.smartquant.breakdown);
    }
    return report;
}

namespace {

json kinds_json(const std::array<double, kNumKinds>& v)
{
    json j;
    for (ChunkKind k : kKinds)
        j[std::string(to_string(k))] = v[kind_index(k)];
    return j;
}

json mode_json(const ModeMetrics& m)
{
    return {
        {"requests", m.requests},
        {"total_cycles", m.total_cycles},
        {"total_ns", m.total_ns},
        {"activates", m.activates},
        {"reads", m.reads},
        {"bytes", m.breakdown.total_bytes()},
        {"energy_pj",
         {{"activation", m.energy_pj.activation},
          {"read", m.energy_pj.read},
          {"background", m.energy_pj.background},
          {"total", m.energy_pj.total}}},
        {"energy_by_kind_pj",
         {{"attention", m.breakdown.attention}, {"mlp", m.breakdown.mlp}, {"predictor", m.breakdown.predictor}}},
        {"bytes_by_kind",
         {{"attention", m.breakdown.attention_bytes},
          {"mlp", m.breakdown.mlp_bytes},
          {"predictor", m.breakdown.predictor_bytes}}},
        {"energy_per_weight_pj", kinds_json(m.energy_per_weight_pj)},
        {"chunk_latency_ns", kinds_json(m.chunk_latency_ns)},
    };
}

}  // namespace

std::string report_json(const ComparisonReport& report)
{
    json results = json::array();
    for (const TargetResult& r : report.results) {
        json mix;
        for (ChunkKind k : kKinds) {
            json per;
            for (std::size_t f = 0; f < report.config.ladder.size(); ++f)
                per[report.config.ladder[f].name] = r.format_weights[kind_index(k)][f];
            mix[std::string(to_string(k))] = per;
        }
        results.push_back({
            {"target_bits", r.target_bits},
            {"thresholds", r.thresholds},
            {"avg_bits_model", r.avg_bits_model},
            {"avg_bits_quantized", r.avg_bits_quantized},
            {"format_weights", mix},
            {"traditional", mode_json(r.traditional)},
            {"smartquant", mode_json(r.smartquant)},
            {"predictor_bit_share", r.predictor_bit_share},
            {"predictor_byte_share", r.predictor_byte_share},
            {"reduction_pct",
             {{"attention_energy", r.energy_reduction(ChunkKind::AttentionHead)},
              {"mlp_energy", r.energy_reduction(ChunkKind::MlpNeuron)},
              {"attention_latency", r.latency_reduction(ChunkKind::AttentionHead)},
              {"mlp_latency", r.latency_reduction(ChunkKind::MlpNeuron)},
              {"total_energy", r.total_energy_reduction()}}},
        });
    }
    json j{
        {"schema", "smartquant.compare"},
        {"version", kReportSchemaVersion},
        {"config", json::parse(dump_config(report.config))},
        {"results", results},
    };
    return j.dump(2);
}

namespace {

json parse_report(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("report: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("schema", "") != "smartquant.compare")
        throw Error("report: not a smartquant.compare document");
    const int version = j.value("version", -1);
    if (version != kReportSchemaVersion)
        throw Error("report: unsupported schema version " + std::to_string(version) + " (expected " +
                    std::to_string(kReportSchemaVersion) + ")");
    if (!j.contains("results") || !j.at("results").is_array())
        throw Error("report: missing results");
    return j;
}

}  // namespace

std::string report_csv(const ComparisonReport& report) { return report_csv_from_json(report_json(report)); }

std::string report_csv_from_json(std::string_view text)
{
    const json j = parse_report(text);
    std::ostringstream out;
    out << "target_bits,avg_bits_model,avg_bits_quantized,"
           "trad_attention_pj_per_weight,sq_attention_pj_per_weight,"
           "trad_mlp_pj_per_weight,sq_mlp_pj_per_weight,"
           "trad_attention_latency_ns,sq_attention_latency_ns,"
           "trad_mlp_latency_ns,sq_mlp_latency_ns,"
           "attention_energy_reduction_pct,mlp_energy_reduction_pct,"
           "attention_latency_reduction_pct,mlp_latency_reduction_pct,"
           "total_energy_reduction_pct,predictor_bit_share,predictor_byte_share,trad_bytes,sq_bytes\n";
    char buf[64];
    auto num = [&](const json& v) {
        std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
        return std::string(buf);
    };
    for (const auto& r : j.at("results")) {
        const auto& t = r.at("traditional");
        const auto& s = r.at("smartquant");
        const auto& red = r.at("reduction_pct");
        out << num(r.at("target_bits")) << ',' << num(r.at("avg_bits_model")) << ','
            << num(r.at("avg_bits_quantized")) << ',' << num(t.at("energy_per_weight_pj").at("attention")) << ','
            << num(s.at("energy_per_weight_pj").at("attention")) << ','
            << num(t.at("energy_per_weight_pj").at("mlp")) << ',' << num(s.at("energy_per_weight_pj").at("mlp"))
            << ',' << num(t.at("chunk_latency_ns").at("attention")) << ','
            << num(s.at("chunk_latency_ns").at("attention")) << ',' << num(t.at("chunk_latency_ns").at("mlp"))
            << ',' << num(s.at("chunk_latency_ns").at("mlp")) << ',' << num(red.at("attention_energy")) << ','
            << num(red.at("mlp_energy")) << ',' << num(red.at("attention_latency")) << ','
            << num(red.at("mlp_latency")) << ',' << num(red.at("total_energy")) << ','
            << num(r.at("predictor_bit_share")) << ',' << num(r.at("predictor_byte_share")) << ',' << t.at("bytes").get<std::uint64_t>() << ','
            << s.at("bytes").get<std::uint64_t>() << '\n';
    }
    return out.str();
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& body)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw Error("cannot write " + p.string());
    out << body;
    if (!out)
        throw Error("write failed: " + p.string());
}

std::string utc_now()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

void write_report(const ComparisonReport& report, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_file(dir / "compare.json", report_json(report) + "\n");
    write_file(dir / "compare.csv", report_csv(report));
    // Kept apart so compare.json is byte-identical across reruns.
    json prov{{"generated_utc", utc_now()}, {"tool", "sqsim"}, {"schema_version", kReportSchemaVersion}};
    write_file(dir / "provenance.json", prov.dump(2) + "\n");
}

std::string render_report(std::string_view text)
{
    const json j = parse_report(text);
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%7s %7s | %-23s | %-23s | %-23s | %6s\n", "target", "bits",
                  "attn pJ/w trad/sq (red)", "mlp pJ/w trad/sq (red)", "attn us trad/sq (red)", "pred%");
    out << line;
    for (const auto& r : j.at("results")) {
        const auto& t = r.at("traditional");
        const auto& s = r.at("smartquant");
        const auto& red = r.at("reduction_pct");
        std::snprintf(line, sizeof line,
                      "%7.2f %7.3f | %7.1f/%7.1f (%5.1f) | %7.1f/%7.1f (%5.1f) | %7.2f/%7.2f (%5.1f) | %6.1f\n",
                      r.at("target_bits").get<double>(), r.at("avg_bits_quantized").get<double>(),
                      t.at("energy_per_weight_pj").at("attention").get<double>(),
                      s.at("energy_per_weight_pj").at("attention").get<double>(),
                      red.at("attention_energy").get<double>(),
                      t.at("energy_per_weight_pj").at("mlp").get<double>(),
                      s.at("energy_per_weight_pj").at("mlp").get<double>(), red.at("mlp_energy").get<double>(),
                      t.at("chunk_latency_ns").at("attention").get<double>() / 1000.0,
                      s.at("chunk_latency_ns").at("attention").get<double>() / 1000.0,
                      red.at("attention_latency").get<double>(), 100.0 * r.at("predictor_bit_share").get<double>());
        out << line;
    }
    return out.str();
}

std::string assignment_csv(const ChunkDirectory& directory, const ChunkScores& scores,
                           const FormatAssignment& assignment, const FormatLadder& ladder)
{
    std::ostringstream out;
    out << "chunk_id,kind,score,format\n";
    char buf[32];
    for (std::size_t i = 0; i < directory.size(); ++i) {
        out << directory[i].id << ',' << to_string(directory[i].kind) << ',';
        if (scores[i]) {
            std::snprintf(buf, sizeof buf, "%.9g", *scores[i]);
            out << buf;
        }
        out << ',' << ladder[assignment.format[i]].name << '\n';
    }
    return out.str();
}

}  // namespace sq
