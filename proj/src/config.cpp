#include "smartquant/config.hpp"

#include "smartquant/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace sq {

using nlohmann::json;

namespace {

// Rejects keys the parser does not know; typos otherwise silently fall back to defaults.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> known)
{
    if (!j.is_object())
        throw Error("config: " + where + " must be an object");
    std::set<std::string> ok(known.begin(), known.end());
    for (const auto& [key, _] : j.items())
        if (!ok.count(key))
            throw Error("config: unknown key '" + key + "' in " + where);
}

template <class T>
void take(const json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error("config: bad value for " + where + "." + key + ": " + e.what());
    }
}

json format_to_json(const FpFormat& f)
{
    if (f.is_skip())
        return {{"name", f.name}, {"skip", true}};
    return {{"name", f.name}, {"exp_bits", f.exp_bits}, {"man_bits", f.man_bits}, {"bias", f.bias}};
}

FpFormat format_from_json(const json& j)
{
    check_keys(j, "ladder entry", {"name", "skip", "exp_bits", "man_bits", "bias"});
    std::string name;
    take(j, "name", name, "ladder");
    if (name.empty())
        throw Error("config: ladder entry needs a name");
    bool skip = false;
    take(j, "skip", skip, "ladder");
    if (skip)
        return FpFormat::skip(name);
    if (!j.contains("exp_bits") || !j.contains("man_bits"))
        throw Error("config: ladder entry '" + name + "' needs exp_bits and man_bits");
    std::optional<int> bias;
    if (j.contains("bias"))
        bias = j.at("bias").get<int>();
    return FpFormat::make(name, j.at("exp_bits").get<int>(), j.at("man_bits").get<int>(), bias);
}

json dist_to_json(const ScoreDistribution& d)
{
    json out = json::array();
    for (const auto& c : d.components) {
        json e{{"weight", c.weight}};
        switch (c.kind) {
        case ScoreComponent::Kind::Uniform: e["kind"] = "uniform"; break;
        case ScoreComponent::Kind::Beta:
            e["kind"] = "beta";
            e["a"] = c.a;
            e["b"] = c.b;
            break;
        case ScoreComponent::Kind::Point:
            e["kind"] = "point";
            e["value"] = c.value;
            break;
        }
        out.push_back(e);
    }
    return out;
}

ScoreDistribution dist_from_json(const json& j, const std::string& where)
{
    if (!j.is_array())
        throw Error("config: " + where + " must be an array of components");
    ScoreDistribution d;
    for (const auto& e : j) {
        check_keys(e, where, {"kind", "weight", "a", "b", "value"});
        ScoreComponent c;
        std::string kind = "uniform";
        take(e, "kind", kind, where);
        if (kind == "uniform")
            c.kind = ScoreComponent::Kind::Uniform;
        else if (kind == "beta")
            c.kind = ScoreComponent::Kind::Beta;
        else if (kind == "point")
            c.kind = ScoreComponent::Kind::Point;
        else
            throw Error("config: unknown score component kind '" + kind + "'");
        take(e, "weight", c.weight, where);
        take(e, "a", c.a, where);
        take(e, "b", c.b, where);
        take(e, "value", c.value, where);
        d.components.push_back(c);
    }
    d.validate();
    return d;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults()
{
    ExperimentConfig c;
    // Head and neuron importance are fitted per kind; see docs/calibration.md.
    using K = ScoreComponent::Kind;
    c.importance.attention.components = {
        {K::Beta, 0.8386, 0.8970, 0.4413, 0.0},
        {K::Beta, 0.1614, 8.8178, 7.9500, 0.0},
    };
    c.importance.mlp.components = {
        {K::Beta, 0.2997, 0.2997, 0.3338, 0.0},
        {K::Beta, 0.7003, 0.5978, 0.4301, 0.0},
    };
    c.thresholds.exponents = {1.0, 2.9432, 4.0750, 9.3328, 11.6681};
    c.importance.seed = c.seed;
    c.thresholds.scope = TargetScope::QuantizedChunks;
    return c;
}

ExperimentConfig parse_config(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("config: invalid JSON: ") + e.what());
    }
    check_keys(j, "config",
               {"seed", "output_dir", "ladder", "guard", "rounding", "geometry", "importance",
                "thresholds", "targets", "device", "dram"});

    ExperimentConfig c = ExperimentConfig::defaults();
    take(j, "seed", c.seed, "config");
    c.importance.seed = c.seed;
    take(j, "output_dir", c.output_dir, "config");

    if (j.contains("ladder")) {
        std::vector<FpFormat> formats;
        for (const auto& e : j.at("ladder"))
            formats.push_back(format_from_json(e));
        c.ladder = FormatLadder(std::move(formats));
        // The calibrated exponents belong to the default ladder.
        if (c.ladder.size() != ExperimentConfig::defaults().ladder.size())
            c.thresholds.exponents.clear();
    }
    if (j.contains("guard")) {
        const json& g = j.at("guard");
        check_keys(g, "guard", {"exp_guard", "man_guard"});
        take(g, "exp_guard", c.guard.exp_guard, "guard");
        take(g, "man_guard", c.guard.man_guard, "guard");
        if (c.guard.exp_guard < 0 || c.guard.man_guard < 0)
            throw Error("config: guard bits must be non-negative");
    }
    if (j.contains("rounding"))
        c.rounding = rounding_mode_from_string(j.at("rounding").get<std::string>());

    if (j.contains("geometry")) {
        const json& g = j.at("geometry");
        check_keys(g, "geometry",
                   {"layers", "heads_per_layer", "weights_per_head", "neurons_per_layer",
                    "weights_per_neuron", "predictor_fraction", "predictor_weights_per_layer"});
        auto& m = c.geometry;
        take(g, "layers", m.layers, "geometry");
        take(g, "heads_per_layer", m.heads_per_layer, "geometry");
        take(g, "weights_per_head", m.weights_per_head, "geometry");
        take(g, "neurons_per_layer", m.neurons_per_layer, "geometry");
        take(g, "weights_per_neuron", m.weights_per_neuron, "geometry");
        if (g.contains("predictor_weights_per_layer") && g.contains("predictor_fraction"))
            throw Error("config: give predictor_fraction or predictor_weights_per_layer, not both");
        take(g, "predictor_fraction", c.predictor_fraction, "geometry");
        if (g.contains("predictor_weights_per_layer")) {
            take(g, "predictor_weights_per_layer", m.predictor_weights_per_layer, "geometry");
        } else {
            m.predictor_weights_per_layer = 0;
            m.predictor_weights_per_layer =
                ModelGeometry::predictor_weights_for(c.predictor_fraction, m.weights_per_layer());
        }
        c.predictor_fraction = m.predictor_fraction();
        m.validate();
    }
    if (j.contains("importance")) {
        const json& im = j.at("importance");
        check_keys(im, "importance", {"attention", "mlp"});
        if (im.contains("attention"))
            c.importance.attention = dist_from_json(im.at("attention"), "importance.attention");
        if (im.contains("mlp"))
            c.importance.mlp = dist_from_json(im.at("mlp"), "importance.mlp");
    }
    if (j.contains("thresholds")) {
        const json& t = j.at("thresholds");
        check_keys(t, "thresholds", {"exponents", "target_scope", "tolerance"});
        take(t, "exponents", c.thresholds.exponents, "thresholds");
        if (t.contains("target_scope"))
            c.thresholds.scope = target_scope_from_string(t.at("target_scope").get<std::string>());
        take(t, "tolerance", c.thresholds.tolerance, "thresholds");
    }
    take(j, "targets", c.targets, "config");
    for (double t : c.targets)
        if (!(t >= 0.0 && t <= 16.0))
            throw Error("config: targets must lie in [0, 16] bits/weight");

    if (j.contains("device")) {
        const json& d = j.at("device");
        check_keys(d, "device", {"plane_line_buffer"});
        take(d, "plane_line_buffer", c.plane_line_buffer, "device");
    }
    if (j.contains("dram")) {
        const json& d = j.at("dram");
        check_keys(d, "dram",
                   {"channels", "banks_per_channel", "bank_groups", "row_bytes", "burst_bytes",
                    "interleave_bytes", "clock_ns", "timing", "energy"});
        auto& m = c.dram;
        take(d, "channels", m.channels, "dram");
        take(d, "banks_per_channel", m.banks_per_channel, "dram");
        take(d, "bank_groups", m.bank_groups, "dram");
        take(d, "row_bytes", m.row_bytes, "dram");
        take(d, "burst_bytes", m.burst_bytes, "dram");
        take(d, "interleave_bytes", m.interleave_bytes, "dram");
        take(d, "clock_ns", m.clock_ns, "dram");
        if (d.contains("timing")) {
            const json& t = d.at("timing");
            check_keys(t, "dram.timing",
                       {"tRCD", "tCL", "tRP", "tRAS", "tCCD_L", "tCCD_S", "burst_cycles"});
            take(t, "tRCD", m.timing.tRCD, "dram.timing");
            take(t, "tCL", m.timing.tCL, "dram.timing");
            take(t, "tRP", m.timing.tRP, "dram.timing");
            take(t, "tRAS", m.timing.tRAS, "dram.timing");
            take(t, "tCCD_L", m.timing.tCCD_L, "dram.timing");
            take(t, "tCCD_S", m.timing.tCCD_S, "dram.timing");
            take(t, "burst_cycles", m.timing.burst_cycles, "dram.timing");
        }
        if (d.contains("energy")) {
            const json& e = d.at("energy");
            check_keys(e, "dram.energy", {"e_act_pj", "e_rd_pj", "p_bg_mw"});
            take(e, "e_act_pj", m.energy.e_act_pj, "dram.energy");
            take(e, "e_rd_pj", m.energy.e_rd_pj, "dram.energy");
            take(e, "p_bg_mw", m.energy.p_bg_mw, "dram.energy");
        }
        m.validate();
    }
    // Cross-check ladder against thresholds now rather than mid-run.
    c.thresholds.at(0.5, c.ladder.size());
    c.ladder.fp16_index();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c, int indent)
{
    json ladder = json::array();
    for (const auto& f : c.ladder.formats())
        ladder.push_back(format_to_json(f));
    const auto& g = c.geometry;
    const auto& d = c.dram;
    json j{
        {"seed", c.seed},
        {"output_dir", c.output_dir},
        {"ladder", ladder},
        {"guard", {{"exp_guard", c.guard.exp_guard}, {"man_guard", c.guard.man_guard}}},
        {"rounding", std::string(to_string(c.rounding))},
        {"geometry",
         {{"layers", g.layers},
          {"heads_per_layer", g.heads_per_layer},
          {"weights_per_head", g.weights_per_head},
          {"neurons_per_layer", g.neurons_per_layer},
          {"weights_per_neuron", g.weights_per_neuron},
          {"predictor_weights_per_layer", g.predictor_weights_per_layer}}},
        {"importance",
         {{"attention", dist_to_json(c.importance.attention)}, {"mlp", dist_to_json(c.importance.mlp)}}},
        {"thresholds",
         {{"exponents", c.thresholds.exponents},
          {"target_scope", std::string(to_string(c.thresholds.scope))},
          {"tolerance", c.thresholds.tolerance}}},
        {"targets", c.targets},
        {"device", {{"plane_line_buffer", c.plane_line_buffer}}},
        {"dram",
         {{"channels", d.channels},
          {"banks_per_channel", d.banks_per_channel},
          {"bank_groups", d.bank_groups},
          {"row_bytes", d.row_bytes},
          {"burst_bytes", d.burst_bytes},
          {"interleave_bytes", d.interleave_bytes},
          {"clock_ns", d.clock_ns},
          {"timing",
           {{"tRCD", d.timing.tRCD},
            {"tCL", d.timing.tCL},
            {"tRP", d.timing.tRP},
            {"tRAS", d.timing.tRAS},
            {"tCCD_L", d.timing.tCCD_L},
            {"tCCD_S", d.timing.tCCD_S},
            {"burst_cycles", d.timing.burst_cycles}}},
          {"energy",
           {{"e_act_pj", d.energy.e_act_pj},
            {"e_rd_pj", d.energy.e_rd_pj},
            {"p_bg_mw", d.energy.p_bg_mw}}}}},
    };
    return j.dump(indent);
}

}  // namespace sq
