#include "smartquant/workload.hpp"

#include "smartquant/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sq {

void ModelGeometry::validate() const
{
    if (layers == 0)
        throw Error("geometry: layers must be positive");
    if ((heads_per_layer == 0) != (weights_per_head == 0) && heads_per_layer != 0)
        throw Error("geometry: heads need a positive weight count");
    if (neurons_per_layer != 0 && weights_per_neuron == 0)
        throw Error("geometry: neurons need a positive weight count");
    if (weights_per_layer() == 0)
        throw Error("geometry: a layer must contain at least one weight");
}

std::uint64_t ModelGeometry::weights_per_layer() const
{
    return static_cast<std::uint64_t>(heads_per_layer) * weights_per_head +
           static_cast<std::uint64_t>(neurons_per_layer) * weights_per_neuron +
           predictor_weights_per_layer;
}

double ModelGeometry::predictor_fraction() const
{
    return static_cast<double>(predictor_weights_per_layer) / static_cast<double>(weights_per_layer());
}

std::uint64_t ModelGeometry::predictor_weights_for(double fraction, std::uint64_t quantized_per_layer)
{
    if (!(fraction >= 0.0 && fraction < 1.0))
        throw Error("predictor fraction must be in [0, 1)");
    return static_cast<std::uint64_t>(
        std::llround(fraction / (1.0 - fraction) * static_cast<double>(quantized_per_layer)));
}

ModelGeometry ModelGeometry::scaled_opt30b(double predictor_fraction)
{
    ModelGeometry g{2, 8, 36'864, 512, 7'200, 0};
    g.predictor_weights_per_layer = predictor_weights_for(predictor_fraction, g.weights_per_layer());
    return g;
}

ModelGeometry ModelGeometry::opt30b(double predictor_fraction)
{
    ModelGeometry g{48, 56, 3'700'000, 28'672, 7'200, 0};
    g.predictor_weights_per_layer = predictor_weights_for(predictor_fraction, g.weights_per_layer());
    return g;
}

ChunkDirectory enumerate_chunks(const ModelGeometry& geometry)
{
    geometry.validate();
    std::vector<Chunk> chunks;
    std::uint64_t pos = 0;
    std::uint32_t id = 0;
    auto add = [&](std::uint64_t len, ChunkKind kind) {
        chunks.push_back(Chunk{id++, pos, len, kind});
        pos += len;
    };
    for (std::uint32_t l = 0; l < geometry.layers; ++l) {
        for (std::uint32_t h = 0; h < geometry.heads_per_layer; ++h)
            add(geometry.weights_per_head, ChunkKind::AttentionHead);
        for (std::uint32_t n = 0; n < geometry.neurons_per_layer; ++n)
            add(geometry.weights_per_neuron, ChunkKind::MlpNeuron);
        if (geometry.predictor_weights_per_layer > 0)
            add(geometry.predictor_weights_per_layer, ChunkKind::Predictor);
    }
    return ChunkDirectory(std::move(chunks));
}

ScoreDistribution ScoreDistribution::uniform() { return {{ScoreComponent{}}}; }

ScoreDistribution ScoreDistribution::beta(double a, double b)
{
    ScoreComponent c;
    c.kind = ScoreComponent::Kind::Beta;
    c.a = a;
    c.b = b;
    return {{c}};
}

ScoreDistribution ScoreDistribution::two_point(double low, double high, double p_high)
{
    ScoreComponent lo, hi;
    lo.kind = hi.kind = ScoreComponent::Kind::Point;
    lo.value = low;
    lo.weight = 1.0 - p_high;
    hi.value = high;
    hi.weight = p_high;
    return {{lo, hi}};
}

void ScoreDistribution::validate() const
{
    if (components.empty())
        throw Error("score distribution has no components");
    double total = 0;
    for (const auto& c : components) {
        if (!(c.weight >= 0))
            throw Error("score distribution: component weights must be non-negative");
        if (c.kind == ScoreComponent::Kind::Beta && !(c.a > 0 && c.b > 0))
            throw Error("score distribution: beta parameters must be positive");
        if (c.kind == ScoreComponent::Kind::Point && !(c.value >= 0 && c.value <= 1))
            throw Error("score distribution: point mass must lie in [0, 1]");
        total += c.weight;
    }
    if (!(total > 0))
        throw Error("score distribution: total component weight must be positive");
}

double ScoreDistribution::mean() const
{
    double total = 0, acc = 0;
    for (const auto& c : components) {
        double m = 0.5;
        if (c.kind == ScoreComponent::Kind::Beta)
            m = c.a / (c.a + c.b);
        else if (c.kind == ScoreComponent::Kind::Point)
            m = c.value;
        acc += c.weight * m;
        total += c.weight;
    }
    return acc / total;
}

namespace {

double sample(const ScoreDistribution& dist, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double total = 0;
    for (const auto& c : dist.components)
        total += c.weight;
    double pick = unit(rng) * total;
    const ScoreComponent* chosen = &dist.components.back();
    for (const auto& c : dist.components) {
        if (pick < c.weight) {
            chosen = &c;
            break;
        }
        pick -= c.weight;
    }
    switch (chosen->kind) {
    case ScoreComponent::Kind::Uniform:
        return unit(rng);
    case ScoreComponent::Kind::Point:
        return chosen->value;
    case ScoreComponent::Kind::Beta: {
        std::gamma_distribution<double> ga(chosen->a, 1.0), gb(chosen->b, 1.0);
        const double x = ga(rng);
        const double y = gb(rng);
        const double s = x + y > 0 ? x / (x + y) : 0.0;
        return std::clamp(s, 0.0, 1.0);
    }
    }
    return 0.0;
}

}  // namespace

ChunkScores gen_scores(const ChunkDirectory& directory, const ImportanceModel& model)
{
    model.attention.validate();
    model.mlp.validate();
    // Separate streams keep head scores independent of the neuron count.
    std::mt19937_64 head_rng(model.seed * 2 + 1);
    std::mt19937_64 neuron_rng(model.seed * 2 + 2);
    ChunkScores out(directory.size());
    for (std::size_t i = 0; i < directory.size(); ++i) {
        switch (directory[i].kind) {
        case ChunkKind::AttentionHead: out[i] = sample(model.attention, head_rng); break;
        case ChunkKind::MlpNeuron: out[i] = sample(model.mlp, neuron_rng); break;
        case ChunkKind::Predictor: break;
        }
    }
    return out;
}

void ThresholdSet::validate(std::size_t ladder_size) const
{
    if (ladder_size < 1 || values.size() + 1 != ladder_size)
        throw Error("threshold count must be one less than the ladder size");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0 && values[i] <= 1.0))
            throw Error("thresholds must lie in [0, 1]");
        if (i > 0 && !(values[i] < values[i - 1]))
            throw Error("thresholds must be strictly decreasing");
    }
}

std::size_t ThresholdSet::bucket(double score) const
{
    for (std::size_t k = 0; k < values.size(); ++k)
        if (score >= values[k])
            return k;
    return values.size();
}

FormatAssignment assign_formats(const ChunkScores& scores, const ThresholdSet& thresholds,
                                const ChunkDirectory& directory, const FormatLadder& ladder)
{
    thresholds.validate(ladder.size());
    if (scores.size() != directory.size())
        throw Error("assign_formats: one score per chunk required");
    const std::size_t fp16 = ladder.fp16_index();
    FormatAssignment out;
    out.format.resize(directory.size());
    for (std::size_t i = 0; i < directory.size(); ++i) {
        if (directory[i].kind == ChunkKind::Predictor) {
            out.format[i] = fp16;
        } else {
            if (!scores[i])
                throw Error("assign_formats: missing score for chunk " + std::to_string(i));
            out.format[i] = thresholds.bucket(*scores[i]);
        }
    }
    return out;
}

namespace {

double weighted_bits(const FormatAssignment& assignment, const ChunkDirectory& directory,
                     const FormatLadder& ladder, bool include_predictors)
{
    if (assignment.format.size() != directory.size())
        throw Error("avg_bits: assignment does not cover the directory");
    double bits = 0, weights = 0;
    for (std::size_t i = 0; i < directory.size(); ++i) {
        const Chunk& c = directory[i];
        const bool pred = c.kind == ChunkKind::Predictor;
        if (pred && !include_predictors)
            continue;
        const int n = pred ? 16 : ladder[assignment.format[i]].total_bits();
        bits += static_cast<double>(c.length) * n;
        weights += static_cast<double>(c.length);
    }
    return weights > 0 ? bits / weights : 0.0;
}

}  // namespace

double avg_bits(const FormatAssignment& assignment, const ChunkDirectory& directory,
                const FormatLadder& ladder)
{
    return weighted_bits(assignment, directory, ladder, true);
}

double avg_bits_quantized(const FormatAssignment& assignment, const ChunkDirectory& directory,
                          const FormatLadder& ladder)
{
    return weighted_bits(assignment, directory, ladder, false);
}

std::string_view to_string(TargetScope scope)
{
    return scope == TargetScope::WholeModel ? "whole_model" : "quantized_chunks";
}

TargetScope target_scope_from_string(std::string_view s)
{
    if (s == "whole_model")
        return TargetScope::WholeModel;
    if (s == "quantized_chunks")
        return TargetScope::QuantizedChunks;
    throw Error("unknown target scope: " + std::string(s));
}

ThresholdSet ThresholdFamily::at(double lambda, std::size_t ladder_size) const
{
    if (ladder_size < 2)
        throw Error("threshold family needs at least two formats");
    std::vector<double> e = exponents;
    if (e.empty())
        for (std::size_t k = 1; k < ladder_size; ++k)
            e.push_back(static_cast<double>(k));
    if (e.size() + 1 != ladder_size)
        throw Error("threshold exponent count must be one less than the ladder size");
    ThresholdSet t;
    for (double ek : e)
        t.values.push_back(std::pow(lambda, ek));
    return t;
}

ThresholdSet solve_thresholds(const ChunkScores& scores, const ChunkDirectory& directory,
                              const FormatLadder& ladder, double target_avg_bits,
                              const ThresholdFamily& family)
{
    if (scores.size() != directory.size())
        throw Error("solve_thresholds: one score per chunk required");
    const std::size_t s = ladder.size();
    const ThresholdSet unit = family.at(0.5, s);  // validates exponent count
    std::vector<double> e(unit.values.size());
    for (std::size_t k = 0; k < e.size(); ++k)
        e[k] = std::log(unit.values[k]) / std::log(0.5);
    for (std::size_t k = 0; k < e.size(); ++k)
        if (!(e[k] > 0) || (k > 0 && !(e[k] > e[k - 1])))
            throw Error("threshold exponents must be positive and strictly increasing");

    // avg_bits is a non-increasing step function of lambda; its steps sit at
    // lambda = score^(1/e_k). Evaluate between consecutive steps.
    std::vector<double> steps;
    for (const auto& sc : scores)
        if (sc && *sc > 0.0 && *sc < 1.0)
            for (double ek : e)
                steps.push_back(std::pow(*sc, 1.0 / ek));
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    std::vector<double> probes;
    double prev = 0.0;
    for (double st : steps) {
        probes.push_back(0.5 * (prev + st));
        prev = st;
    }
    probes.push_back(0.5 * (prev + 1.0));

    const bool whole = family.scope == TargetScope::WholeModel;
    auto eval = [&](double lambda) {
        const ThresholdSet t = family.at(lambda, s);
        const FormatAssignment a = assign_formats(scores, t, directory, ladder);
        return whole ? avg_bits(a, directory, ladder) : avg_bits_quantized(a, directory, ladder);
    };

    const double hi_bits = eval(probes.front());
    const double lo_bits = eval(probes.back());
    auto range_msg = [&] {
        return " (achievable range [" + std::to_string(lo_bits) + ", " + std::to_string(hi_bits) + "])";
    };
    if (target_avg_bits > hi_bits + family.tolerance || target_avg_bits < lo_bits - family.tolerance)
        throw Error("infeasible target " + std::to_string(target_avg_bits) + " bits/weight" + range_msg());

    // First probe whose average falls to or below the target.
    std::size_t lo = 0, hi = probes.size() - 1;
    if (eval(probes[hi]) > target_avg_bits) {
        lo = hi;
    } else {
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (eval(probes[mid]) <= target_avg_bits)
                hi = mid;
            else
                lo = mid + 1;
        }
    }
    std::size_t best = lo;
    if (lo > 0 && std::fabs(eval(probes[lo - 1]) - target_avg_bits) < std::fabs(eval(probes[lo]) - target_avg_bits))
        best = lo - 1;
    const double got = eval(probes[best]);
    if (std::fabs(got - target_avg_bits) > family.tolerance)
        throw Error("infeasible target " + std::to_string(target_avg_bits) +
                    " bits/weight: closest achievable is " + std::to_string(got) + range_msg());
    return family.at(probes[best], s);
}

std::string_view to_string(LoadMode mode)
{
    return mode == LoadMode::Traditional ? "traditional" : "smartquant";
}

LoadMode load_mode_from_string(std::string_view s)
{
    if (s == "traditional")
        return LoadMode::Traditional;
    if (s == "smartquant")
        return LoadMode::SmartQuant;
    throw Error("unknown load mode: " + std::string(s));
}

std::vector<PhysicalRequest> gen_trace(const FormatAssignment& assignment, LoadMode mode,
                                       const TraceContext& ctx)
{
    if (assignment.format.size() != ctx.directory.size())
        throw Error("gen_trace: assignment does not cover the directory");
    std::vector<PhysicalRequest> out;
    PlaneLineBuffer buffer;
    for (std::size_t i = 0; i < ctx.directory.size(); ++i) {
        const Chunk& c = ctx.directory[i];
        const std::size_t fi = assignment.format[i];
        const FpFormat& format = ctx.ladder[fi];
        if (format.is_skip())
            continue;
        std::vector<PhysicalRequest> reqs;
        if (mode == LoadMode::Traditional) {
            reqs = translate_traditional(format, c.range(), ctx.traditional);
        } else {
            const LogicalRead read = region_read(ctx.regions.region_for(fi), c.range());
            reqs = translate(resolve(ctx.regions, read), ctx.guard, ctx.planes);
            if (ctx.plane_line_buffer)
                reqs = buffer.filter(std::move(reqs));
        }
        for (PhysicalRequest& r : reqs) {
            r.tag = c.kind;
            r.chunk = c.id;
            out.push_back(r);
        }
    }
    return out;
}

std::array<std::uint64_t, 3> fetched_payload_bits(const FormatAssignment& assignment,
                                                  const ChunkDirectory& directory,
                                                  const FormatLadder& ladder, const GuardConfig& guard)
{
    if (assignment.format.size() != directory.size())
        throw Error("fetched_payload_bits: assignment does not cover the directory");
    std::array<std::uint64_t, 3> bits{};
    for (std::size_t i = 0; i < directory.size(); ++i) {
        const FpFormat& f = ladder[assignment.format[i]];
        if (f.is_skip())
            continue;
        bits[static_cast<std::size_t>(directory[i].kind)] +=
            directory[i].length * static_cast<std::uint64_t>(plane_set(f, guard).size());
    }
    return bits;
}

double predictor_share(const CategoryEnergy& breakdown)
{
    const auto total = breakdown.total_bytes();
    return total ? static_cast<double>(breakdown.predictor_bytes) / static_cast<double>(total) : 0.0;
}

double predictor_energy_share(const CategoryEnergy& breakdown)
{
    const double total = breakdown.total();
    return total > 0 ? breakdown.predictor / total : 0.0;
}

}  // namespace sq
