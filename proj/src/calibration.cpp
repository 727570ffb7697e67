// Copyright 2026 The aopvos Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "aopvos/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "aopvos/errors.hpp"

namespace aopvos {

namespace {

std::string stage_prefix(std::size_t stage) { return "calib/stage" + std::to_string(stage); }

void declare_conditioning(ParamTable& t, const std::string& prefix, std::size_t in, std::size_t width) {
    layers::declare_dense(t, prefix + "/phi", in, 1);
    layers::declare_dense(t, prefix + "/mlp1", in, width);
    layers::declare_dense(t, prefix + "/mlp2", width, width);
}

ConditioningWeights conditioning_weights(const WeightBundle& w, const std::string& prefix, std::size_t in,
                                         std::size_t width) {
    return {layers::dense(w, prefix + "/phi", in, 1), layers::dense(w, prefix + "/mlp1", in, width),
            layers::dense(w, prefix + "/mlp2", width, width)};
}

} // namespace

void CascadeConfig::validate() const {
    if (num_stages == 0)
        throw ConfigError("cascade needs at least one stage");
    if (!(beta >= 0.0 && beta < 1.0))
        throw ConfigError("beta must lie in [0, 1)");
    for (auto s : upsample_stages)
        if (s == 0 || s > num_stages)
            throw ConfigError("upsample stage " + std::to_string(s) + " outside 1.." + std::to_string(num_stages));
    if (lowlevel_stage == 0 || lowlevel_stage > num_stages)
        throw ConfigError("low-level stage " + std::to_string(lowlevel_stage) + " outside 1.." +
                          std::to_string(num_stages));
}

std::size_t CascadeConfig::scale_after(std::size_t stage) const {
    std::size_t scale = 1;
    for (auto s : upsample_stages)
        if (s <= stage)
            scale *= 2;
    return scale;
}

ParamTable calibration_parameter_table(const CascadeConfig& cfg, const CalibrationDims& dims) {
    cfg.validate();
    const std::size_t cm = dims.proto_channels;
    ParamTable t;
    for (std::size_t l = 1; l <= cfg.num_stages; ++l) {
        const auto p = stage_prefix(l);
        declare_conditioning(t, p + "/cl1", cm, cm);
        declare_conditioning(t, p + "/cl2", cm, cm);
        declare_conditioning(t, p + "/cl3", dims.proxy_channels, cm);
        layers::declare_dense(t, p + "/agg", cm, cm);
        layers::declare_dense(t, p + "/fuse/mlp1", 3 * cm, cm);
        layers::declare_dense(t, p + "/fuse/mlp2", cm, cm);
        layers::declare_conv3x3(t, p + "/dec/conv1", cm, cm);
        layers::declare_conv3x3(t, p + "/dec/conv2", cm, cm);
        if (l == cfg.lowlevel_stage)
            layers::declare_dense(t, p + "/lowlevel", cm + dims.low_level_channels, cm);
    }
    layers::declare_dense(t, "calib/head", cm, 1);
    return t;
}

StageWeights stage_weights(const WeightBundle& w, std::size_t stage, const CascadeConfig& cfg,
                           const CalibrationDims& dims) {
    const std::size_t cm = dims.proto_channels;
    const auto p = stage_prefix(stage);
    StageWeights s{
        conditioning_weights(w, p + "/cl1", cm, cm),
        conditioning_weights(w, p + "/cl2", cm, cm),
        conditioning_weights(w, p + "/cl3", dims.proxy_channels, cm),
        layers::dense(w, p + "/agg", cm, cm),
        layers::dense(w, p + "/fuse/mlp1", 3 * cm, cm),
        layers::dense(w, p + "/fuse/mlp2", cm, cm),
        layers::conv3x3(w, p + "/dec/conv1", cm, cm),
        layers::conv3x3(w, p + "/dec/conv2", cm, cm),
        std::nullopt,
    };
    if (stage == cfg.lowlevel_stage)
        s.lowlevel = layers::dense(w, p + "/lowlevel", cm + dims.low_level_channels, cm);
    return s;
}

FeatureMap confidence_gate(const FeatureMap& values, double beta) {
    if (!(beta >= 0.0 && beta < 1.0))
        throw ArgumentError("confidence_gate: beta must lie in [0, 1)");
    if (values.channels() != 1)
        throw DimensionError("confidence_gate: expects a single-channel map");
    const std::size_t m = values.cells();
    const auto rank = static_cast<std::size_t>(std::floor(beta * static_cast<double>(m) + 1e-9));
    if (rank == 0)
        return values;
    std::vector<float> sorted(values.data().begin(), values.data().end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
    const float threshold = sorted[rank - 1];
    FeatureMap out = values;
    for (auto& v : out.data())
        if (!(v >= threshold))
            v = 0.0f;
    return out;
}

ConditionCode conditioning_layer(const FeatureMap& z_in, const ConditioningWeights& w, double beta) {
    if (z_in.channels() != w.mlp1.in)
        throw DimensionError("conditioning_layer: input has " + std::to_string(z_in.channels()) +
                             " channels, weights expect " + std::to_string(w.mlp1.in));
    FeatureMap confidence = layers::apply(w.phi, z_in);
    layers::relu_inplace(confidence);
    confidence = confidence_gate(confidence, beta);

    const std::size_t ch = z_in.channels();
    std::vector<double> acc(ch, 0.0);
    for (std::size_t q = 0; q < z_in.cells(); ++q) {
        const double g = confidence.data()[q];
        if (g == 0.0)
            continue;
        const auto v = z_in.cell(q);
        for (std::size_t c = 0; c < ch; ++c)
            acc[c] += static_cast<double>(v[c]) * g;
    }
    std::vector<float> pooled(ch);
    for (std::size_t c = 0; c < ch; ++c)
        pooled[c] = static_cast<float>(acc[c] / static_cast<double>(z_in.cells()));

    auto hidden = layers::apply(w.mlp1, std::span<const float>(pooled));
    layers::relu_inplace(hidden);
    return {layers::apply(w.mlp2, std::span<const float>(hidden))};
}

FeatureMap aggregate_others(std::span<const FeatureMap> maps, std::size_t target, const layers::Dense& agg) {
    if (maps.empty())
        throw ArgumentError("aggregate_others: no maps");
    if (target >= maps.size())
        throw ArgumentError("aggregate_others: target index out of range");
    FeatureMap pooled = maps.front();
    for (std::size_t j = 1; j < maps.size(); ++j) {
        if (!maps[j].same_shape(pooled))
            throw DimensionError("aggregate_others: proto-map shapes differ");
        auto dst = pooled.data();
        const auto src = maps[j].data();
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst[i] = std::max(dst[i], src[i]);
    }
    return subtract(layers::apply(agg, pooled), maps[target]);
}

FeatureMap proxy_summary_map(const ProxySet& proxies, std::size_t schedule_size) {
    if (schedule_size == 0 || proxies.entries.empty() || proxies.entries.size() % schedule_size != 0)
        throw DimensionError("proxy_summary_map: entry count is not a multiple of the schedule size");
    const std::size_t refs = proxies.entries.size() / schedule_size;
    std::vector<FeatureMap> per_k;
    per_k.reserve(schedule_size);
    for (std::size_t k = 0; k < schedule_size; ++k) {
        const FeatureMap& first = proxies.entries[k].map;
        std::vector<double> acc(first.data().size(), 0.0);
        for (std::size_t r = 0; r < refs; ++r) {
            const FeatureMap& m = proxies.entries[r * schedule_size + k].map;
            if (!m.same_shape(first))
                throw DimensionError("proxy_summary_map: reference proxy maps differ in shape");
            const auto d = m.data();
            for (std::size_t i = 0; i < acc.size(); ++i)
                acc[i] += d[i];
        }
        FeatureMap mean(first.height(), first.width(), first.channels());
        for (std::size_t i = 0; i < acc.size(); ++i)
            mean.data()[i] = static_cast<float>(acc[i] / static_cast<double>(refs));
        per_k.push_back(std::move(mean));
    }
    return channel_concat(per_k);
}

ConditionCode discriminative_condition_code(std::span<const FeatureMap> m_all, const FeatureMap& proxy_summary,
                                            std::size_t target, const StageWeights& w, double beta) {
    if (target >= m_all.size())
        throw ArgumentError("discriminative_condition_code: target index out of range");
    const FeatureMap& m = m_all[target];
    const FeatureMap& p = (proxy_summary.height() == m.height() && proxy_summary.width() == m.width())
                              ? proxy_summary
                              : bilinear_resize(proxy_summary, m.height(), m.width());

    const auto c1 = conditioning_layer(m, w.cl1, beta);
    const auto c2 = conditioning_layer(aggregate_others(m_all, target, w.agg), w.cl2, beta);
    const auto c3 = conditioning_layer(p, w.cl3, beta);

    std::vector<float> joined;
    joined.reserve(c1.size() + c2.size() + c3.size());
    joined.insert(joined.end(), c1.values.begin(), c1.values.end());
    joined.insert(joined.end(), c2.values.begin(), c2.values.end());
    joined.insert(joined.end(), c3.values.begin(), c3.values.end());

    auto hidden = layers::apply(w.fuse1, std::span<const float>(joined));
    layers::relu_inplace(hidden);
    auto code = layers::apply(w.fuse2, std::span<const float>(hidden));
    for (auto& v : code)
        v = std::tanh(v);
    return {std::move(code)};
}

FeatureMap conditional_decode(const FeatureMap& m_in, const ConditionCode& c, const StageWeights& w,
                              const CascadeConfig& cfg, std::size_t stage, const FeatureMap* low_level) {
    FeatureMap h = add(m_in, channelwise_modulate(m_in, c));
    if (stage == cfg.lowlevel_stage) {
        if (low_level == nullptr)
            throw ArgumentError("conditional_decode: stage " + std::to_string(stage) + " needs low-level features");
        if (!w.lowlevel)
            throw ConfigError("conditional_decode: stage " + std::to_string(stage) + " lacks low-level weights");
        const FeatureMap low = (low_level->height() == h.height() && low_level->width() == h.width())
                                   ? *low_level
                                   : bilinear_resize(*low_level, h.height(), h.width());
        const FeatureMap parts[] = {h, low};
        h = layers::apply(*w.lowlevel, channel_concat(parts));
    }
    FeatureMap r = layers::apply(w.dec1, h);
    layers::relu_inplace(r);
    FeatureMap out = add(h, layers::apply(w.dec2, r));
    if (cfg.upsample_stages.contains(stage))
        out = bilinear_resize(out, out.height() * 2, out.width() * 2);
    return out;
}

std::vector<FeatureMap> cascade_calibrate(std::span<const FeatureMap> proto_maps, std::span<const ProxySet> proxies,
                                          const FeatureMap& low_level, const WeightBundle& weights,
                                          const CascadeConfig& cfg, const CalibrationDims& dims,
                                          std::size_t schedule_size, std::size_t out_h, std::size_t out_w) {
    cfg.validate();
    if (proto_maps.empty())
        throw ArgumentError("cascade_calibrate: no objects");
    if (proxies.size() != proto_maps.size())
        throw ArgumentError("cascade_calibrate: one proxy set per object required");

    std::vector<FeatureMap> summaries;
    summaries.reserve(proxies.size());
    for (const auto& p : proxies)
        summaries.push_back(proxy_summary_map(p, schedule_size));

    std::vector<FeatureMap> maps(proto_maps.begin(), proto_maps.end());
    for (std::size_t stage = 1; stage <= cfg.num_stages; ++stage) {
        const StageWeights w = stage_weights(weights, stage, cfg, dims);
        std::vector<ConditionCode> codes;
        codes.reserve(maps.size());
        for (std::size_t i = 0; i < maps.size(); ++i)
            codes.push_back(discriminative_condition_code(maps, summaries[i], i, w, cfg.beta));
        for (std::size_t i = 0; i < maps.size(); ++i)
            maps[i] = conditional_decode(maps[i], codes[i], w, cfg, stage, &low_level);
    }

    const auto head = layers::dense(weights, "calib/head", dims.proto_channels, 1);
    std::vector<FeatureMap> scores;
    scores.reserve(maps.size());
    for (const auto& m : maps)
        scores.push_back(bilinear_resize(layers::apply(head, m), out_h, out_w));
    return scores;
}

LabelMask merge_masks(std::span<const FeatureMap> scores) {
    if (scores.empty())
        throw ArgumentError("merge_masks: no score maps");
    const FeatureMap& first = scores.front();
    for (const auto& s : scores)
        if (s.height() != first.height() || s.width() != first.width() || s.channels() != 1)
            throw DimensionError("merge_masks: score maps must be single-channel and equally sized");
    LabelMask out(first.height(), first.width(), scores.size() - 1);
    for (std::size_t q = 0; q < first.cells(); ++q) {
        std::size_t arg = 0;
        for (std::size_t i = 1; i < scores.size(); ++i)
            if (scores[i].data()[q] > scores[arg].data()[q])
                arg = i;
        out.labels()[q] = static_cast<Label>(arg);
    }
    return out;
}

} // namespace aopvos
