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

#include "aopvos/correlation.hpp"

#include <algorithm>
#include <limits>

#include "aopvos/errors.hpp"
#include "aopvos/layers.hpp"

namespace aopvos {

namespace {

void check_proxies(std::span<const ProxySet> all) {
    if (all.empty())
        throw ArgumentError("no objects to classify");
    for (std::size_t i = 0; i < all.size(); ++i)
        if (all[i].object != i)
            throw ArgumentError("proxy set " + std::to_string(i) + " describes object " +
                                std::to_string(all[i].object));
}

FeatureMap bottleneck(const FeatureMap& x, const WeightBundle& w, const std::string& prefix, std::size_t in,
                      std::size_t width, bool project_skip) {
    FeatureMap h = layers::apply(layers::dense(w, prefix + "/reduce", in, width), x);
    layers::relu_inplace(h);
    h = layers::apply(layers::conv3x3(w, prefix + "/conv", width, width), h);
    layers::relu_inplace(h);
    h = layers::apply(layers::dense(w, prefix + "/expand", width, width), h);
    const FeatureMap skip = project_skip ? layers::apply(layers::dense(w, prefix + "/skip", in, width), x) : x;
    return add(h, skip);
}

} // namespace

double l2_similarity(std::span<const float> a, std::span<const float> b) {
    return 1.0 / (1.0 + squared_distance(a, b));
}

FeatureMap similarity_map(const FeatureMap& f_t, const Points& centroids) {
    FeatureMap out(f_t.height(), f_t.width(), 1);
    if (centroids.empty())
        return out;
    if (centroids.dim != f_t.channels())
        throw DimensionError("similarity_map: centroid length " + std::to_string(centroids.dim) + " vs " +
                             std::to_string(f_t.channels()) + " feature channels");
    const std::size_t n = centroids.size();
    for (std::size_t q = 0; q < f_t.cells(); ++q) {
        const auto v = f_t.cell(q);
        double best = 0.0;
        for (std::size_t c = 0; c < n; ++c)
            best = std::max(best, l2_similarity(v, centroids[c]));
        out.data()[q] = static_cast<float>(best);
    }
    return out;
}

SimilarityStack similarity_stack(const FeatureMap& f_t, const ProxySet& proxies) {
    SimilarityStack s;
    s.object = proxies.object;
    s.maps.reserve(proxies.entries.size());
    for (const auto& e : proxies.entries)
        s.maps.push_back(similarity_map(f_t, e.centroids));
    return s;
}

ParamTable proto_parameter_table(const ProtoMapConfig& cfg) {
    ParamTable t;
    layers::declare_dense(t, "proto/phi_s", cfg.schedule_size, cfg.sim_channels);
    const std::size_t in = cfg.sim_channels + cfg.feature_channels;
    const std::size_t width = cfg.proto_channels;
    layers::declare_dense(t, "proto/ens1/reduce", in, width);
    layers::declare_conv3x3(t, "proto/ens1/conv", width, width);
    layers::declare_dense(t, "proto/ens1/expand", width, width);
    layers::declare_dense(t, "proto/ens1/skip", in, width);
    layers::declare_dense(t, "proto/ens2/reduce", width, width);
    layers::declare_conv3x3(t, "proto/ens2/conv", width, width);
    layers::declare_dense(t, "proto/ens2/expand", width, width);
    return t;
}

FeatureMap generate_proto_map(const FeatureMap& f_t, const ProxySet& proxies, const WeightBundle& weights,
                              const ProtoMapConfig& cfg) {
    return generate_proto_map(f_t, similarity_stack(f_t, proxies), weights, cfg);
}

FeatureMap generate_proto_map(const FeatureMap& f_t, const SimilarityStack& stack, const WeightBundle& weights,
                              const ProtoMapConfig& cfg) {
    if (f_t.channels() != cfg.feature_channels)
        throw DimensionError("generate_proto_map: f_t has " + std::to_string(f_t.channels()) + " channels, expected " +
                             std::to_string(cfg.feature_channels));
    const std::size_t l = cfg.schedule_size;
    if (l == 0 || stack.maps.empty() || stack.maps.size() % l != 0)
        throw DimensionError("generate_proto_map: similarity stack size " + std::to_string(stack.maps.size()) +
                             " is not a multiple of the schedule size " + std::to_string(l));
    for (const auto& m : stack.maps)
        if (m.height() != f_t.height() || m.width() != f_t.width() || m.channels() != 1)
            throw DimensionError("generate_proto_map: similarity map shape mismatch");

    const auto phi = layers::dense(weights, "proto/phi_s", l, cfg.sim_channels);
    const std::size_t refs = stack.maps.size() / l;
    FeatureMap projected(f_t.height(), f_t.width(), cfg.sim_channels);
    for (std::size_t q = 0; q < f_t.cells(); ++q) {
        auto dst = projected.data().subspan(q * cfg.sim_channels, cfg.sim_channels);
        for (std::size_t o = 0; o < cfg.sim_channels; ++o) {
            double acc = 0.0;
            for (std::size_t r = 0; r < refs; ++r)
                for (std::size_t k = 0; k < l; ++k)
                    acc += static_cast<double>(phi.weight[o * l + k]) * stack.maps[r * l + k].data()[q];
            dst[o] = static_cast<float>(phi.bias[o] + acc / static_cast<double>(refs));
        }
    }

    const FeatureMap parts[] = {projected, f_t};
    FeatureMap x = channel_concat(parts);
    x = bottleneck(x, weights, "proto/ens1", cfg.sim_channels + cfg.feature_channels, cfg.proto_channels, true);
    return bottleneck(x, weights, "proto/ens2", cfg.proto_channels, cfg.proto_channels, false);
}

std::vector<FeatureMap> proxy_match_scores(const FeatureMap& f_t, std::span<const ProxySet> all_proxies) {
    check_proxies(all_proxies);
    std::vector<FeatureMap> scores;
    scores.reserve(all_proxies.size());
    for (const auto& set : all_proxies) {
        FeatureMap best(f_t.height(), f_t.width(), 1);
        for (const auto& e : set.entries) {
            const FeatureMap s = similarity_map(f_t, e.centroids);
            for (std::size_t q = 0; q < best.cells(); ++q)
                best.data()[q] = std::max(best.data()[q], s.data()[q]);
        }
        scores.push_back(std::move(best));
    }
    return scores;
}

LabelMask nearest_proxy_classify(const FeatureMap& f_t, std::span<const ProxySet> all_proxies) {
    const auto scores = proxy_match_scores(f_t, all_proxies);
    LabelMask out(f_t.height(), f_t.width(), all_proxies.size() - 1);
    for (std::size_t q = 0; q < f_t.cells(); ++q) {
        std::size_t arg = 0;
        for (std::size_t i = 1; i < scores.size(); ++i)
            if (scores[i].data()[q] > scores[arg].data()[q])
                arg = i;
        out.labels()[q] = static_cast<Label>(arg);
    }
    return out;
}

} // namespace aopvos
