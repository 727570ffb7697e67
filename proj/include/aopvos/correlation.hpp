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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aopvos/proxy.hpp"
#include "aopvos/tensor.hpp"
#include "aopvos/weights.hpp"

namespace aopvos {

// 1 / (1 + ||a - b||^2), in (0, 1].
double l2_similarity(std::span<const float> a, std::span<const float> b);

// Single-channel map: best similarity of each target cell to any centroid.
// An empty centroid list yields the zero map.
FeatureMap similarity_map(const FeatureMap& f_t, const Points& centroids);

struct SimilarityStack {
    std::size_t object = 0;
    std::vector<FeatureMap> maps; // one per proxy entry, entry order
};

SimilarityStack similarity_stack(const FeatureMap& f_t, const ProxySet& proxies);

struct ProtoMapConfig {
    std::size_t feature_channels = 32; // backbone channels of f_t
    std::size_t schedule_size = 3;     // |cluster schedule|
    std::size_t sim_channels = 8;      // output of the similarity projection
    std::size_t proto_channels = 32;   // proto-map width
};

// Parameters:
//   proto/phi_s          1x1 projection of one reference's similarity
//                        channels, shared by all references and averaged
//   proto/ens{1,2}/...   residual bottlenecks reduce -> 3x3 -> expand;
//                        ens1 carries a 1x1 skip projection
ParamTable proto_parameter_table(const ProtoMapConfig& cfg);

// Projects the stacked similarity maps, concatenates f_t and runs the
// two-block ensembler. Output: f_t resolution, proto_channels channels.
FeatureMap generate_proto_map(const FeatureMap& f_t, const ProxySet& proxies, const WeightBundle& weights,
                              const ProtoMapConfig& cfg);

// Same, starting from a precomputed similarity stack.
FeatureMap generate_proto_map(const FeatureMap& f_t, const SimilarityStack& stack, const WeightBundle& weights,
                              const ProtoMapConfig& cfg);

// Per object (index = position), the best similarity over every centroid of
// every entry.
std::vector<FeatureMap> proxy_match_scores(const FeatureMap& f_t, std::span<const ProxySet> all_proxies);

// Training-free baseline: argmax over objects of proxy_match_scores, ties to
// the lowest index. all_proxies[i] must describe object i.
LabelMask nearest_proxy_classify(const FeatureMap& f_t, std::span<const ProxySet> all_proxies);

} // namespace aopvos
