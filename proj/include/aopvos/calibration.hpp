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
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "aopvos/layers.hpp"
#include "aopvos/proxy.hpp"
#include "aopvos/tensor.hpp"
#include "aopvos/weights.hpp"

namespace aopvos {

struct CascadeConfig {
    std::size_t num_stages = 6;
    // Percentile of the confidence map below which cues are dropped.
    double beta = 0.3;
    // 1-based stages that end with a x2 bilinear upsampling.
    std::set<std::size_t> upsample_stages{4, 5};
    // 1-based stage that fuses the low-level features of the target frame.
    std::size_t lowlevel_stage = 5;

    void validate() const;
    // Spatial scale of the map leaving stage `stage` relative to the input.
    std::size_t scale_after(std::size_t stage) const;
};

struct CalibrationDims {
    std::size_t proto_channels = 32;     // C_m
    std::size_t proxy_channels = 96;     // |schedule| * backbone channels (CL3 input)
    std::size_t low_level_channels = 8;
};

// Per stage "calib/stage<l>/": cl{1,2,3}/{phi,mlp1,mlp2}, agg, fuse/{mlp1,mlp2},
// dec/{conv1,conv2}, plus "lowlevel" on the low-level stage; "calib/head".
ParamTable calibration_parameter_table(const CascadeConfig& cfg, const CalibrationDims& dims);

struct ConditioningWeights {
    layers::Dense phi;  // in -> 1 confidence channel
    layers::Dense mlp1; // in -> C_m
    layers::Dense mlp2; // C_m -> C_m
};

struct StageWeights {
    ConditioningWeights cl1, cl2, cl3;
    layers::Dense agg;                 // C_m -> C_m after the cross-object max
    layers::Dense fuse1, fuse2;        // 3 C_m -> C_m -> C_m
    layers::Conv3x3 dec1, dec2;        // residual decoder
    std::optional<layers::Dense> lowlevel; // C_m + C_low -> C_m
};

StageWeights stage_weights(const WeightBundle& w, std::size_t stage, const CascadeConfig& cfg,
                           const CalibrationDims& dims);

// Zeroes values below the floor(beta * M)-th smallest value (1-based); the
// gate is open when floor(beta * M) == 0.
FeatureMap confidence_gate(const FeatureMap& values, double beta);

// MLP(GAP(z * gate(relu(phi(z))))), hidden width C_m with ReLU.
ConditionCode conditioning_layer(const FeatureMap& z_in, const ConditioningWeights& w, double beta);

// conv1x1(elementwise max over all maps) - maps[target].
FeatureMap aggregate_others(std::span<const FeatureMap> maps, std::size_t target, const layers::Dense& agg);

// For each schedule position, the mean over references of that entry's
// proxy map, concatenated in schedule order: |schedule| * C_e channels.
FeatureMap proxy_summary_map(const ProxySet& proxies, std::size_t schedule_size);

// tanh(fuse-MLP([CL1(m_i); CL2(A({m_j}) - m_i); CL3(P_i)])). `proxy_summary` is
// resized to the proto-map resolution when needed.
ConditionCode discriminative_condition_code(std::span<const FeatureMap> m_all, const FeatureMap& proxy_summary,
                                            std::size_t target, const StageWeights& w, double beta);

// h = m + m (x) c; on the low-level stage h = conv1x1([h; low_level]);
// out = h + conv2(relu(conv1(h))); x2 bilinear on upsampling stages.
FeatureMap conditional_decode(const FeatureMap& m_in, const ConditionCode& c, const StageWeights& w,
                              const CascadeConfig& cfg, std::size_t stage, const FeatureMap* low_level);

// Runs all stages, recomputing every object's code from the current maps
// before decoding, then projects each object to one channel and resizes to
// out_h x out_w. Index i of every span describes object i.
std::vector<FeatureMap> cascade_calibrate(std::span<const FeatureMap> proto_maps, std::span<const ProxySet> proxies,
                                          const FeatureMap& low_level, const WeightBundle& weights,
                                          const CascadeConfig& cfg, const CalibrationDims& dims,
                                          std::size_t schedule_size, std::size_t out_h, std::size_t out_w);

// Per-pixel argmax over object score maps, ties to the lowest index.
LabelMask merge_masks(std::span<const FeatureMap> scores);

} // namespace aopvos
