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
#include <cstdint>

#include "aopvos/tensor.hpp"
#include "aopvos/weights.hpp"

namespace aopvos {

// Fixed output stride of the surrogate backbone.
inline constexpr std::size_t kEncoderStride = 4;
// Normalized RGB plus |Sobel x|, |Sobel y| of each colour channel.
inline constexpr std::size_t kEncoderBaseChannels = 9;

struct EncoderConfig {
    std::size_t output_channels = 32;
    std::size_t low_level_channels = 8;
    std::uint64_t seed = 0;
    std::size_t num_random_layers = 2;
    // When the bundle lacks encoder arrays, synthesize them from `seed`
    // instead of failing.
    bool synthesize_missing = true;

    void validate() const;
};

struct EncoderOutput {
    FeatureMap features;  // ceil(H/4) x ceil(W/4) x output_channels
    FeatureMap low_level; // ceil(H/4) x ceil(W/4) x low_level_channels
};

ParamTable encoder_parameter_table(const EncoderConfig& cfg);

// Handcrafted colour/gradient features at full resolution, before pooling.
FeatureMap encoder_base_features(const Image& x);

// Block-average pooling with `stride` x `stride` windows; partial windows at
// the right/bottom border average over the pixels they contain.
FeatureMap average_pool(const FeatureMap& f, std::size_t stride);

// Deterministic stand-in backbone: base features pooled to stride 4, then
// `num_random_layers` seeded 3x3 conv + ReLU layers. The low-level branch is
// a 1x1 conv + ReLU on the pooled base features.
EncoderOutput encode(const Image& x, const EncoderConfig& cfg, const WeightBundle& weights);

} // namespace aopvos
