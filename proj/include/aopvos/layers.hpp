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
#include <string>
#include <vector>

#include "aopvos/tensor.hpp"
#include "aopvos/weights.hpp"

namespace aopvos::layers {

// Weight views into a bundle. Layouts: 1x1 / linear weight [out][in],
// 3x3 weight [out][ky][kx][in], bias [out].
struct Dense {
    std::span<const float> weight;
    std::span<const float> bias;
    std::size_t in = 0;
    std::size_t out = 0;
};

struct Conv3x3 {
    std::span<const float> weight;
    std::span<const float> bias;
    std::size_t in = 0;
    std::size_t out = 0;
};

// Declares "<prefix>/weight" and "<prefix>/bias".
void declare_dense(ParamTable& table, const std::string& prefix, std::size_t in, std::size_t out);
void declare_conv3x3(ParamTable& table, const std::string& prefix, std::size_t in, std::size_t out);

Dense dense(const WeightBundle& w, const std::string& prefix, std::size_t in, std::size_t out);
Conv3x3 conv3x3(const WeightBundle& w, const std::string& prefix, std::size_t in, std::size_t out);

// Pointwise convolution.
FeatureMap apply(const Dense& layer, const FeatureMap& in);
// Same-size 3x3 convolution with reflect-101 borders.
FeatureMap apply(const Conv3x3& layer, const FeatureMap& in);
// Fully connected layer on a vector.
std::vector<float> apply(const Dense& layer, std::span<const float> x);

void relu_inplace(FeatureMap& f);
void relu_inplace(std::span<float> v);

// Reflect-101 index into [0, n): -1 -> 1, n -> n - 2.
std::ptrdiff_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n);

} // namespace aopvos::layers
