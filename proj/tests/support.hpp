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

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "aopvos/tensor.hpp"
#include "aopvos/weights.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline aopvos::FeatureMap random_map(Rng& rng, std::size_t h, std::size_t w, std::size_t c, float lo = -1.0f,
                                     float hi = 1.0f) {
    std::uniform_real_distribution<float> d(lo, hi);
    aopvos::FeatureMap f(h, w, c);
    for (auto& v : f.data())
        v = d(rng);
    return f;
}

inline aopvos::LabelMask random_mask(Rng& rng, std::size_t h, std::size_t w, std::size_t n) {
    std::uniform_int_distribution<int> d(0, static_cast<int>(n));
    aopvos::LabelMask m(h, w, n);
    for (auto& v : m.labels())
        v = static_cast<aopvos::Label>(d(rng));
    return m;
}

inline aopvos::Image random_image(Rng& rng, std::size_t h, std::size_t w) {
    std::uniform_int_distribution<int> d(0, 255);
    aopvos::Image img(h, w);
    for (auto& v : img.data())
        v = static_cast<std::uint8_t>(d(rng));
    return img;
}

// Bundle of the table's shapes, all zero.
inline aopvos::WeightBundle zero_bundle(const aopvos::ParamTable& table) {
    aopvos::WeightBundle b;
    for (const auto& p : table)
        b.set(p.path, {p.shape, std::vector<float>(p.count(), 0.0f)});
    return b;
}

// Writes the identity into a [out][in] dense weight (out <= in).
inline void set_identity(aopvos::WeightBundle& b, const std::string& weight_path) {
    const auto& a = b.get(weight_path);
    const std::size_t out = a.shape.at(0), in = a.shape.at(1);
    auto v = b.mutable_values(weight_path);
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i)
            v[o * in + i] = (o == i) ? 1.0f : 0.0f;
}

// Fresh directory under the system temp dir, removed first if present.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("aopvos_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testing
