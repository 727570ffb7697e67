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

#include "aopvos/layers.hpp"

#include <algorithm>

#include "aopvos/errors.hpp"

namespace aopvos::layers {

void declare_dense(ParamTable& table, const std::string& prefix, std::size_t in, std::size_t out) {
    table.push_back({prefix + "/weight", {out, in}, in});
    table.push_back({prefix + "/bias", {out}, in});
}

void declare_conv3x3(ParamTable& table, const std::string& prefix, std::size_t in, std::size_t out) {
    table.push_back({prefix + "/weight", {out, 3, 3, in}, 9 * in});
    table.push_back({prefix + "/bias", {out}, 9 * in});
}

Dense dense(const WeightBundle& w, const std::string& prefix, std::size_t in, std::size_t out) {
    const std::size_t ws[] = {out, in};
    const std::size_t bs[] = {out};
    return {w.values(prefix + "/weight", ws), w.values(prefix + "/bias", bs), in, out};
}

Conv3x3 conv3x3(const WeightBundle& w, const std::string& prefix, std::size_t in, std::size_t out) {
    const std::size_t ws[] = {out, 3, 3, in};
    const std::size_t bs[] = {out};
    return {w.values(prefix + "/weight", ws), w.values(prefix + "/bias", bs), in, out};
}

FeatureMap apply(const Dense& layer, const FeatureMap& in) {
    if (in.channels() != layer.in)
        throw DimensionError("1x1 conv expects " + std::to_string(layer.in) + " channels, got " +
                             std::to_string(in.channels()));
    FeatureMap out(in.height(), in.width(), layer.out);
    for (std::size_t i = 0; i < in.cells(); ++i) {
        const auto x = in.cell(i);
        float* dst = out.data().data() + i * layer.out;
        for (std::size_t o = 0; o < layer.out; ++o) {
            const float* wrow = layer.weight.data() + o * layer.in;
            double acc = layer.bias[o];
            for (std::size_t c = 0; c < layer.in; ++c)
                acc += static_cast<double>(wrow[c]) * x[c];
            dst[o] = static_cast<float>(acc);
        }
    }
    return out;
}

std::ptrdiff_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1)
        return 0;
    while (i < 0 || i >= n) {
        if (i < 0)
            i = -i;
        if (i >= n)
            i = 2 * (n - 1) - i;
    }
    return i;
}

FeatureMap apply(const Conv3x3& layer, const FeatureMap& in) {
    if (in.channels() != layer.in)
        throw DimensionError("3x3 conv expects " + std::to_string(layer.in) + " channels, got " +
                             std::to_string(in.channels()));
    const auto h = static_cast<std::ptrdiff_t>(in.height());
    const auto w = static_cast<std::ptrdiff_t>(in.width());
    FeatureMap out(in.height(), in.width(), layer.out);
    std::vector<double> acc(layer.out);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            std::copy(layer.bias.begin(), layer.bias.end(), acc.begin());
            for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
                const auto sy = static_cast<std::size_t>(reflect101(y + ky - 1, h));
                for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
                    const auto sx = static_cast<std::size_t>(reflect101(x + kx - 1, w));
                    const auto src = in.cell(sy, sx);
                    const std::size_t tap = static_cast<std::size_t>(ky * 3 + kx) * layer.in;
                    for (std::size_t o = 0; o < layer.out; ++o) {
                        const float* wrow = layer.weight.data() + o * 9 * layer.in + tap;
                        double s = 0.0;
                        for (std::size_t c = 0; c < layer.in; ++c)
                            s += static_cast<double>(wrow[c]) * src[c];
                        acc[o] += s;
                    }
                }
            }
            auto dst = out.cell(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
            for (std::size_t o = 0; o < layer.out; ++o)
                dst[o] = static_cast<float>(acc[o]);
        }
    }
    return out;
}

std::vector<float> apply(const Dense& layer, std::span<const float> x) {
    if (x.size() != layer.in)
        throw DimensionError("linear layer expects " + std::to_string(layer.in) + " inputs, got " +
                             std::to_string(x.size()));
    std::vector<float> out(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
        const float* wrow = layer.weight.data() + o * layer.in;
        double acc = layer.bias[o];
        for (std::size_t c = 0; c < layer.in; ++c)
            acc += static_cast<double>(wrow[c]) * x[c];
        out[o] = static_cast<float>(acc);
    }
    return out;
}

void relu_inplace(FeatureMap& f) { relu_inplace(f.data()); }

void relu_inplace(std::span<float> v) {
    for (auto& x : v)
        x = std::max(x, 0.0f);
}

} // namespace aopvos::layers
