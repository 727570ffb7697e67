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

#include "aopvos/encoder.hpp"

#include <cmath>
#include <string>

#include "aopvos/errors.hpp"
#include "aopvos/layers.hpp"

namespace aopvos {

namespace {

std::string conv_prefix(std::size_t layer) { return "encoder/conv" + std::to_string(layer + 1); }

} // namespace

void EncoderConfig::validate() const {
    if (output_channels < 4)
        throw ConfigError("encoder output_channels must be >= 4");
    if (low_level_channels == 0)
        throw ConfigError("encoder low_level_channels must be >= 1");
    if (num_random_layers == 0)
        throw ConfigError("encoder needs at least one random layer");
}

ParamTable encoder_parameter_table(const EncoderConfig& cfg) {
    cfg.validate();
    ParamTable table;
    for (std::size_t l = 0; l < cfg.num_random_layers; ++l)
        layers::declare_conv3x3(table, conv_prefix(l), l == 0 ? kEncoderBaseChannels : cfg.output_channels,
                                cfg.output_channels);
    layers::declare_dense(table, "encoder/lowlevel", kEncoderBaseChannels, cfg.low_level_channels);
    return table;
}

FeatureMap encoder_base_features(const Image& x) {
    if (x.empty())
        throw ArgumentError("encode: empty image");
    const auto h = static_cast<std::ptrdiff_t>(x.height());
    const auto w = static_cast<std::ptrdiff_t>(x.width());
    FeatureMap base(x.height(), x.width(), kEncoderBaseChannels);
    auto px = [&](std::ptrdiff_t y, std::ptrdiff_t xx, std::size_t c) {
        return static_cast<float>(x.at(static_cast<std::size_t>(layers::reflect101(y, h)),
                                       static_cast<std::size_t>(layers::reflect101(xx, w)), c)) /
               255.0f;
    };
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
            auto out = base.cell(static_cast<std::size_t>(y), static_cast<std::size_t>(xx));
            for (std::size_t c = 0; c < 3; ++c) {
                out[c] = px(y, xx, c);
                const float gx = (px(y - 1, xx + 1, c) + 2 * px(y, xx + 1, c) + px(y + 1, xx + 1, c)) -
                                 (px(y - 1, xx - 1, c) + 2 * px(y, xx - 1, c) + px(y + 1, xx - 1, c));
                const float gy = (px(y + 1, xx - 1, c) + 2 * px(y + 1, xx, c) + px(y + 1, xx + 1, c)) -
                                 (px(y - 1, xx - 1, c) + 2 * px(y - 1, xx, c) + px(y - 1, xx + 1, c));
                out[3 + 2 * c] = std::abs(gx);
                out[4 + 2 * c] = std::abs(gy);
            }
        }
    }
    return base;
}

FeatureMap average_pool(const FeatureMap& f, std::size_t stride) {
    if (stride == 0)
        throw ArgumentError("average_pool: stride must be >= 1");
    const std::size_t oh = (f.height() + stride - 1) / stride;
    const std::size_t ow = (f.width() + stride - 1) / stride;
    FeatureMap out(oh, ow, f.channels());
    std::vector<double> acc(f.channels());
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            std::fill(acc.begin(), acc.end(), 0.0);
            std::size_t n = 0;
            for (std::size_t sy = y * stride; sy < std::min((y + 1) * stride, f.height()); ++sy)
                for (std::size_t sx = x * stride; sx < std::min((x + 1) * stride, f.width()); ++sx, ++n) {
                    const auto v = f.cell(sy, sx);
                    for (std::size_t c = 0; c < acc.size(); ++c)
                        acc[c] += v[c];
                }
            auto dst = out.cell(y, x);
            for (std::size_t c = 0; c < acc.size(); ++c)
                dst[c] = static_cast<float>(acc[c] / static_cast<double>(n));
        }
    }
    return out;
}

EncoderOutput encode(const Image& x, const EncoderConfig& cfg, const WeightBundle& weights) {
    cfg.validate();
    const WeightBundle* source = &weights;
    WeightBundle synthesized;
    if (!weights.contains(conv_prefix(0) + "/weight")) {
        if (!cfg.synthesize_missing)
            throw ConfigError("encoder weights missing and synthesis disabled");
        synthesized = init_weights(cfg.seed, encoder_parameter_table(cfg));
        source = &synthesized;
    }

    const FeatureMap pooled = average_pool(encoder_base_features(x), kEncoderStride);

    EncoderOutput out;
    out.low_level = layers::apply(
        layers::dense(*source, "encoder/lowlevel", kEncoderBaseChannels, cfg.low_level_channels), pooled);
    layers::relu_inplace(out.low_level);

    FeatureMap f = pooled;
    for (std::size_t l = 0; l < cfg.num_random_layers; ++l) {
        const std::size_t in = l == 0 ? kEncoderBaseChannels : cfg.output_channels;
        f = layers::apply(layers::conv3x3(*source, conv_prefix(l), in, cfg.output_channels), f);
        layers::relu_inplace(f);
    }
    out.features = std::move(f);
    return out;
}

} // namespace aopvos
