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

#include "aopvos/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aopvos/errors.hpp"

namespace aopvos {

namespace {

std::string shape_str(const FeatureMap& f) {
    return std::to_string(f.height()) + "x" + std::to_string(f.width()) + "x" + std::to_string(f.channels());
}

} // namespace

Image::Image(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), data_(height * width * 3, fill) {}

Image::Image(std::size_t height, std::size_t width, std::vector<std::uint8_t> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != height_ * width_ * 3)
        throw DimensionError("image data length " + std::to_string(data_.size()) + " does not match " +
                             std::to_string(height_) + "x" + std::to_string(width_) + "x3");
}

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels, float fill)
    : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {}

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (data_.size() != height_ * width_ * channels_)
        throw DimensionError("feature data length " + std::to_string(data_.size()) + " does not match " +
                             std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_));
}

bool FeatureMap::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

LabelMask::LabelMask(std::size_t height, std::size_t width, std::size_t num_objects, Label fill)
    : height_(height), width_(width), num_objects_(num_objects), labels_(height * width, fill) {
    if (fill > num_objects_)
        throw ArgumentError("fill label exceeds num_objects");
}

LabelMask::LabelMask(std::size_t height, std::size_t width, std::size_t num_objects, std::vector<Label> labels)
    : height_(height), width_(width), num_objects_(num_objects), labels_(std::move(labels)) {
    if (labels_.size() != height_ * width_)
        throw DimensionError("label data length does not match mask size");
    for (Label l : labels_)
        if (l > num_objects_)
            throw DataError("label " + std::to_string(l) + " exceeds num_objects " + std::to_string(num_objects_));
}

std::size_t LabelMask::count(std::size_t object) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), static_cast<Label>(object)));
}

FeatureMap channel_concat(std::span<const FeatureMap> maps) {
    if (maps.empty())
        throw ArgumentError("channel_concat: empty input list");
    const std::size_t h = maps.front().height();
    const std::size_t w = maps.front().width();
    std::size_t total = 0;
    for (const auto& m : maps) {
        if (m.height() != h || m.width() != w)
            throw DimensionError("channel_concat: spatial size mismatch (" + shape_str(maps.front()) + " vs " +
                                 shape_str(m) + ")");
        total += m.channels();
    }
    FeatureMap out(h, w, total);
    for (std::size_t i = 0; i < h * w; ++i) {
        float* dst = out.data().data() + i * total;
        for (const auto& m : maps) {
            const auto src = m.cell(i);
            dst = std::copy(src.begin(), src.end(), dst);
        }
    }
    return out;
}

FeatureMap channel_slice(const FeatureMap& f, std::size_t first, std::size_t count) {
    if (first + count > f.channels())
        throw DimensionError("channel_slice: range exceeds channel count");
    FeatureMap out(f.height(), f.width(), count);
    for (std::size_t i = 0; i < f.cells(); ++i) {
        const auto src = f.cell(i);
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(first), count, out.data().begin() + i * count);
    }
    return out;
}

FeatureMap channelwise_modulate(const FeatureMap& z, const ConditionCode& w) {
    if (w.size() != z.channels())
        throw DimensionError("channelwise_modulate: code length " + std::to_string(w.size()) + " vs " +
                             std::to_string(z.channels()) + " channels");
    FeatureMap out = z;
    auto data = out.data();
    const std::size_t c = z.channels();
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] *= w.values[i % c];
    return out;
}

FeatureMap elementwise_mask(const FeatureMap& f, const LabelMask& indicator, std::size_t object) {
    if (indicator.height() != f.height() || indicator.width() != f.width())
        throw DimensionError("elementwise_mask: mask size differs from feature size");
    if (object > indicator.num_objects())
        throw ArgumentError("elementwise_mask: object " + std::to_string(object) + " > num_objects");
    FeatureMap out(f.height(), f.width(), f.channels());
    const auto labels = indicator.labels();
    for (std::size_t i = 0; i < f.cells(); ++i) {
        if (labels[i] != object)
            continue;
        const auto src = f.cell(i);
        std::copy(src.begin(), src.end(), out.data().begin() + i * f.channels());
    }
    return out;
}

LabelMask downsample_mask(const LabelMask& y, std::size_t factor) {
    if (factor == 0)
        throw ArgumentError("downsample_mask: factor must be >= 1");
    const std::size_t oh = (y.height() + factor - 1) / factor;
    const std::size_t ow = (y.width() + factor - 1) / factor;
    LabelMask out(oh, ow, y.num_objects());
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c)
            out.at(r, c) = y.at(r * factor, c * factor);
    return out;
}

LabelMask upsample_mask(const LabelMask& y, std::size_t factor, std::size_t out_h, std::size_t out_w) {
    if (factor == 0)
        throw ArgumentError("upsample_mask: factor must be >= 1");
    if ((out_h + factor - 1) / factor != y.height() || (out_w + factor - 1) / factor != y.width())
        throw DimensionError("upsample_mask: output size does not match the input grid");
    LabelMask out(out_h, out_w, y.num_objects());
    for (std::size_t r = 0; r < out_h; ++r)
        for (std::size_t c = 0; c < out_w; ++c)
            out.at(r, c) = y.at(r / factor, c / factor);
    return out;
}

FeatureMap bilinear_resize(const FeatureMap& f, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0)
        throw ArgumentError("bilinear_resize: output size must be positive");
    if (f.empty())
        throw ArgumentError("bilinear_resize: empty input");
    const std::size_t ch = f.channels();
    FeatureMap out(out_h, out_w, ch);
    const double sy = static_cast<double>(f.height()) / static_cast<double>(out_h);
    const double sx = static_cast<double>(f.width()) / static_cast<double>(out_w);

    struct Tap {
        std::size_t i0, i1;
        double w1;
    };
    auto taps = [](std::size_t n_out, std::size_t n_in, double scale) {
        std::vector<Tap> t(n_out);
        for (std::size_t d = 0; d < n_out; ++d) {
            double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
            src = std::max(src, 0.0);
            auto i0 = static_cast<std::size_t>(src);
            i0 = std::min(i0, n_in - 1);
            const std::size_t i1 = std::min(i0 + 1, n_in - 1);
            t[d] = {i0, i1, src - static_cast<double>(i0)};
        }
        return t;
    };
    const auto ty = taps(out_h, f.height(), sy);
    const auto tx = taps(out_w, f.width(), sx);

    for (std::size_t y = 0; y < out_h; ++y) {
        const auto& a = ty[y];
        for (std::size_t x = 0; x < out_w; ++x) {
            const auto& b = tx[x];
            const auto p00 = f.cell(a.i0, b.i0);
            const auto p01 = f.cell(a.i0, b.i1);
            const auto p10 = f.cell(a.i1, b.i0);
            const auto p11 = f.cell(a.i1, b.i1);
            auto dst = out.cell(y, x);
            for (std::size_t c = 0; c < ch; ++c) {
                const double top = p00[c] + b.w1 * (static_cast<double>(p01[c]) - p00[c]);
                const double bot = p10[c] + b.w1 * (static_cast<double>(p11[c]) - p10[c]);
                dst[c] = static_cast<float>(top + a.w1 * (bot - top));
            }
        }
    }
    return out;
}

ConditionCode global_avg_pool(const FeatureMap& z) {
    if (z.empty())
        throw ArgumentError("global_avg_pool: empty map");
    std::vector<double> acc(z.channels(), 0.0);
    for (std::size_t i = 0; i < z.cells(); ++i) {
        const auto v = z.cell(i);
        for (std::size_t c = 0; c < acc.size(); ++c)
            acc[c] += v[c];
    }
    ConditionCode out;
    out.values.resize(acc.size());
    const auto n = static_cast<double>(z.cells());
    for (std::size_t c = 0; c < acc.size(); ++c)
        out.values[c] = static_cast<float>(acc[c] / n);
    return out;
}

FeatureMap add(const FeatureMap& a, const FeatureMap& b) {
    if (!a.same_shape(b))
        throw DimensionError("add: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    FeatureMap out = a;
    auto d = out.data();
    const auto s = b.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] += s[i];
    return out;
}

FeatureMap subtract(const FeatureMap& a, const FeatureMap& b) {
    if (!a.same_shape(b))
        throw DimensionError("subtract: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    FeatureMap out = a;
    auto d = out.data();
    const auto s = b.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] -= s[i];
    return out;
}

} // namespace aopvos
