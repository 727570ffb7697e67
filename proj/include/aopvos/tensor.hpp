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
#include <span>
#include <vector>

namespace aopvos {

// H x W x 3 8-bit RGB frame, row-major, channel-last.
class Image {
  public:
    Image() = default;
    Image(std::size_t height, std::size_t width, std::uint8_t fill = 0);
    Image(std::size_t height, std::size_t width, std::vector<std::uint8_t> data);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    bool empty() const { return data_.empty(); }

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * width_ + x) * 3 + c]; }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * width_ + x) * 3 + c]; }

    std::span<std::uint8_t> data() { return data_; }
    std::span<const std::uint8_t> data() const { return data_; }

    bool operator==(const Image&) const = default;

  private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> data_;
};

// Dense H x W x C real map, row-major, channel-last, 32-bit storage.
class FeatureMap {
  public:
    FeatureMap() = default;
    FeatureMap(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f);
    FeatureMap(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t channels() const { return channels_; }
    std::size_t cells() const { return height_ * width_; }
    bool empty() const { return data_.empty(); }

    float& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * width_ + x) * channels_ + c]; }
    float at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * width_ + x) * channels_ + c]; }

    // Channel vector of one cell.
    std::span<float> cell(std::size_t y, std::size_t x) { return {data_.data() + (y * width_ + x) * channels_, channels_}; }
    std::span<const float> cell(std::size_t y, std::size_t x) const {
        return {data_.data() + (y * width_ + x) * channels_, channels_};
    }
    std::span<const float> cell(std::size_t index) const { return {data_.data() + index * channels_, channels_}; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    bool all_finite() const;
    bool same_shape(const FeatureMap& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    bool operator==(const FeatureMap&) const = default;

  private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 0;
    std::vector<float> data_;
};

using Label = std::uint8_t;

// Per-pixel object labels in {0..num_objects}; 0 is background.
class LabelMask {
  public:
    LabelMask() = default;
    LabelMask(std::size_t height, std::size_t width, std::size_t num_objects, Label fill = 0);
    LabelMask(std::size_t height, std::size_t width, std::size_t num_objects, std::vector<Label> labels);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t num_objects() const { return num_objects_; }
    bool empty() const { return labels_.empty(); }

    Label& at(std::size_t y, std::size_t x) { return labels_[y * width_ + x]; }
    Label at(std::size_t y, std::size_t x) const { return labels_[y * width_ + x]; }

    std::span<Label> labels() { return labels_; }
    std::span<const Label> labels() const { return labels_; }

    // Pixel count carrying `object`.
    std::size_t count(std::size_t object) const;

    bool operator==(const LabelMask&) const = default;

  private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t num_objects_ = 0;
    std::vector<Label> labels_;
};

// Per-channel modulation weights.
struct ConditionCode {
    std::vector<float> values;

    std::size_t size() const { return values.size(); }
    bool operator==(const ConditionCode&) const = default;
};

// Concatenates along channels in list order.
FeatureMap channel_concat(std::span<const FeatureMap> maps);

// Channels [first, first + count) of `f`.
FeatureMap channel_slice(const FeatureMap& f, std::size_t first, std::size_t count);

// out[y,x,m] = w[m] * z[y,x,m].
FeatureMap channelwise_modulate(const FeatureMap& z, const ConditionCode& w);

// Keeps `f` where the mask carries `object`, zero elsewhere.
FeatureMap elementwise_mask(const FeatureMap& f, const LabelMask& indicator, std::size_t object);

// Nearest-neighbour, top-left anchored: out[y,x] = in[y*factor, x*factor].
// Output size is ceil(H/factor) x ceil(W/factor).
LabelMask downsample_mask(const LabelMask& y, std::size_t factor);

// Block replication to out_h x out_w: out[y,x] = in[y/factor, x/factor].
LabelMask upsample_mask(const LabelMask& y, std::size_t factor, std::size_t out_h, std::size_t out_w);

// Align-corners-false bilinear resampling.
FeatureMap bilinear_resize(const FeatureMap& f, std::size_t out_h, std::size_t out_w);

ConditionCode global_avg_pool(const FeatureMap& z);

FeatureMap add(const FeatureMap& a, const FeatureMap& b);
FeatureMap subtract(const FeatureMap& a, const FeatureMap& b);

} // namespace aopvos
