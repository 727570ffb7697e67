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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace aopvos {

// Declared parameter: path, shape, and the fan-in of the layer that owns it
// (biases share their layer's fan-in).
struct ParamSpec {
    std::string path;
    std::vector<std::size_t> shape;
    std::size_t fan_in = 1;

    std::size_t count() const;
};

using ParamTable = std::vector<ParamSpec>;

struct WeightArray {
    std::vector<std::size_t> shape;
    std::vector<float> values;

    bool operator==(const WeightArray&) const = default;
};

// Named parameter arrays keyed by path ("calib/stage3/cl2/mlp1/weight").
// Immutable once handed to the model code.
class WeightBundle {
  public:
    bool contains(const std::string& path) const { return arrays_.contains(path); }

    // Throws ConfigError when missing or when `shape` is given and differs.
    const WeightArray& get(const std::string& path) const;
    std::span<const float> values(const std::string& path, std::span<const std::size_t> shape) const;

    void set(const std::string& path, WeightArray array);
    std::span<float> mutable_values(const std::string& path);

    const std::map<std::string, WeightArray>& arrays() const { return arrays_; }
    std::size_t size() const { return arrays_.size(); }

    // Adds every array of `other` that is not yet present.
    void merge(const WeightBundle& other);

    bool operator==(const WeightBundle&) const = default;

  private:
    std::map<std::string, WeightArray> arrays_;
};

// Uniform(-a, a), a = sqrt(6 / fan_in), drawn from one counter stream keyed
// by `seed` in lexicographic path order.
WeightBundle init_weights(std::uint64_t seed, const ParamTable& table);

// Checks that `bundle` holds exactly the table's paths with matching shapes.
void validate_weights(const WeightBundle& bundle, const ParamTable& table);

// Manifest (JSON text: path, shape, byte offset per array) plus a raw blob of
// little-endian float32 in manifest order. The blob sits next to the
// manifest with the extension replaced by ".bin".
void save_weights(const WeightBundle& bundle, const std::filesystem::path& manifest);
WeightBundle load_weights(const std::filesystem::path& manifest);
// Same, rejecting any path not in `expected` (ConfigError naming the path).
WeightBundle load_weights(const std::filesystem::path& manifest, const ParamTable& expected);

std::filesystem::path blob_path_for(const std::filesystem::path& manifest);

} // namespace aopvos
