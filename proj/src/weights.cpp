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

#include "aopvos/weights.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>

#include <json.hpp>

#include "aopvos/errors.hpp"
#include "aopvos/rng.hpp"

namespace aopvos {

namespace {

std::string shape_str(std::span<const std::size_t> shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i)
        s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

std::size_t product(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big)
        return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
    return v;
}

} // namespace

std::size_t ParamSpec::count() const { return product(shape); }

const WeightArray& WeightBundle::get(const std::string& path) const {
    auto it = arrays_.find(path);
    if (it == arrays_.end())
        throw ConfigError("missing weight array '" + path + "'");
    return it->second;
}

std::span<const float> WeightBundle::values(const std::string& path, std::span<const std::size_t> shape) const {
    const auto& a = get(path);
    if (!std::equal(a.shape.begin(), a.shape.end(), shape.begin(), shape.end()))
        throw ConfigError("weight array '" + path + "' has shape " + shape_str(a.shape) + ", expected " +
                          shape_str(shape));
    return a.values;
}

void WeightBundle::set(const std::string& path, WeightArray array) {
    if (array.values.size() != product(array.shape))
        throw ConfigError("weight array '" + path + "' length does not match shape " + shape_str(array.shape));
    arrays_[path] = std::move(array);
}

std::span<float> WeightBundle::mutable_values(const std::string& path) {
    auto it = arrays_.find(path);
    if (it == arrays_.end())
        throw ConfigError("missing weight array '" + path + "'");
    return it->second.values;
}

void WeightBundle::merge(const WeightBundle& other) {
    for (const auto& [path, arr] : other.arrays_)
        arrays_.try_emplace(path, arr);
}

WeightBundle init_weights(std::uint64_t seed, const ParamTable& table) {
    if (table.empty())
        throw ConfigError("init_weights: empty parameter table");
    std::vector<const ParamSpec*> sorted;
    sorted.reserve(table.size());
    for (const auto& p : table)
        sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->path < b->path; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i]->path == sorted[i - 1]->path)
            throw ConfigError("duplicate parameter path '" + sorted[i]->path + "'");

    CounterRng rng(seed);
    WeightBundle bundle;
    for (const auto* p : sorted) {
        if (p->fan_in == 0)
            throw ConfigError("parameter '" + p->path + "' has zero fan-in");
        const double a = std::sqrt(6.0 / static_cast<double>(p->fan_in));
        WeightArray arr{p->shape, std::vector<float>(p->count())};
        for (auto& v : arr.values) {
            // u strictly inside (0, 1); float rounding may still land on +-a.
            const double u = (static_cast<double>(rng.next() >> 11) + 0.5) * 0x1.0p-53;
            v = static_cast<float>((2.0 * u - 1.0) * a);
            if (std::abs(v) >= a)
                v = std::nextafter(static_cast<float>(std::copysign(a, v)), 0.0f);
        }
        bundle.set(p->path, std::move(arr));
    }
    return bundle;
}

void validate_weights(const WeightBundle& bundle, const ParamTable& table) {
    std::set<std::string> expected;
    for (const auto& p : table) {
        expected.insert(p.path);
        (void)bundle.values(p.path, p.shape);
    }
    for (const auto& [path, arr] : bundle.arrays())
        if (!expected.contains(path))
            throw ConfigError("unknown parameter path '" + path + "'");
}

std::filesystem::path blob_path_for(const std::filesystem::path& manifest) {
    auto blob = manifest;
    blob.replace_extension(".bin");
    return blob;
}

void save_weights(const WeightBundle& bundle, const std::filesystem::path& manifest) {
    const auto blob = blob_path_for(manifest);
    nlohmann::json doc;
    doc["format"] = "aopvos-weights";
    doc["version"] = 1;
    doc["blob"] = blob.filename().string();
    doc["dtype"] = "float32-le";
    auto& params = doc["params"] = nlohmann::json::array();

    std::ofstream bin(blob, std::ios::binary);
    if (!bin)
        throw IoError("cannot write weight blob " + blob.string());
    std::uint64_t offset = 0;
    for (const auto& [path, arr] : bundle.arrays()) {
        params.push_back({{"path", path}, {"shape", arr.shape}, {"offset", offset}});
        for (float v : arr.values) {
            const std::uint32_t le = to_le(std::bit_cast<std::uint32_t>(v));
            bin.write(reinterpret_cast<const char*>(&le), sizeof le);
        }
        offset += arr.values.size() * sizeof(float);
    }
    if (!bin)
        throw IoError("failed writing weight blob " + blob.string());

    std::ofstream out(manifest);
    if (!out)
        throw IoError("cannot write weight manifest " + manifest.string());
    out << doc.dump(2) << "\n";
}

WeightBundle load_weights(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in)
        throw IoError("cannot read weight manifest " + manifest.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed weight manifest " + manifest.string() + ": " + e.what());
    }
    if (doc.value("format", "") != "aopvos-weights")
        throw ConfigError("not an aopvos weight manifest: " + manifest.string());

    const auto blob = manifest.parent_path() / doc.at("blob").get<std::string>();
    std::ifstream bin(blob, std::ios::binary);
    if (!bin)
        throw IoError("cannot read weight blob " + blob.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    WeightBundle bundle;
    try {
        for (const auto& p : doc.at("params")) {
            const auto path = p.at("path").get<std::string>();
            if (bundle.contains(path))
                throw ConfigError("duplicate parameter path '" + path + "' in " + manifest.string());
            WeightArray arr;
            arr.shape = p.at("shape").get<std::vector<std::size_t>>();
            const auto offset = p.at("offset").get<std::uint64_t>();
            const std::size_t n = product(arr.shape);
            if (offset + n * sizeof(float) > bytes.size())
                throw ConfigError("weight array '" + path + "' runs past the end of " + blob.string());
            arr.values.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::uint32_t le;
                std::memcpy(&le, bytes.data() + offset + i * sizeof le, sizeof le);
                arr.values[i] = std::bit_cast<float>(to_le(le));
            }
            bundle.set(path, std::move(arr));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed weight manifest " + manifest.string() + ": " + e.what());
    }
    return bundle;
}

WeightBundle load_weights(const std::filesystem::path& manifest, const ParamTable& expected) {
    auto bundle = load_weights(manifest);
    validate_weights(bundle, expected);
    return bundle;
}

} // namespace aopvos
