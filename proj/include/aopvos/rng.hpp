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

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace aopvos {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 output finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// FNV-1a, used to key seeds by string ids (sequence names, parameter paths).
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Folds integer components into a sub-seed. Order-sensitive, so
// derive_seed(s, {a, b}) != derive_seed(s, {b, a}) in general.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = mix64(seed ^ 0x6A09E667F3BCC909ULL);
    for (std::uint64_t p : parts)
        h = mix64(h ^ (p + kGoldenGamma + (h << 6) + (h >> 2)));
    return h;
}

// Counter-based SplitMix64: draw i of stream `key` is mix64(key + (i+1)*gamma).
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t at(std::uint64_t index) const { return mix64(key_ + (index + 1) * kGoldenGamma); }

    std::uint64_t next() { return at(counter_++); }

    // Uniform on (0, 1], 53-bit resolution.
    static double to_unit_open_low(std::uint64_t x) {
        return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
    }
    // Uniform on [0, 1).
    static double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

    double uniform() { return to_unit(next()); }

    // Uniform integer in [0, n) by 128-bit multiply-high.
    static std::uint64_t to_below(std::uint64_t x, std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(x) * n) >> 64);
    }
    std::uint64_t below(std::uint64_t n) { return to_below(next(), n); }

    // Standard normal draw `index` of the stream via Box-Muller over the pair
    // of raw draws (2j, 2j+1), j = index / 2; even index -> cos, odd -> sin.
    double normal_at(std::uint64_t index) const {
        const std::uint64_t pair = index / 2;
        const double u1 = to_unit_open_low(at(2 * pair));
        const double u2 = to_unit(at(2 * pair + 1));
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return (index % 2 == 0) ? r * std::cos(theta) : r * std::sin(theta);
    }

    std::uint64_t counter() const { return counter_; }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace aopvos
