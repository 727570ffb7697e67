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
#include <optional>
#include <string>
#include <vector>

#include "aopvos/tensor.hpp"

namespace aopvos {

enum class PerturbationKind { identity, gaussian_noise, salt_pepper, gaussian_blur };

struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::identity;
    // sigma (intensity units), point count, or kernel size depending on kind.
    double parameter = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    // Row label, e.g. "gaussian-noise(sigma=10)".
    std::string label() const;
};

PerturbationKind parse_perturbation_kind(const std::string& name);
std::string to_string(PerturbationKind kind);

// The six perturbations of the robustness benchmark: Gaussian noise
// sigma 10/30, salt & pepper 1k/5k points, Gaussian blur 7x7/9x9.
std::vector<PerturbationSpec> benchmark_perturbations(std::uint64_t seed);

// Additive noise field eta (row-major, then channel) before rounding/clamping.
std::vector<double> gaussian_noise_field(std::size_t height, std::size_t width, double sigma, std::uint64_t seed);

// clamp(round(x + eta), 0, 255), eta ~ N(0, sigma^2) per pixel and channel.
Image gaussian_noise(const Image& x, double sigma, std::uint64_t seed);

// min(n, H*W) distinct pixels (seeded partial Fisher-Yates), each set to
// white or black by one extra draw per pixel in selection order.
Image salt_pepper(const Image& x, std::size_t n, std::uint64_t seed);

// Default sigma for a k-tap kernel: 0.3 * ((k - 1) * 0.5 - 1) + 0.8.
double default_blur_sigma(std::size_t k);
std::vector<double> gaussian_kernel(std::size_t k, double sigma);

// Separable blur, horizontal then vertical, reflect-101 borders, rounded
// half away from zero.
Image gaussian_blur(const Image& x, std::size_t k, std::optional<double> sigma = std::nullopt);

// Applies `spec` to one frame; `frame_seed` replaces spec.seed.
Image perturb_frame(const Image& x, const PerturbationSpec& spec, std::uint64_t frame_seed);

// Sub-seed of frame `frame_index` of sequence `sequence_id`.
std::uint64_t frame_seed(std::uint64_t seed, const std::string& sequence_id, std::size_t frame_index);

// Writes a perturbed copy of a dataset: every frame perturbed and stored as
// PNG, annotations copied byte-for-byte.
void perturb_dataset(const std::filesystem::path& root, const PerturbationSpec& spec,
                     const std::filesystem::path& output_root);

} // namespace aopvos
