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

#include "aopvos/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aopvos/dataset.hpp"
#include "aopvos/errors.hpp"
#include "aopvos/layers.hpp"
#include "aopvos/rng.hpp"

namespace aopvos {

namespace {

std::uint8_t clamp_round(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

} // namespace

void PerturbationSpec::validate() const {
    switch (kind) {
    case PerturbationKind::identity:
        return;
    case PerturbationKind::gaussian_noise:
        if (!(parameter >= 0.0))
            throw ArgumentError("gaussian noise sigma must be >= 0");
        return;
    case PerturbationKind::salt_pepper:
        if (!(parameter >= 0.0) || parameter != std::floor(parameter))
            throw ArgumentError("salt & pepper point count must be a non-negative integer");
        return;
    case PerturbationKind::gaussian_blur: {
        const double k = parameter;
        if (k != std::floor(k) || k < 3 || static_cast<long long>(k) % 2 == 0)
            throw ArgumentError("blur kernel size must be odd and >= 3");
        return;
    }
    }
}

std::string PerturbationSpec::label() const {
    std::ostringstream s;
    switch (kind) {
    case PerturbationKind::identity:
        return "identity";
    case PerturbationKind::gaussian_noise:
        s << "gaussian-noise(sigma=" << parameter << ")";
        break;
    case PerturbationKind::salt_pepper:
        s << "salt-pepper(n=" << static_cast<long long>(parameter) << ")";
        break;
    case PerturbationKind::gaussian_blur:
        s << "gaussian-blur(k=" << static_cast<long long>(parameter) << ")";
        break;
    }
    return s.str();
}

PerturbationKind parse_perturbation_kind(const std::string& name) {
    if (name == "identity")
        return PerturbationKind::identity;
    if (name == "gaussian-noise" || name == "gaussian_noise")
        return PerturbationKind::gaussian_noise;
    if (name == "salt-pepper" || name == "salt_pepper")
        return PerturbationKind::salt_pepper;
    if (name == "gaussian-blur" || name == "gaussian_blur")
        return PerturbationKind::gaussian_blur;
    throw ArgumentError("unknown perturbation kind '" + name + "'");
}

std::string to_string(PerturbationKind kind) {
    switch (kind) {
    case PerturbationKind::identity:
        return "identity";
    case PerturbationKind::gaussian_noise:
        return "gaussian-noise";
    case PerturbationKind::salt_pepper:
        return "salt-pepper";
    case PerturbationKind::gaussian_blur:
        return "gaussian-blur";
    }
    return "?";
}

std::vector<PerturbationSpec> benchmark_perturbations(std::uint64_t seed) {
    return {
        {PerturbationKind::gaussian_noise, 10, seed}, {PerturbationKind::gaussian_noise, 30, seed},
        {PerturbationKind::salt_pepper, 1000, seed},  {PerturbationKind::salt_pepper, 5000, seed},
        {PerturbationKind::gaussian_blur, 7, seed},   {PerturbationKind::gaussian_blur, 9, seed},
    };
}

std::vector<double> gaussian_noise_field(std::size_t height, std::size_t width, double sigma, std::uint64_t seed) {
    const CounterRng rng(seed);
    std::vector<double> eta(height * width * 3);
    for (std::size_t i = 0; i < eta.size(); ++i)
        eta[i] = sigma * rng.normal_at(i);
    return eta;
}

Image gaussian_noise(const Image& x, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0))
        throw ArgumentError("gaussian_noise: sigma must be >= 0");
    if (sigma == 0.0)
        return x;
    const auto eta = gaussian_noise_field(x.height(), x.width(), sigma, seed);
    Image out = x;
    auto d = out.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = clamp_round(static_cast<double>(d[i]) + eta[i]);
    return out;
}

Image salt_pepper(const Image& x, std::size_t n, std::uint64_t seed) {
    const std::size_t total = x.height() * x.width();
    const std::size_t m = std::min(n, total);
    Image out = x;
    if (m == 0)
        return out;
    CounterRng rng(seed);
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
        std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < m; ++i) {
        const std::uint8_t v = (rng.next() >> 63) ? 255 : 0;
        const std::size_t p = idx[i];
        for (std::size_t c = 0; c < 3; ++c)
            out.data()[p * 3 + c] = v;
    }
    return out;
}

double default_blur_sigma(std::size_t k) { return 0.3 * ((static_cast<double>(k) - 1.0) * 0.5 - 1.0) + 0.8; }

std::vector<double> gaussian_kernel(std::size_t k, double sigma) {
    if (k < 3 || k % 2 == 0)
        throw ArgumentError("gaussian_kernel: size must be odd and >= 3");
    if (!(sigma > 0.0))
        throw ArgumentError("gaussian_kernel: sigma must be positive");
    std::vector<double> g(k);
    const double c = (static_cast<double>(k) - 1.0) / 2.0;
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double d = static_cast<double>(j) - c;
        g[j] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += g[j];
    }
    for (auto& v : g)
        v /= sum;
    return g;
}

Image gaussian_blur(const Image& x, std::size_t k, std::optional<double> sigma) {
    if (k < 3 || k % 2 == 0)
        throw ArgumentError("gaussian_blur: kernel size must be odd and >= 3, got " + std::to_string(k));
    const auto g = gaussian_kernel(k, sigma.value_or(default_blur_sigma(k)));
    const auto h = static_cast<std::ptrdiff_t>(x.height());
    const auto w = static_cast<std::ptrdiff_t>(x.width());
    const auto half = static_cast<std::ptrdiff_t>(k / 2);

    std::vector<double> tmp(x.data().size());
    for (std::ptrdiff_t y = 0; y < h; ++y)
        for (std::ptrdiff_t xx = 0; xx < w; ++xx)
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t j = -half; j <= half; ++j) {
                    const auto sx = layers::reflect101(xx + j, w);
                    acc += g[static_cast<std::size_t>(j + half)] *
                           x.at(static_cast<std::size_t>(y), static_cast<std::size_t>(sx), c);
                }
                tmp[(static_cast<std::size_t>(y * w + xx)) * 3 + c] = acc;
            }

    Image out(x.height(), x.width());
    for (std::ptrdiff_t y = 0; y < h; ++y)
        for (std::ptrdiff_t xx = 0; xx < w; ++xx)
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t j = -half; j <= half; ++j) {
                    const auto sy = layers::reflect101(y + j, h);
                    acc += g[static_cast<std::size_t>(j + half)] * tmp[static_cast<std::size_t>(sy * w + xx) * 3 + c];
                }
                out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(xx), c) = clamp_round(acc);
            }
    return out;
}

Image perturb_frame(const Image& x, const PerturbationSpec& spec, std::uint64_t seed) {
    spec.validate();
    switch (spec.kind) {
    case PerturbationKind::identity:
        return x;
    case PerturbationKind::gaussian_noise:
        return gaussian_noise(x, spec.parameter, seed);
    case PerturbationKind::salt_pepper:
        return salt_pepper(x, static_cast<std::size_t>(spec.parameter), seed);
    case PerturbationKind::gaussian_blur:
        return gaussian_blur(x, static_cast<std::size_t>(spec.parameter));
    }
    return x;
}

std::uint64_t frame_seed(std::uint64_t seed, const std::string& sequence_id, std::size_t frame_index) {
    return derive_seed(seed, {fnv1a64(sequence_id), frame_index});
}

void perturb_dataset(const std::filesystem::path& root, const PerturbationSpec& spec,
                     const std::filesystem::path& output_root) {
    namespace fs = std::filesystem;
    spec.validate();
    const auto sequences = load_dataset(root);
    for (const auto& seq : sequences) {
        const fs::path img_dir = output_root / "JPEGImages" / seq.id;
        fs::create_directories(img_dir);
        for (std::size_t f = 0; f < seq.frames.size(); ++f) {
            const fs::path& src = seq.frames[f];
            if (spec.kind == PerturbationKind::identity) {
                fs::copy_file(src, img_dir / src.filename(), fs::copy_options::overwrite_existing);
                continue;
            }
            const fs::path dst = img_dir / (src.stem().string() + ".png");
            const Image in = read_image(src);
            write_png_rgb(perturb_frame(in, spec, frame_seed(spec.seed, seq.id, f)), dst);
        }
        const fs::path ann_src = root / "Annotations" / seq.id;
        const fs::path ann_dst = output_root / "Annotations" / seq.id;
        if (fs::exists(ann_src)) {
            fs::create_directories(ann_dst);
            for (const auto& entry : fs::directory_iterator(ann_src))
                if (entry.is_regular_file())
                    fs::copy_file(entry.path(), ann_dst / entry.path().filename(),
                                  fs::copy_options::overwrite_existing);
        }
    }
}

} // namespace aopvos
