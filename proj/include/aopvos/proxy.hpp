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
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aopvos/tensor.hpp"
#include "aopvos/weights.hpp"

namespace aopvos {

// Cluster count meaning "one cluster per support pixel" (pixel-level proxy).
inline constexpr std::size_t kFullResolution = std::numeric_limits<std::size_t>::max();

// Ordered list of cluster counts; order fixes the layout of every
// downstream stack (similarity channels, proxy concatenation).
struct ClusterSchedule {
    std::vector<std::size_t> cluster_counts{1, 16, kFullResolution};

    // "1,16,full"
    static ClusterSchedule parse(std::string_view text);
    std::string to_string() const;
    void validate() const;
    std::size_t size() const { return cluster_counts.size(); }
};

// Row-major list of `dim`-dimensional points.
struct Points {
    std::size_t dim = 0;
    std::vector<float> data;

    std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
    bool empty() const { return data.empty(); }
    std::span<const float> operator[](std::size_t i) const { return {data.data() + i * dim, dim}; }
    std::span<float> operator[](std::size_t i) { return {data.data() + i * dim, dim}; }
    void push_back(std::span<const float> p);
};

struct KMeansOptions {
    std::size_t max_iter = 20;
    double tol = 1e-4;
    // Independent seeded runs; the lowest-inertia run wins (first on ties).
    std::size_t restarts = 1;
};

struct ClusterResult {
    Points centroids;
    std::vector<std::size_t> assignment;
    double inertia = 0.0;
    // Inertia after every assignment step, first entry from the seeding.
    std::vector<double> inertia_history;
    std::size_t iterations = 0;
};

double squared_distance(std::span<const float> a, std::span<const float> b);

// Nearest centroid per point; ties go to the lowest centroid index.
std::vector<std::size_t> kmeans_assign(const Points& points, const Points& centroids);
// Per-cluster coordinate means; clusters without members keep `previous`.
Points kmeans_update(const Points& points, std::span<const std::size_t> assignment, const Points& previous);
double kmeans_inertia(const Points& points, const Points& centroids, std::span<const std::size_t> assignment);
// k-means++ seeding driven by a counter stream keyed by `seed`.
Points kmeanspp_init(const Points& points, std::size_t k, std::uint64_t seed);

ClusterResult kmeans(const Points& points, std::size_t k, std::uint64_t seed, const KMeansOptions& opts = {});

// One (reference, granularity) element of an object's proxy representation.
struct ProxyEntry {
    std::size_t reference = 0; // frame index of the reference (1-based)
    std::size_t k = 0;         // requested cluster count or grid size
    bool absent = false;       // object has no support in this reference
    FeatureMap map;            // centroid propagated over member cells, zero elsewhere
    Points centroids;          // distinct (non-empty) cluster centroids
    std::vector<std::vector<std::size_t>> members; // cell indices per centroid
};

struct ProxySet {
    std::size_t object = 0;
    std::vector<ProxyEntry> entries; // reference ascending, then schedule order
};

enum class ProxyMode {
    clustered, // adaptive proxies from k-means
    grid,      // grid-sampled proxies, each count read as the grid size G
};

// Cells (row-major indices) of `mask` carrying `object`.
std::vector<std::size_t> support_of(const LabelMask& mask, std::size_t object);

// f_r masked to the object's support.
FeatureMap object_embedding(const FeatureMap& f_r, const LabelMask& y_r, std::size_t object);

ProxyEntry build_proxy_entry(const FeatureMap& embedding, std::span<const std::size_t> support, std::size_t k,
                             std::uint64_t seed, const KMeansOptions& opts = {});

// Means over a G x G partition of the support's bounding box.
ProxyEntry build_grid_proxy(const FeatureMap& embedding, std::span<const std::size_t> support, std::size_t grid);

struct ReferenceView {
    std::size_t frame = 0;                 // 1-based frame index
    const FeatureMap* features = nullptr;  // stride-4 backbone features
    const LabelMask* mask = nullptr;       // labels at feature resolution
};

// Sub-seed of one proxy entry.
std::uint64_t proxy_entry_seed(std::uint64_t seed, std::size_t reference, std::size_t k, std::size_t object);

ProxySet build_adaptive_proxy(std::span<const ReferenceView> refs, std::size_t object,
                              const ClusterSchedule& schedule, std::uint64_t seed,
                              ProxyMode mode = ProxyMode::clustered, const KMeansOptions& opts = {});

// Centroids and assignment maps of a proxy set, packed for the weight file
// format: "proxy/obj<i>/ref<r>/k<K>/centroids" [n, C] and ".../assignment"
// [H, W] holding 1 + centroid index (0 outside the support).
WeightBundle proxy_set_to_bundle(const ProxySet& proxies);

} // namespace aopvos
