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

#include "aopvos/proxy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "aopvos/errors.hpp"
#include "aopvos/rng.hpp"

namespace aopvos {

ClusterSchedule ClusterSchedule::parse(std::string_view text) {
    ClusterSchedule s;
    s.cluster_counts.clear();
    while (!text.empty()) {
        const auto comma = text.find(',');
        auto token = text.substr(0, comma);
        while (!token.empty() && token.front() == ' ')
            token.remove_prefix(1);
        while (!token.empty() && token.back() == ' ')
            token.remove_suffix(1);
        if (token == "full") {
            s.cluster_counts.push_back(kFullResolution);
        } else {
            std::size_t k = 0;
            const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), k);
            if (ec != std::errc() || ptr != token.data() + token.size())
                throw ConfigError("invalid cluster count '" + std::string(token) + "'");
            s.cluster_counts.push_back(k);
        }
        if (comma == std::string_view::npos)
            break;
        text.remove_prefix(comma + 1);
    }
    s.validate();
    return s;
}

std::string ClusterSchedule::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < cluster_counts.size(); ++i) {
        if (i)
            out += ',';
        out += cluster_counts[i] == kFullResolution ? "full" : std::to_string(cluster_counts[i]);
    }
    return out;
}

void ClusterSchedule::validate() const {
    if (cluster_counts.empty())
        throw ConfigError("cluster schedule is empty");
    for (auto k : cluster_counts)
        if (k == 0)
            throw ConfigError("cluster counts must be >= 1");
}

void Points::push_back(std::span<const float> p) {
    if (dim == 0)
        dim = p.size();
    if (p.size() != dim)
        throw DimensionError("point dimension mismatch");
    data.insert(data.end(), p.begin(), p.end());
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw DimensionError("squared_distance: length mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = static_cast<double>(a[i]) - b[i];
        d += t * t;
    }
    return d;
}

std::vector<std::size_t> kmeans_assign(const Points& points, const Points& centroids) {
    if (centroids.empty())
        throw ArgumentError("kmeans_assign: no centroids");
    std::vector<std::size_t> a(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = squared_distance(points[i], centroids[0]);
        std::size_t arg = 0;
        for (std::size_t k = 1; k < centroids.size(); ++k) {
            const double d = squared_distance(points[i], centroids[k]);
            if (d < best) {
                best = d;
                arg = k;
            }
        }
        a[i] = arg;
    }
    return a;
}

Points kmeans_update(const Points& points, std::span<const std::size_t> assignment, const Points& previous) {
    const std::size_t k = previous.size();
    const std::size_t dim = points.dim;
    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto c = assignment[i];
        ++counts[c];
        const auto p = points[i];
        for (std::size_t d = 0; d < dim; ++d)
            sums[c * dim + d] += p[d];
    }
    Points out = previous;
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0)
            continue;
        for (std::size_t d = 0; d < dim; ++d)
            out[c][d] = static_cast<float>(sums[c * dim + d] / static_cast<double>(counts[c]));
    }
    return out;
}

double kmeans_inertia(const Points& points, const Points& centroids, std::span<const std::size_t> assignment) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        total += squared_distance(points[i], centroids[assignment[i]]);
    return total;
}

Points kmeanspp_init(const Points& points, std::size_t k, std::uint64_t seed) {
    const std::size_t n = points.size();
    CounterRng rng(seed);
    Points centroids;
    centroids.dim = points.dim;
    centroids.push_back(points[rng.below(n)]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i)
        d2[i] = squared_distance(points[i], centroids[0]);
    while (centroids.size() < k) {
        double total = 0.0;
        for (double v : d2)
            total += v;
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = rng.below(n);
        } else {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            pick = n;
            std::size_t last_positive = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0)
                    continue;
                last_positive = i;
                cum += d2[i];
                if (cum > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n)
                pick = last_positive;
        }
        centroids.push_back(points[pick]);
        const auto c = centroids[centroids.size() - 1];
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(points[i], c));
    }
    return centroids;
}

namespace {

ClusterResult lloyd(const Points& points, std::size_t k, std::uint64_t seed, const KMeansOptions& opts) {
    ClusterResult r;
    r.centroids = kmeanspp_init(points, k, seed);
    r.assignment = kmeans_assign(points, r.centroids);
    r.inertia = kmeans_inertia(points, r.centroids, r.assignment);
    r.inertia_history.push_back(r.inertia);

    for (std::size_t it = 0; it < opts.max_iter; ++it) {
        Points next = kmeans_update(points, r.assignment, r.centroids);

        std::vector<std::size_t> counts(k, 0);
        for (auto a : r.assignment)
            ++counts[a];
        std::vector<bool> used(points.size(), false);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0)
                continue;
            // Re-seed with the point farthest from its current centroid.
            double far = -1.0;
            std::size_t arg = points.size();
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (used[i])
                    continue;
                const double d = squared_distance(points[i], next[r.assignment[i]]);
                if (d > far) {
                    far = d;
                    arg = i;
                }
            }
            if (arg == points.size() || far <= 0.0)
                continue;
            used[arg] = true;
            std::copy(points[arg].begin(), points[arg].end(), next[c].begin());
        }

        double movement = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            movement = std::max(movement, std::sqrt(squared_distance(next[c], r.centroids[c])));

        r.centroids = std::move(next);
        r.assignment = kmeans_assign(points, r.centroids);
        r.inertia = kmeans_inertia(points, r.centroids, r.assignment);
        r.inertia_history.push_back(r.inertia);
        r.iterations = it + 1;
        if (movement < opts.tol)
            break;
    }
    return r;
}

} // namespace

ClusterResult kmeans(const Points& points, std::size_t k, std::uint64_t seed, const KMeansOptions& opts) {
    if (k == 0)
        throw ArgumentError("kmeans: K must be >= 1");
    if (points.empty())
        throw ArgumentError("kmeans: no points");
    if (k >= points.size()) {
        ClusterResult r;
        r.centroids = points;
        r.assignment = kmeans_assign(points, r.centroids);
        r.inertia = kmeans_inertia(points, r.centroids, r.assignment);
        r.inertia_history.push_back(r.inertia);
        return r;
    }
    ClusterResult best = lloyd(points, k, seed, opts);
    for (std::size_t run = 1; run < opts.restarts; ++run) {
        ClusterResult r = lloyd(points, k, derive_seed(seed, {run}), opts);
        if (r.inertia < best.inertia)
            best = std::move(r);
    }
    return best;
}

std::vector<std::size_t> support_of(const LabelMask& mask, std::size_t object) {
    std::vector<std::size_t> s;
    const auto labels = mask.labels();
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == object)
            s.push_back(i);
    return s;
}

FeatureMap object_embedding(const FeatureMap& f_r, const LabelMask& y_r, std::size_t object) {
    return elementwise_mask(f_r, y_r, object);
}

namespace {

ProxyEntry absent_entry(const FeatureMap& embedding, std::size_t k) {
    ProxyEntry e;
    e.k = k;
    e.absent = true;
    e.map = FeatureMap(embedding.height(), embedding.width(), embedding.channels());
    e.centroids.dim = embedding.channels();
    return e;
}

Points gather(const FeatureMap& embedding, std::span<const std::size_t> support) {
    Points p;
    p.dim = embedding.channels();
    p.data.reserve(support.size() * p.dim);
    for (auto idx : support)
        p.push_back(embedding.cell(idx));
    return p;
}

// Writes each group's centroid over its member cells.
void propagate(ProxyEntry& e) {
    const std::size_t c = e.map.channels();
    for (std::size_t g = 0; g < e.members.size(); ++g) {
        const auto centroid = e.centroids[g];
        for (auto idx : e.members[g])
            std::copy(centroid.begin(), centroid.end(), e.map.data().begin() + idx * c);
    }
}

void check_support(const FeatureMap& embedding, std::span<const std::size_t> support) {
    for (auto idx : support)
        if (idx >= embedding.cells())
            throw DimensionError("support cell index outside the embedding");
}

} // namespace

ProxyEntry build_proxy_entry(const FeatureMap& embedding, std::span<const std::size_t> support, std::size_t k,
                             std::uint64_t seed, const KMeansOptions& opts) {
    if (k == 0)
        throw ArgumentError("build_proxy_entry: K must be >= 1");
    check_support(embedding, support);
    if (support.empty())
        return absent_entry(embedding, k);

    ProxyEntry e;
    e.k = k;
    const Points pts = gather(embedding, support);
    if (k == kFullResolution) {
        e.map = embedding;
        e.centroids = pts;
        e.members.reserve(support.size());
        for (auto idx : support)
            e.members.push_back({idx});
        return e;
    }

    const ClusterResult r = kmeans(pts, k, seed, opts);
    e.map = FeatureMap(embedding.height(), embedding.width(), embedding.channels());
    e.centroids.dim = embedding.channels();
    std::vector<std::vector<std::size_t>> groups(r.centroids.size());
    for (std::size_t i = 0; i < support.size(); ++i)
        groups[r.assignment[i]].push_back(support[i]);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty())
            continue;
        e.centroids.push_back(r.centroids[g]);
        e.members.push_back(std::move(groups[g]));
    }
    propagate(e);
    return e;
}

ProxyEntry build_grid_proxy(const FeatureMap& embedding, std::span<const std::size_t> support, std::size_t grid) {
    if (grid == 0)
        throw ArgumentError("build_grid_proxy: grid must be >= 1");
    check_support(embedding, support);
    if (support.empty())
        return absent_entry(embedding, grid);

    const std::size_t w = embedding.width();
    std::size_t r0 = embedding.height(), r1 = 0, c0 = w, c1 = 0;
    for (auto idx : support) {
        r0 = std::min(r0, idx / w);
        r1 = std::max(r1, idx / w);
        c0 = std::min(c0, idx % w);
        c1 = std::max(c1, idx % w);
    }
    const std::size_t bh = r1 - r0 + 1;
    const std::size_t bw = c1 - c0 + 1;

    // Occupied grid cells keyed by (row, column), visited in row-major order.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> cells;
    for (auto idx : support) {
        const std::size_t gy = (idx / w - r0) * grid / bh;
        const std::size_t gx = (idx % w - c0) * grid / bw;
        cells[{gy, gx}].push_back(idx);
    }

    ProxyEntry e;
    e.k = grid;
    e.map = FeatureMap(embedding.height(), w, embedding.channels());
    e.centroids.dim = embedding.channels();
    std::vector<double> acc(embedding.channels());
    std::vector<float> mean(embedding.channels());
    for (auto& [key, cell] : cells) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (auto idx : cell) {
            const auto v = embedding.cell(idx);
            for (std::size_t c = 0; c < acc.size(); ++c)
                acc[c] += v[c];
        }
        for (std::size_t c = 0; c < acc.size(); ++c)
            mean[c] = static_cast<float>(acc[c] / static_cast<double>(cell.size()));
        e.centroids.push_back(mean);
        e.members.push_back(std::move(cell));
    }
    propagate(e);
    return e;
}

std::uint64_t proxy_entry_seed(std::uint64_t seed, std::size_t reference, std::size_t k, std::size_t object) {
    return derive_seed(seed, {0x50524F5859ULL, reference, static_cast<std::uint64_t>(k), object});
}

ProxySet build_adaptive_proxy(std::span<const ReferenceView> refs, std::size_t object,
                              const ClusterSchedule& schedule, std::uint64_t seed, ProxyMode mode,
                              const KMeansOptions& opts) {
    if (refs.empty())
        throw ArgumentError("build_adaptive_proxy: no references");
    schedule.validate();
    for (std::size_t i = 1; i < refs.size(); ++i)
        if (refs[i].frame <= refs[i - 1].frame)
            throw ArgumentError("build_adaptive_proxy: references must be strictly increasing");

    ProxySet set;
    set.object = object;
    for (const auto& ref : refs) {
        if (ref.features == nullptr || ref.mask == nullptr)
            throw ArgumentError("build_adaptive_proxy: incomplete reference view");
        const FeatureMap& f = *ref.features;
        const LabelMask& y = *ref.mask;
        if (f.height() != y.height() || f.width() != y.width())
            throw DimensionError("reference " + std::to_string(ref.frame) +
                                 ": mask must be downsampled to the feature size");
        const FeatureMap e = object_embedding(f, y, object);
        const auto support = support_of(y, object);
        for (auto k : schedule.cluster_counts) {
            ProxyEntry entry;
            if (mode == ProxyMode::grid && k != kFullResolution)
                entry = build_grid_proxy(e, support, k);
            else
                entry = build_proxy_entry(e, support, k, proxy_entry_seed(seed, ref.frame, k, object), opts);
            entry.reference = ref.frame;
            set.entries.push_back(std::move(entry));
        }
    }
    return set;
}

WeightBundle proxy_set_to_bundle(const ProxySet& proxies) {
    WeightBundle b;
    for (const auto& e : proxies.entries) {
        const std::string base = "proxy/obj" + std::to_string(proxies.object) + "/ref" + std::to_string(e.reference) +
                                 "/k" + (e.k == kFullResolution ? std::string("full") : std::to_string(e.k));
        b.set(base + "/centroids", {{e.centroids.size(), e.centroids.dim}, e.centroids.data});
        WeightArray assign{{e.map.height(), e.map.width()}, std::vector<float>(e.map.cells(), 0.0f)};
        for (std::size_t g = 0; g < e.members.size(); ++g)
            for (auto idx : e.members[g])
                assign.values[idx] = static_cast<float>(g + 1);
        b.set(base + "/assignment", std::move(assign));
    }
    return b;
}

} // namespace aopvos
