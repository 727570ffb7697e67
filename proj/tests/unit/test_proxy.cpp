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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "aopvos/errors.hpp"
#include "aopvos/proxy.hpp"
#include "aopvos/rng.hpp"
#include "support.hpp"

using namespace aopvos;

namespace {

Points points_1d(std::initializer_list<float> v) {
    Points p;
    p.dim = 1;
    p.data.assign(v.begin(), v.end());
    return p;
}

Points random_points(testing::Rng& rng, std::size_t n, std::size_t dim) {
    std::uniform_real_distribution<float> d(-3, 3);
    Points p;
    p.dim = dim;
    for (std::size_t i = 0; i < n * dim; ++i)
        p.data.push_back(d(rng));
    return p;
}

// Minimum inertia over every assignment of n points to at most k labels.
double exhaustive_inertia(const Points& pts, std::size_t k) {
    const std::size_t n = pts.size();
    std::vector<std::size_t> label(n, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> mean(pts.dim, 0.0);
            std::size_t count = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (label[i] == c) {
                    ++count;
                    for (std::size_t d = 0; d < pts.dim; ++d)
                        mean[d] += pts[i][d];
                }
            for (std::size_t i = 0; i < n; ++i)
                if (label[i] == c)
                    for (std::size_t d = 0; d < pts.dim; ++d) {
                        const double t = pts[i][d] - mean[d] / static_cast<double>(count);
                        total += t * t;
                    }
        }
        best = std::min(best, total);
        std::size_t pos = 0;
        while (pos < n && ++label[pos] == k)
            label[pos++] = 0;
        if (pos == n)
            break;
    }
    return best;
}

} // namespace

TEST_CASE("cluster schedule parsing") {
    const auto s = ClusterSchedule::parse("1,16,full");
    CHECK(s.cluster_counts == std::vector<std::size_t>{1, 16, kFullResolution});
    CHECK(s.to_string() == "1,16,full");
    CHECK(ClusterSchedule::parse(" 4 , full").size() == 2);
    CHECK(ClusterSchedule{}.to_string() == "1,16,full");
    CHECK_THROWS_AS(ClusterSchedule::parse("1,0"), ConfigError);
    CHECK_THROWS_AS(ClusterSchedule::parse("1,x"), ConfigError);
    CHECK_THROWS_AS(ClusterSchedule::parse(""), ConfigError);
}

TEST_CASE("kmeans examples") {
    SUBCASE("two tight pairs") {
        const auto r = kmeans(points_1d({0, 0, 10, 10}), 2, 3);
        std::vector<float> c{r.centroids[0][0], r.centroids[1][0]};
        std::sort(c.begin(), c.end());
        CHECK(c == std::vector<float>{0, 10});
        CHECK(r.inertia == 0.0);
        CHECK(exhaustive_inertia(points_1d({0, 0, 10, 10}), 2) == 0.0);
    }
    SUBCASE("K=1 is the mean") {
        testing::Rng rng(1);
        const auto p = random_points(rng, 17, 3);
        const auto r = kmeans(p, 1, 9);
        for (std::size_t d = 0; d < 3; ++d) {
            double s = 0;
            for (std::size_t i = 0; i < 17; ++i)
                s += p[i][d];
            CHECK(r.centroids[0][d] == doctest::Approx(s / 17).epsilon(1e-6));
        }
    }
    SUBCASE("K >= n gives each point its own centroid") {
        const auto p = points_1d({1, 5, 9});
        for (std::size_t k : {3u, 7u}) {
            const auto r = kmeans(p, k, 1);
            CHECK(r.centroids.data == p.data);
            CHECK(r.inertia == 0.0);
            CHECK(r.assignment == std::vector<std::size_t>{0, 1, 2});
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(kmeans(points_1d({1}), 0, 1), ArgumentError);
        CHECK_THROWS_AS(kmeans(Points{}, 2, 1), ArgumentError);
    }
}

TEST_CASE("assignment and update match brute force on small 1-D sets") {
    const float values[] = {0.0f, 1.0f, 3.0f};
    const float grid[] = {-1.0f, 0.5f, 1.0f, 3.0f};
    std::size_t checked = 0;
    for (std::size_t n = 1; n <= 5; ++n) {
        std::size_t combos = 1;
        for (std::size_t i = 0; i < n; ++i)
            combos *= 3;
        for (std::size_t code = 0; code < combos; ++code) {
            Points pts;
            pts.dim = 1;
            for (std::size_t i = 0, c = code; i < n; ++i, c /= 3)
                pts.data.push_back(values[c % 3]);
            for (std::size_t k = 1; k <= 3; ++k) {
                std::size_t cfgs = 1;
                for (std::size_t i = 0; i < k; ++i)
                    cfgs *= 4;
                for (std::size_t cc = 0; cc < cfgs; ++cc) {
                    Points cent;
                    cent.dim = 1;
                    for (std::size_t i = 0, c = cc; i < k; ++i, c /= 4)
                        cent.data.push_back(grid[c % 4]);
                    const auto a = kmeans_assign(pts, cent);
                    for (std::size_t i = 0; i < n; ++i) {
                        std::size_t arg = 0;
                        for (std::size_t j = 1; j < k; ++j)
                            if (std::abs(pts.data[i] - cent.data[j]) < std::abs(pts.data[i] - cent.data[arg]))
                                arg = j;
                        REQUIRE(a[i] == arg);
                    }
                    const auto upd = kmeans_update(pts, a, cent);
                    for (std::size_t j = 0; j < k; ++j) {
                        double s = 0;
                        std::size_t cnt = 0;
                        for (std::size_t i = 0; i < n; ++i)
                            if (a[i] == j) {
                                s += pts.data[i];
                                ++cnt;
                            }
                        const float expect = cnt ? static_cast<float>(s / static_cast<double>(cnt)) : cent.data[j];
                        REQUIRE(upd.data[j] == expect);
                    }
                    ++checked;
                }
            }
        }
    }
    CHECK(checked > 10000);
}

TEST_CASE("kmeans properties on random data") {
    testing::Rng rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const auto pts = random_points(rng, 40, 3);
        const std::size_t k = 2 + static_cast<std::size_t>(trial % 5);
        const auto r = kmeans(pts, k, static_cast<std::uint64_t>(trial));

        for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
            REQUIRE(r.inertia_history[i] <= r.inertia_history[i - 1] + 1e-9);
        CHECK(std::abs(r.inertia - kmeans_inertia(pts, r.centroids, r.assignment)) < 1e-6);
        CHECK(r.assignment == kmeans_assign(pts, r.centroids));

        // Convex hull per coordinate.
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t d = 0; d < 3; ++d) {
                float lo = std::numeric_limits<float>::infinity(), hi = -lo;
                bool any = false;
                for (std::size_t i = 0; i < pts.size(); ++i)
                    if (r.assignment[i] == c) {
                        any = true;
                        lo = std::min(lo, pts[i][d]);
                        hi = std::max(hi, pts[i][d]);
                    }
                if (any) {
                    REQUIRE(r.centroids[c][d] >= lo - 1e-6f);
                    REQUIRE(r.centroids[c][d] <= hi + 1e-6f);
                }
            }

        // Deterministic, and a converged run is a fixed point of one more Lloyd step.
        const auto again = kmeans(pts, k, static_cast<std::uint64_t>(trial));
        CHECK(again.centroids.data == r.centroids.data);
        if (r.iterations < KMeansOptions{}.max_iter) {
            KMeansOptions tight;
            tight.max_iter = 200;
            tight.tol = 0.0;
            const auto conv = kmeans(pts, k, static_cast<std::uint64_t>(trial), tight);
            const auto upd = kmeans_update(pts, conv.assignment, conv.centroids);
            CHECK(kmeans_assign(pts, upd) == conv.assignment);
        }
    }
}

TEST_CASE("well separated clusters reach the exhaustive optimum") {
    testing::Rng rng(3);
    std::uniform_real_distribution<float> jitter(-0.5f, 0.5f);
    for (int trial = 0; trial < 25; ++trial) {
        Points pts;
        pts.dim = 2;
        for (int i = 0; i < 5; ++i)
            pts.push_back(std::vector<float>{jitter(rng), jitter(rng)});
        for (int i = 0; i < 5; ++i)
            pts.push_back(std::vector<float>{20 + jitter(rng), jitter(rng)});
        const auto r = kmeans(pts, 2, static_cast<std::uint64_t>(trial));
        CHECK(r.inertia == doctest::Approx(exhaustive_inertia(pts, 2)).epsilon(1e-9));
    }
}

TEST_CASE("restarts keep the best run") {
    testing::Rng rng(4);
    const auto pts = random_points(rng, 60, 2);
    KMeansOptions one, many;
    many.restarts = 6;
    const auto a = kmeans(pts, 5, 11, one);
    const auto b = kmeans(pts, 5, 11, many);
    CHECK(b.inertia <= a.inertia);
}

TEST_CASE("empty clusters are reseeded") {
    // Duplicate-heavy data makes k-means++ fall back to uniform picks.
    const auto pts = points_1d({0, 0, 0, 0, 0, 0, 5});
    const auto r = kmeans(pts, 3, 1);
    CHECK(r.inertia == 0.0);
}

TEST_CASE("object embedding") {
    const FeatureMap f(2, 2, 1, {1, 2, 3, 4});
    CHECK(object_embedding(f, LabelMask(2, 2, 1, 1), 1) == f);
    CHECK(object_embedding(f, LabelMask(2, 2, 1, 0), 1) == FeatureMap(2, 2, 1));
    CHECK(object_embedding(f, LabelMask(2, 2, 1, std::vector<Label>{1, 0, 0, 1}), 1) ==
          FeatureMap(2, 2, 1, {1, 0, 0, 4}));
    CHECK_THROWS_AS(object_embedding(f, LabelMask(1, 2, 1), 1), DimensionError);
}

TEST_CASE("build_proxy_entry") {
    testing::Rng rng(5);
    const auto f = testing::random_map(rng, 6, 7, 4);
    const auto y = testing::random_mask(rng, 6, 7, 2);
    const auto e = object_embedding(f, y, 1);
    const auto support = support_of(y, 1);
    REQUIRE(!support.empty());

    SUBCASE("K=1 is the masked mean") {
        const auto entry = build_proxy_entry(e, support, 1, 3);
        REQUIRE(entry.centroids.size() == 1);
        for (std::size_t c = 0; c < 4; ++c) {
            double s = 0;
            for (auto idx : support)
                s += e.cell(idx)[c];
            const double mean = s / static_cast<double>(support.size());
            CHECK(std::abs(entry.centroids[0][c] - mean) < 1e-6);
            for (std::size_t q = 0; q < e.cells(); ++q) {
                const bool in = std::find(support.begin(), support.end(), q) != support.end();
                REQUIRE(entry.map.cell(q)[c] == (in ? entry.centroids[0][c] : 0.0f));
            }
        }
    }

    SUBCASE("full resolution returns the embedding") {
        const auto entry = build_proxy_entry(e, support, kFullResolution, 3);
        CHECK(entry.map == e);
        CHECK(entry.centroids.size() == support.size());
        CHECK(entry.members.size() == support.size());
    }

    SUBCASE("intermediate K") {
        const auto entry = build_proxy_entry(e, support, 4, 3);
        CHECK(entry.centroids.size() <= std::min<std::size_t>(4, support.size()));
        std::size_t covered = 0;
        for (std::size_t g = 0; g < entry.members.size(); ++g) {
            REQUIRE(!entry.members[g].empty());
            for (auto idx : entry.members[g]) {
                ++covered;
                for (std::size_t c = 0; c < 4; ++c)
                    REQUIRE(entry.map.cell(idx)[c] == entry.centroids[g][c]);
            }
        }
        CHECK(covered == support.size());
        CHECK(build_proxy_entry(e, support, 4, 3).map == entry.map);
    }

    SUBCASE("values {0,0,10,10} split by value") {
        const FeatureMap g(2, 2, 1, {0, 10, 0, 10});
        const std::vector<std::size_t> all{0, 1, 2, 3};
        const auto entry = build_proxy_entry(g, all, 2, 1);
        CHECK(entry.map == g);
        CHECK(entry.centroids.size() == 2);
    }

    SUBCASE("empty support is absent") {
        const auto entry = build_proxy_entry(e, {}, 4, 3);
        CHECK(entry.absent);
        CHECK(entry.centroids.empty());
        CHECK(entry.map == FeatureMap(6, 7, 4));
    }

    CHECK_THROWS_AS(build_proxy_entry(e, support, 0, 3), ArgumentError);
    const std::vector<std::size_t> outside{100};
    CHECK_THROWS_AS(build_proxy_entry(e, outside, 2, 3), DimensionError);
}

TEST_CASE("grid proxies") {
    SUBCASE("G=1 equals K=1") {
        testing::Rng rng(6);
        const auto f = testing::random_map(rng, 5, 5, 3);
        const auto y = testing::random_mask(rng, 5, 5, 1);
        const auto e = object_embedding(f, y, 1);
        const auto s = support_of(y, 1);
        const auto grid = build_grid_proxy(e, s, 1);
        const auto km = build_proxy_entry(e, s, 1, 0);
        REQUIRE(grid.centroids.size() == 1);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(std::abs(grid.centroids[0][c] - km.centroids[0][c]) < 1e-6);
    }
    SUBCASE("uniform object") {
        const FeatureMap f(6, 6, 2, 0.25f);
        const auto y = LabelMask(6, 6, 1, 1);
        for (std::size_t g : {2u, 3u, 5u}) {
            const auto entry = build_grid_proxy(f, support_of(y, 1), g);
            for (float v : entry.centroids.data)
                REQUIRE(v == 0.25f);
        }
    }
    SUBCASE("left and right halves") {
        FeatureMap f(4, 4, 1);
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 2; x < 4; ++x)
                f.at(y, x, 0) = 1.0f;
        std::vector<std::size_t> all(16);
        for (std::size_t i = 0; i < 16; ++i)
            all[i] = i;
        const auto entry = build_grid_proxy(f, all, 2);
        CHECK(entry.centroids.data == std::vector<float>{0, 1, 0, 1});
        CHECK(entry.map == f);
    }
    SUBCASE("offset bounding box and oversized grid") {
        FeatureMap f(8, 8, 1);
        LabelMask y(8, 8, 1);
        for (std::size_t r = 3; r < 6; ++r)
            for (std::size_t c = 2; c < 4; ++c) {
                y.at(r, c) = 1;
                f.at(r, c, 0) = static_cast<float>(r * 8 + c);
            }
        const auto entry = build_grid_proxy(f, support_of(y, 1), 1000000);
        CHECK(entry.centroids.size() == 6);
        CHECK(entry.map == f);
    }
    CHECK(build_grid_proxy(FeatureMap(2, 2, 1), {}, 2).absent);
    CHECK_THROWS_AS(build_grid_proxy(FeatureMap(2, 2, 1), {}, 0), ArgumentError);
}

TEST_CASE("build_adaptive_proxy") {
    testing::Rng rng(7);
    const auto f1 = testing::random_map(rng, 6, 6, 3), f2 = testing::random_map(rng, 6, 6, 3);
    const auto y1 = testing::random_mask(rng, 6, 6, 2);
    LabelMask y2(6, 6, 2);
    y2.at(0, 0) = 1;
    const ReferenceView refs[] = {{1, &f1, &y1}, {4, &f2, &y2}};
    const auto schedule = ClusterSchedule::parse("1,16,full");

    const auto one = build_adaptive_proxy(std::span(refs, 1), 1, ClusterSchedule::parse("1"), 5);
    CHECK(one.entries.size() == 1);
    CHECK(one.entries[0].centroids.size() == 1);

    const auto set = build_adaptive_proxy(refs, 2, schedule, 5);
    REQUIRE(set.entries.size() == 6);
    CHECK(set.object == 2);
    const std::size_t expect_k[] = {1, 16, kFullResolution, 1, 16, kFullResolution};
    const std::size_t expect_r[] = {1, 1, 1, 4, 4, 4};
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(set.entries[i].k == expect_k[i]);
        CHECK(set.entries[i].reference == expect_r[i]);
        CHECK(set.entries[i].absent == (i >= 3));
    }
    for (std::size_t i = 3; i < 6; ++i)
        CHECK(set.entries[i].map == FeatureMap(6, 6, 3));

    // Entries depend only on (seed, r, K, object).
    const auto again = build_adaptive_proxy(refs, 2, schedule, 5);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(again.entries[i].map == set.entries[i].map);
    const auto alone = build_adaptive_proxy(std::span(refs, 1), 2, schedule, 5);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(alone.entries[i].map == set.entries[i].map);
    CHECK(proxy_entry_seed(5, 1, 16, 2) != proxy_entry_seed(5, 1, 16, 1));

    const auto grid = build_adaptive_proxy(std::span(refs, 1), 1, schedule, 5, ProxyMode::grid);
    CHECK(grid.entries[2].map == object_embedding(f1, y1, 1));

    const ReferenceView unordered[] = {{4, &f2, &y2}, {1, &f1, &y1}};
    CHECK_THROWS_AS(build_adaptive_proxy(unordered, 1, schedule, 5), ArgumentError);
    const LabelMask small(3, 3, 1);
    const ReferenceView bad[] = {{1, &f1, &small}};
    CHECK_THROWS_AS(build_adaptive_proxy(bad, 1, schedule, 5), DimensionError);
    CHECK_THROWS_AS(build_adaptive_proxy({}, 1, schedule, 5), ArgumentError);
}

TEST_CASE("proxy dump") {
    testing::Rng rng(8);
    const auto f = testing::random_map(rng, 4, 5, 3);
    const auto y = testing::random_mask(rng, 4, 5, 1);
    const ReferenceView refs[] = {{1, &f, &y}};
    const auto set = build_adaptive_proxy(refs, 1, ClusterSchedule::parse("2,full"), 1);
    const auto b = proxy_set_to_bundle(set);
    CHECK(b.contains("proxy/obj1/ref1/k2/centroids"));
    CHECK(b.contains("proxy/obj1/ref1/kfull/assignment"));
    const auto& assign = b.get("proxy/obj1/ref1/k2/assignment");
    for (std::size_t q = 0; q < 20; ++q)
        CHECK((assign.values[q] > 0.0f) == (y.labels()[q] == 1));
}
