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

#include <cmath>

#include "aopvos/correlation.hpp"
#include "aopvos/errors.hpp"
#include "aopvos/layers.hpp"
#include "support.hpp"

using namespace aopvos;

namespace {

Points centroids_1d(std::initializer_list<float> v) {
    Points p;
    p.dim = 1;
    p.data.assign(v.begin(), v.end());
    return p;
}

ProxySet proxies_for(const FeatureMap& f, const LabelMask& y, std::size_t object, const char* schedule,
                     std::size_t frame = 1) {
    const ReferenceView refs[] = {{frame, &f, &y}};
    return build_adaptive_proxy(refs, object, ClusterSchedule::parse(schedule), 17);
}

} // namespace

TEST_CASE("l2_similarity") {
    const std::vector<float> a{1, 2, 3};
    CHECK(l2_similarity(a, a) == 1.0);
    const std::vector<float> z{0, 0}, u{1, 0}, v{3, 4};
    CHECK(l2_similarity(z, u) == 0.5);
    CHECK(l2_similarity(z, v) == doctest::Approx(1.0 / 26.0));
    CHECK_THROWS_AS(l2_similarity(a, z), DimensionError);
}

TEST_CASE("similarity_map") {
    const FeatureMap constant(3, 3, 2, 0.5f);
    Points c;
    c.push_back(std::vector<float>{0.5f, 0.5f});
    const auto ones = similarity_map(constant, c);
    for (float v : ones.data())
        CHECK(v == 1.0f);

    CHECK(similarity_map(constant, Points{}) == FeatureMap(3, 3, 1));

    const FeatureMap f(1, 3, 1, {0, 2, 9});
    const auto s = similarity_map(f, centroids_1d({0, 10}));
    CHECK(s.data()[0] == 1.0f);
    CHECK(s.data()[1] == doctest::Approx(0.2));
    CHECK(s.data()[2] == doctest::Approx(0.5));

    CHECK_THROWS_AS(similarity_map(f, c), DimensionError);

    SUBCASE("monotone in the centroid set and bounded") {
        testing::Rng rng(1);
        const auto g = testing::random_map(rng, 5, 6, 4);
        Points cs;
        cs.dim = 4;
        FeatureMap prev(5, 6, 1);
        for (int i = 0; i < 6; ++i) {
            cs.push_back(testing::random_map(rng, 1, 1, 4).data());
            const auto cur = similarity_map(g, cs);
            for (std::size_t q = 0; q < cur.cells(); ++q) {
                REQUIRE(cur.data()[q] >= prev.data()[q]);
                REQUIRE(cur.data()[q] > 0.0f);
                REQUIRE(cur.data()[q] <= 1.0f);
            }
            prev = cur;
        }
    }
}

TEST_CASE("full-resolution proxies reproduce pixel-level nearest-neighbour matching") {
    testing::Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const auto fr = testing::random_map(rng, 8, 8, 5);
        const auto ft = testing::random_map(rng, 8, 8, 5);
        const auto yr = testing::random_mask(rng, 8, 8, 2);
        std::vector<ProxySet> all;
        for (std::size_t o = 0; o <= 2; ++o)
            all.push_back(proxies_for(fr, yr, o, "full"));
        const auto labels = nearest_proxy_classify(ft, all);
        const auto stack = similarity_stack(ft, all[1]);
        for (std::size_t q = 0; q < ft.cells(); ++q) {
            double best[3] = {0.0, 0.0, 0.0};
            for (std::size_t p = 0; p < fr.cells(); ++p) {
                double d = 0.0;
                for (std::size_t c = 0; c < 5; ++c) {
                    const double t = static_cast<double>(ft.cell(q)[c]) - fr.cell(p)[c];
                    d += t * t;
                }
                auto& b = best[yr.labels()[p]];
                b = std::max(b, 1.0 / (1.0 + d));
            }
            REQUIRE(stack.maps[0].data()[q] == static_cast<float>(best[1]));
            // Scores are compared after storage as float; ties go to the lower label.
            std::size_t arg = 0;
            for (std::size_t o = 1; o < 3; ++o)
                if (static_cast<float>(best[o]) > static_cast<float>(best[arg]))
                    arg = o;
            REQUIRE(labels.labels()[q] == arg);
        }
    }
}

TEST_CASE("nearest_proxy_classify examples") {
    const FeatureMap ft(3, 3, 2, 1.0f);
    Points near, far;
    near.push_back(std::vector<float>{1, 1});
    far.push_back(std::vector<float>{9, 9});
    auto make = [](std::size_t obj, const Points& c) {
        ProxySet s;
        s.object = obj;
        ProxyEntry e;
        e.k = 1;
        e.centroids = c;
        s.entries.push_back(e);
        return s;
    };
    {
        const std::vector<ProxySet> all{make(0, far), make(1, near)};
        CHECK(nearest_proxy_classify(ft, all) == LabelMask(3, 3, 1, 1));
    }
    {
        const std::vector<ProxySet> all{make(0, far), make(1, near), make(2, near)};
        CHECK(nearest_proxy_classify(ft, all) == LabelMask(3, 3, 2, 1));
    }
    CHECK_THROWS_AS(nearest_proxy_classify(ft, std::vector<ProxySet>{}), ArgumentError);
    const std::vector<ProxySet> wrong{make(1, near)};
    CHECK_THROWS_AS(nearest_proxy_classify(ft, wrong), ArgumentError);

    SUBCASE("two colours") {
        FeatureMap f(4, 4, 3);
        LabelMask y(4, 4, 1);
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 4; ++c) {
                const bool red = c >= 2;
                y.at(r, c) = red ? 1 : 0;
                f.at(r, c, 0) = red ? 1.0f : 0.1f;
                f.at(r, c, 2) = red ? 0.0f : 0.8f;
            }
        FeatureMap target(4, 4, 3);
        LabelMask expect(4, 4, 1);
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 4; ++c) {
                const bool red = (r + c) % 3 == 0;
                expect.at(r, c) = red ? 1 : 0;
                target.at(r, c, 0) = red ? 1.0f : 0.1f;
                target.at(r, c, 2) = red ? 0.0f : 0.8f;
            }
        const std::vector<ProxySet> all{proxies_for(f, y, 0, "1,full"), proxies_for(f, y, 1, "1,full")};
        CHECK(nearest_proxy_classify(target, all) == expect);
    }
}

TEST_CASE("similarity stack follows entry order") {
    testing::Rng rng(3);
    const auto f1 = testing::random_map(rng, 5, 5, 3), f2 = testing::random_map(rng, 5, 5, 3);
    const auto y1 = testing::random_mask(rng, 5, 5, 1);
    LabelMask y2(5, 5, 1);
    const ReferenceView refs[] = {{1, &f1, &y1}, {2, &f2, &y2}};
    const auto set = build_adaptive_proxy(refs, 1, ClusterSchedule::parse("1,3,full"), 4);
    const auto ft = testing::random_map(rng, 5, 5, 3);
    const auto stack = similarity_stack(ft, set);
    REQUIRE(stack.maps.size() == 6);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(stack.maps[i] == similarity_map(ft, set.entries[i].centroids));
    for (std::size_t i = 3; i < 6; ++i)
        CHECK(stack.maps[i] == FeatureMap(5, 5, 1));
}

TEST_CASE("generate_proto_map") {
    ProtoMapConfig cfg{6, 3, 4, 5};
    const auto table = proto_parameter_table(cfg);
    testing::Rng rng(4);
    const auto ft = testing::random_map(rng, 6, 7, 6);
    const auto fr = testing::random_map(rng, 6, 7, 6);
    const auto yr = testing::random_mask(rng, 6, 7, 1);
    const auto set = proxies_for(fr, yr, 1, "1,4,full");

    SUBCASE("skip-only weights reduce to the skip projection of f_t") {
        auto w = testing::zero_bundle(table);
        const auto seeded = init_weights(9, table);
        const auto skip_w = seeded.get("proto/ens1/skip/weight");
        w.set("proto/ens1/skip/weight", skip_w);
        SimilarityStack zeros{1, std::vector<FeatureMap>(3, FeatureMap(6, 7, 1))};
        const auto out = generate_proto_map(ft, zeros, w, cfg);
        CHECK(out.channels() == 5);
        for (std::size_t q = 0; q < ft.cells(); ++q)
            for (std::size_t o = 0; o < 5; ++o) {
                double acc = 0.0;
                for (std::size_t i = 0; i < 6; ++i)
                    acc += skip_w.values[o * 10 + 4 + i] * ft.cell(q)[i];
                REQUIRE(out.cell(q)[o] == doctest::Approx(acc).epsilon(1e-6));
            }
    }

    const auto w = init_weights(9, table);
    const auto a = generate_proto_map(ft, set, w, cfg);
    CHECK(a.height() == 6);
    CHECK(a.channels() == 5);
    CHECK(a == generate_proto_map(ft, set, w, cfg));
    CHECK(a.all_finite());

    SUBCASE("a similarity change stays within the 3x3 receptive field") {
        auto stack = similarity_stack(ft, set);
        const auto base = generate_proto_map(ft, stack, w, cfg);
        stack.maps[1].at(3, 2, 0) += 0.5f;
        const auto moved = generate_proto_map(ft, stack, w, cfg);
        bool any = false;
        for (std::size_t y = 0; y < 6; ++y)
            for (std::size_t x = 0; x < 7; ++x) {
                const bool near = std::abs(static_cast<int>(y) - 3) <= 2 && std::abs(static_cast<int>(x) - 2) <= 2;
                for (std::size_t c = 0; c < 5; ++c) {
                    const bool diff = moved.at(y, x, c) != base.at(y, x, c);
                    any = any || diff;
                    if (!near)
                        REQUIRE_FALSE(diff);
                }
            }
        CHECK(any);
    }

    SUBCASE("similarity channel order matters") {
        auto stack = similarity_stack(ft, set);
        std::swap(stack.maps[0], stack.maps[2]);
        CHECK_FALSE(generate_proto_map(ft, stack, w, cfg) == a);
    }

    SUBCASE("references share the projection and are averaged") {
        ProtoMapConfig two{6, 2, 4, 5};
        const auto w2 = init_weights(9, proto_parameter_table(two));
        const ReferenceView once[] = {{1, &fr, &yr}};
        const ReferenceView twice[] = {{1, &fr, &yr}, {2, &fr, &yr}};
        const auto single = build_adaptive_proxy(once, 1, ClusterSchedule::parse("1,full"), 17);
        const auto doubled = build_adaptive_proxy(twice, 1, ClusterSchedule::parse("1,full"), 17);
        const auto a2 = generate_proto_map(ft, single, w2, two);
        const auto b = generate_proto_map(ft, doubled, w2, two);
        for (std::size_t i = 0; i < a2.data().size(); ++i)
            REQUIRE(std::abs(a2.data()[i] - b.data()[i]) < 1e-5);
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(generate_proto_map(testing::random_map(rng, 6, 7, 5), set, w, cfg), DimensionError);
        SimilarityStack bad{1, std::vector<FeatureMap>(2, FeatureMap(6, 7, 1))};
        CHECK_THROWS_AS(generate_proto_map(ft, bad, w, cfg), DimensionError);
        CHECK_THROWS_AS(generate_proto_map(ft, set, WeightBundle{}, cfg), ConfigError);
    }
}
