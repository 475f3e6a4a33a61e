// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "tokmerge/synth.hpp"
#include "tokmerge/temporal.hpp"

using namespace tokmerge;
using namespace tokmerge::synth;

TEST_SUITE("synth") {
    TEST_CASE("xoshiro256** seeded by splitmix64 matches reference outputs") {
        // Reference values from an independent implementation of both generators.
        Rng rng(0);
        CHECK(rng.next() == 0x99ec5f36cb75f2b4ULL);
        CHECK(rng.next() == 0xbf6e1f784956452aULL);
        CHECK(rng.next() == 0x1a5f849d4933e6e0ULL);
    }

    TEST_CASE("uniform, below and normal behave") {
        Rng rng(42);
        double sum = 0.0, sq = 0.0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const double u = rng.uniform();
            REQUIRE(u >= 0.0);
            REQUIRE(u < 1.0);
            const auto b = rng.below(7);
            REQUIRE(b < 7);
            const double z = rng.normal();
            REQUIRE(std::isfinite(z));
            sum += z;
            sq += z * z;
        }
        CHECK(std::abs(sum / n) < 0.05);
        CHECK(std::abs(sq / n - 1.0) < 0.05);
        CHECK(rng.below(1) == 0);
    }

    TEST_CASE("same seed gives bit-identical output, different seeds differ") {
        SynthSpec spec{6, {3, 3}, 16, {{3, 0.5}, {3, 1.0}}, 0.05, 9};
        const auto a = generate(spec);
        const auto b = generate(spec);
        CHECK(a.stream.data() == b.stream.data());
        CHECK(a.ground_truth == b.ground_truth);
        CHECK(a.planted_slots == b.planted_slots);
        spec.seed = 10;
        CHECK(generate(spec).stream.data() != a.stream.data());
    }

    TEST_CASE("noise-free full redundancy equals ground truth at tau 0.99") {
        const SynthSpec spec{5, {4, 4}, 32, {{5, 1.0}}, 0.0, 1};
        const auto out = generate(spec);
        CHECK(temporal::pairwise_redundancy(out.stream, 0.99) == out.ground_truth);
        CHECK(out.expected_gain == 16 * 4);
    }

    TEST_CASE("zero fraction yields an all-false mask for d >= 32") {
        const SynthSpec spec{6, {5, 5}, 32, {{6, 0.0}}, 0.0, 3};
        const auto out = generate(spec);
        const auto mask = temporal::pairwise_redundancy(out.stream, 0.8);
        for (std::size_t m = 0; m < mask.rows(); ++m) {
            for (std::size_t k = 0; k < mask.cols(); ++k) {
                const auto a = out.stream.token(m, k), b = out.stream.token(m + 1, k);
                REQUIRE(oracle::cosine({a.begin(), a.end()}, {b.begin(), b.end()}) <= 0.8);
                REQUIRE_FALSE(mask.test(m, k));
                REQUIRE_FALSE(out.ground_truth.test(m, k));
            }
        }
    }

    TEST_CASE("noise-free planted segments are recovered exactly") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const SynthSpec spec{12, {6, 6}, 48, {{4, 0.5}, {3, 0.3}, {5, 0.8}}, 0.0, seed};
            const auto out = generate(spec);
            const auto mask = temporal::pairwise_redundancy(out.stream, 0.8);
            REQUIRE(mask == out.ground_truth);
            const auto plan = temporal::optimal_segmentation(mask);
            CHECK(plan.boundaries == out.boundaries);
            CHECK(plan.boundaries == std::vector<std::size_t>{0, 4, 7, 12});
            const std::uint64_t analytic = 18 * 3 + 11 * 2 + 29 * 4;
            CHECK(out.expected_gain == analytic);
            CHECK(plan.total_gain == analytic);
        }
    }

    TEST_CASE("planted slots follow round(fraction * N_v)") {
        CHECK(planted_count({3, 0.5}, 9) == 5);
        CHECK(planted_count({3, 0.25}, 10) == 3);
        CHECK(planted_count({3, 1.0}, 196) == 196);
        const SynthSpec spec{4, {3, 3}, 8, {{4, 0.5}}, 0.0, 0};
        const auto out = generate(spec);
        REQUIRE(out.planted_slots.size() == 1);
        CHECK(out.planted_slots[0].size() == 5);
        CHECK(std::is_sorted(out.planted_slots[0].begin(), out.planted_slots[0].end()));
    }

    TEST_CASE("invalid specs are rejected") {
        CHECK_THROWS_AS(generate({4, {2, 2}, 8, {{3, 0.5}}, 0.0, 0}), ConfigError);
        CHECK_THROWS_AS(generate({4, {2, 2}, 8, {{4, 1.5}}, 0.0, 0}), ConfigError);
        CHECK_THROWS_AS(generate({4, {2, 2}, 8, {{4, 0.5}}, -1.0, 0}), ConfigError);
        CHECK_THROWS_AS(generate({4, {2, 2}, 8, {{0, 0.5}, {4, 0.5}}, 0.0, 0}), ConfigError);
        CHECK_THROWS_AS(generate({4, {2, 2}, 0, {{4, 0.5}}, 0.0, 0}), ConfigError);
    }

    TEST_CASE("random attention rows are distributions") {
        const auto a = random_attention(2, 5, 4, 7);
        REQUIRE(a.size() == 2 * 5 * 5);
        for (std::size_t r = 0; r < 10; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < 5; ++c) s += a[r * 5 + c];
            CHECK(std::abs(s - 1.0) < 1e-5);
        }
        CHECK(random_attention(2, 5, 4, 7) == a);
    }
}
