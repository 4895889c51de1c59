#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "semshift/divergence.hpp"
#include "semshift/error.hpp"

using namespace semshift;
using doctest::Approx;

namespace {

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n, double zero_prob = 0.2) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    for (auto& v : p) v = u(rng) < zero_prob ? 0.0 : u(rng);
    if (std::accumulate(p.begin(), p.end(), 0.0) == 0.0) p[0] = 1.0;
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= total;
    return p;
}

}  // namespace

TEST_CASE("usage distribution") {
    SUBCASE("single slice single cluster") {
        const std::vector<int> labels{0, 0, 0};
        const std::vector<std::uint16_t> slices{0, 0, 0};
        const auto d = usage_distribution(labels, slices, 1);
        REQUIRE(d.n_slices() == 1);
        CHECK(d.probabilities[0] == std::vector<double>{1.0});
    }
    SUBCASE("counts and normalizes") {
        const std::vector<int> labels{0, 0, 1, 1, 1, 1, 1};
        const std::vector<std::uint16_t> slices{0, 0, 0, 1, 1, 1, 1};
        const auto d = usage_distribution(labels, slices, 2);
        CHECK(d.counts[0] == std::vector<std::uint64_t>{2, 1});
        CHECK(d.probabilities[0][0] == Approx(2.0 / 3.0));
        CHECK(d.probabilities[0][1] == Approx(1.0 / 3.0));
        CHECK(d.probabilities[1] == std::vector<double>{0.0, 1.0});
    }
    SUBCASE("order independence") {
        std::vector<int> labels{0, 2, 1, 1, 0, 2, 2, 1};
        std::vector<std::uint16_t> slices{0, 1, 0, 1, 1, 0, 0, 1};
        const auto a = usage_distribution(labels, slices, 3);
        std::vector<std::size_t> perm(labels.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
        std::vector<int> pl;
        std::vector<std::uint16_t> ps;
        for (auto i : perm) {
            pl.push_back(labels[i]);
            ps.push_back(slices[i]);
        }
        const auto b = usage_distribution(pl, ps, 3);
        CHECK(a.counts == b.counts);
        CHECK(a.probabilities == b.probabilities);
    }
    SUBCASE("absent slices are marked, not zero-filled") {
        const std::vector<int> labels{0, 1};
        const std::vector<std::uint16_t> slices{0, 2};
        const auto d = usage_distribution(labels, slices, 2, 3);
        CHECK(d.present == std::vector<bool>{true, false, true});
        CHECK(d.probabilities[1].empty());
    }
    SUBCASE("counts are recoverable from probabilities") {
        std::mt19937_64 rng(2);
        std::vector<int> labels;
        std::vector<std::uint16_t> slices;
        for (int i = 0; i < 5000; ++i) {
            labels.push_back(static_cast<int>(rng() % 7));
            slices.push_back(static_cast<std::uint16_t>(rng() % 3));
        }
        const auto d = usage_distribution(labels, slices, 7);
        for (std::size_t t = 0; t < 3; ++t) {
            const auto total = std::accumulate(d.counts[t].begin(), d.counts[t].end(), std::uint64_t{0});
            double row = 0.0;
            for (std::size_t c = 0; c < 7; ++c) {
                CHECK(static_cast<std::uint64_t>(std::llround(d.probabilities[t][c] * static_cast<double>(total))) ==
                      d.counts[t][c]);
                row += d.probabilities[t][c];
            }
            CHECK(std::abs(row - 1.0) < 1e-9);
        }
    }
    SUBCASE("validation") {
        const std::vector<int> labels{0, 3};
        const std::vector<std::uint16_t> slices{0, 0};
        CHECK_THROWS_AS(usage_distribution(labels, slices, 2), ValidationError);
        const std::vector<std::uint16_t> short_slices{0};
        CHECK_THROWS_AS(usage_distribution(labels, short_slices, 4), ValidationError);
    }
}

TEST_CASE("jsd identities") {
    const std::vector<double> p{0.2, 0.3, 0.5};
    CHECK(jsd(p, p) == Approx(0.0));
    CHECK(jsd(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == Approx(1.0).epsilon(1e-15));
    // H(0.75, 0.25) - 1/2
    const double h = -(0.75 * std::log2(0.75) + 0.25 * std::log2(0.25));
    CHECK(std::abs(jsd(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}) - (h - 0.5)) < 1e-12);
    CHECK(std::abs(jsd(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}) - 0.311278124459132843) < 1e-12);
}

TEST_CASE("jsd properties against the KL-form oracle") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 9);
        const auto p = random_distribution(rng, n);
        const auto q = random_distribution(rng, n);
        const double v = jsd(p, q);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(std::abs(v - jsd(q, p)) < 1e-12);
        CHECK(std::abs(v - oracle::jsd(p, q)) < 1e-12);

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> pp(n), qp(n);
        for (std::size_t i = 0; i < n; ++i) {
            pp[i] = p[perm[i]];
            qp[i] = q[perm[i]];
        }
        CHECK(std::abs(jsd(pp, qp) - v) < 1e-12);
        if (p != q) CHECK(v > 0.0);
    }
}

TEST_CASE("jsd validation") {
    CHECK_THROWS_AS(jsd(std::vector<double>{0.5, 0.6}, std::vector<double>{0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(jsd(std::vector<double>{1.5, -0.5}, std::vector<double>{0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(jsd(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), ValidationError);
}

TEST_CASE("generalized jsd") {
    const std::vector<double> p{0.1, 0.6, 0.3};
    CHECK(jsd_multi({p, p, p, p}) == Approx(0.0));
    const std::vector<double> q{0.5, 0.0, 0.5};
    CHECK(jsd_multi({p, q}) == jsd(p, q));
    CHECK(std::abs(jsd_multi({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}) - std::log2(3.0)) < 1e-12);
    CHECK_THROWS_AS(jsd_multi({p}), ValidationError);
}

TEST_CASE("change score") {
    SUBCASE("identical usage") {
        const std::vector<int> labels{0, 1, 0, 1};
        const std::vector<std::uint16_t> slices{0, 0, 1, 1};
        CHECK(change_score(usage_distribution(labels, slices, 2)) == Approx(0.0));
    }
    SUBCASE("novel cluster only in the last slice") {
        const std::vector<int> labels{0, 0, 1, 1};
        const std::vector<std::uint16_t> slices{0, 0, 1, 1};
        CHECK(change_score(usage_distribution(labels, slices, 2)) == Approx(1.0));
    }
    SUBCASE("half of the usage replaced") {
        const std::vector<int> labels{0, 0, 0, 0, 0, 0, 1, 1};
        const std::vector<std::uint16_t> slices{0, 0, 0, 0, 1, 1, 1, 1};
        CHECK(std::abs(change_score(usage_distribution(labels, slices, 2)) - 0.311278124459132843) < 1e-12);
    }
    SUBCASE("relabeling clusters does not change the score") {
        std::mt19937_64 rng(6);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<int> labels;
            std::vector<std::uint16_t> slices;
            for (int i = 0; i < 100; ++i) {
                labels.push_back(static_cast<int>(rng() % 5));
                slices.push_back(static_cast<std::uint16_t>(rng() % 3));
            }
            std::vector<int> rename{3, 0, 4, 1, 2};
            std::vector<int> relabeled;
            for (int l : labels) relabeled.push_back(rename[static_cast<std::size_t>(l)]);
            for (auto mode : {ScoringMode::FirstLast, ScoringMode::AllSlices}) {
                CHECK(std::abs(change_score(usage_distribution(labels, slices, 5), mode) -
                               change_score(usage_distribution(relabeled, slices, 5), mode)) < 1e-12);
            }
        }
    }
    SUBCASE("all slices uses every present slice") {
        const std::vector<int> labels{0, 1, 2};
        const std::vector<std::uint16_t> slices{0, 1, 2};
        CHECK(change_score(usage_distribution(labels, slices, 3), ScoringMode::AllSlices) ==
              Approx(std::log2(3.0)));
    }
    SUBCASE("missing slices") {
        const std::vector<int> labels{0, 0};
        const std::vector<std::uint16_t> slices{0, 1};
        const auto d = usage_distribution(labels, slices, 1, 3);
        CHECK_THROWS_AS(change_score(d, ScoringMode::FirstLast), InsufficientDataError);
        CHECK(change_score(d, ScoringMode::AllSlices) == Approx(0.0));
        const std::vector<std::uint16_t> one{0, 0};
        CHECK_THROWS_AS(change_score(usage_distribution(labels, one, 1, 1), ScoringMode::AllSlices),
                        InsufficientDataError);
    }
}

TEST_CASE("rank words") {
    auto ranked = rank_words({{"c", "m", 0.5}, {"a", "m", 0.5}, {"b", "m", 0.5}});
    CHECK(ranked[0].word == "a");
    CHECK(ranked[2].word == "c");
    ranked = rank_words({{"x", "m", 0.9}, {"y", "m", 0.1}, {"z", "m", 0.5}});
    CHECK(ranked[0].word == "x");
    CHECK(ranked[1].word == "z");
    CHECK(ranked[2].word == "y");
}
