#include "helpers.hpp"

#include "infantprints/minmap.hpp"

#include <doctest.h>

#include <fstream>
#include <random>

using namespace infantprints;
using namespace infantprints::minmap;

namespace {

// Straight transcription of the map definition, no truncation or reuse.
double oracle_cell(const MinutiaeSet& set, int i, int j, int k, double sigma)
{
    double h = 0.0;
    for (const auto& m : set.minutiae) {
        const double d2 = (m.x - j) * (m.x - j) + (m.y - i) * (m.y - i);
        const double cs = std::exp(-d2 / (2 * sigma * sigma));
        double d = std::abs(std::fmod(m.theta, kTwoPi) - kTwoPi * k / 12.0);
        if (d > kPi)
            d = kTwoPi - d;
        h += cs * std::exp(-d / (2 * sigma * sigma));
    }
    return h;
}

}  // namespace

TEST_SUITE("minmap")
{
    TEST_CASE("orientation difference")
    {
        CHECK(angle_difference(0.0, kPi / 2) == doctest::Approx(kPi / 2).epsilon(1e-12));
        CHECK(std::abs(angle_difference(0.1, 6.1) - (kTwoPi - 6.0)) < 1e-9);
        CHECK(std::abs(angle_difference(6.1, 0.1) - (kTwoPi - 6.0)) < 1e-9);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-20.0, 20.0);
        for (int n = 0; n < 2000; ++n) {
            const double a = u(rng), b = u(rng);
            const double d = angle_difference(a, b);
            CHECK(d >= 0.0);
            CHECK(d <= kPi + 1e-12);
            CHECK(std::abs(d - angle_difference(b, a)) < 1e-12);
            CHECK(angle_difference(a, a) == 0.0);
            CHECK(angle_difference(a, a + kTwoPi) < 1e-9);
        }
        CHECK_THROWS_AS(angle_difference(std::nan(""), 0.0), ValidationError);
    }

    TEST_CASE("spatial contribution")
    {
        const double s = 6.0;
        CHECK(std::abs(spatial_contribution(10.0, 20.0, 20, 10, s) - 1.0) < 1e-9);
        CHECK(std::abs(spatial_contribution(16.0, 20.0, 20, 10, s) - std::exp(-0.5)) < 1e-9);
        CHECK(std::abs(spatial_contribution(10.0, 20.0 + 6.0, 20, 10, s) - 0.60653065971263342) < 1e-9);
        double prev = 2.0;
        for (double d = 0.0; d < 100.0; d += 0.5) {
            const double v = spatial_contribution(10.0 + d, 20.0, 20, 10, s);
            CHECK(v <= prev);
            prev = v;
        }
        CHECK(prev < 1e-30);
        CHECK_THROWS_AS(spatial_contribution(0, 0, 0, 0, 0.0), ValidationError);
    }

    TEST_CASE("orientation contribution")
    {
        const double s = 6.0;
        CHECK(std::abs(orientation_contribution(0.0, 0, s) - 1.0) < 1e-9);
        CHECK(std::abs(orientation_contribution(kPi / 6, 1, s) - 1.0) < 1e-9);
        CHECK(std::abs(orientation_contribution(0.0, 6, s) - std::exp(-kPi / (2 * s * s))) < 1e-9);
        CHECK_THROWS_AS(orientation_contribution(0.0, 12, s), ValidationError);
        CHECK_THROWS_AS(orientation_contribution(0.0, -1, s), ValidationError);
    }

    TEST_CASE("encoding matches the definition cell by cell")
    {
        MinmapParams p;
        std::mt19937_64 rng(17);
        const auto set = testing_support::separated_set(rng, 12, 64, 48, 0.0, 3.0);
        const auto map = encode_minutiae_map(set, 48, 64, p);
        double worst = 0.0;
        for (int i = 0; i < 48; ++i)
            for (int j = 0; j < 64; ++j)
                for (int k = 0; k < 12; ++k)
                    worst = std::max(worst, std::abs(map.at(i, j, k) - oracle_cell(set, i, j, k, p.sigma_s)));
        CHECK(worst < 1e-9);
    }

    TEST_CASE("encoding basics")
    {
        MinmapParams p;
        const auto empty = encode_minutiae_map({}, 30, 40, p);
        for (double v : empty.values())
            CHECK(v == 0.0);

        MinutiaeSet one;
        one.minutiae.push_back({10.0, 20.0, 0.0});
        const auto map = encode_minutiae_map(one, 40, 30, p);
        CHECK(std::abs(map.at(20, 10, 0) - 1.0) < 1e-9);
        for (int i = 0; i < 40; ++i)
            for (int j = 0; j < 30; ++j)
                CHECK(map.at(i, j, 0) <= map.at(20, 10, 0));

        MinutiaeSet outside;
        outside.minutiae.push_back({30.0, 5.0, 0.0});
        CHECK_THROWS_AS(encode_minutiae_map(outside, 40, 30, p), ValidationError);
    }

    TEST_CASE("encoding is linear, bounded and equivariant")
    {
        MinmapParams p;
        std::mt19937_64 rng(23);
        for (int trial = 0; trial < 10; ++trial) {
            const auto set = testing_support::separated_set(rng, 8, 80, 80, 20.0, 4.0);
            MinutiaeSet a, b;
            for (std::size_t i = 0; i < set.size(); ++i)
                (i % 2 ? a : b).minutiae.push_back(set.minutiae[i]);
            const auto h = encode_minutiae_map(set, 80, 80, p);
            const auto ha = encode_minutiae_map(a, 80, 80, p);
            const auto hb = encode_minutiae_map(b, 80, 80, p);
            for (std::size_t i = 0; i < h.values().size(); ++i) {
                CHECK(std::abs(h.values()[i] - ha.values()[i] - hb.values()[i]) < 1e-9);
                CHECK(h.values()[i] >= 0.0);
                CHECK(h.values()[i] <= static_cast<double>(set.size()) + 1e-12);
            }

            // Integer translation shifts the map.
            const int dx = 7, dy = -5;
            MinutiaeSet moved = set;
            for (auto& m : moved.minutiae) {
                m.x += dx;
                m.y += dy;
            }
            const auto hm = encode_minutiae_map(moved, 80, 80, p);
            double worst = 0.0;
            for (int i = 10; i < 70; ++i)
                for (int j = 10; j < 70; ++j)
                    for (int k = 0; k < 12; ++k)
                        worst = std::max(worst, std::abs(hm.at(i + dy, j + dx, k) - h.at(i, j, k)));
            CHECK(worst < 1e-9);

            // One channel step in theta permutes channels k -> k + 1.
            MinutiaeSet turned = set;
            for (auto& m : turned.minutiae)
                m.theta = wrap_two_pi(m.theta + kTwoPi / 12);
            const auto ht = encode_minutiae_map(turned, 80, 80, p);
            worst = 0.0;
            for (int i = 0; i < 80; ++i)
                for (int j = 0; j < 80; ++j)
                    for (int k = 0; k < 12; ++k)
                        worst = std::max(worst, std::abs(ht.at(i, j, (k + 1) % 12) - h.at(i, j, k)));
            CHECK(worst < 1e-9);
        }
    }

    TEST_CASE("decoding")
    {
        MinmapParams p;
        CHECK(decode_minutiae_map(MinutiaeMap(30, 30), p).empty());

        MinutiaeSet one;
        one.minutiae.push_back({10.0, 20.0, 0.0});
        const auto map = encode_minutiae_map(one, 50, 40, p);
        // Oracle: exhaustive scan for the largest channel-summed cell.
        int br = 0, bc = 0;
        for (int i = 0; i < 50; ++i)
            for (int j = 0; j < 40; ++j)
                if (map.cell_sum(i, j) > map.cell_sum(br, bc)) {
                    br = i;
                    bc = j;
                }
        const auto dec = decode_minutiae_map(map, p, 1900);
        REQUIRE(dec.size() == 1);
        CHECK(dec.source_ppi == 1900);
        CHECK(std::hypot(dec.minutiae[0].x - bc, dec.minutiae[0].y - br) <= 1.0);
        CHECK(std::hypot(dec.minutiae[0].x - 10.0, dec.minutiae[0].y - 20.0) <= 1.0);
        CHECK(angle_difference(dec.minutiae[0].theta, 0.0) <= kTwoPi / 24);
    }

    TEST_CASE("decoding recovers well separated sets")
    {
        MinmapParams p;
        std::mt19937_64 rng(99);
        std::uniform_int_distribution<int> count(1, 40);
        for (int trial = 0; trial < 25; ++trial) {
            const auto truth = testing_support::separated_set(rng, count(rng), 256, 256, 3 * p.sigma_s,
                                                              2 * p.nms_radius);
            const auto dec = decode_minutiae_map(encode_minutiae_map(truth, 256, 256, p), p);
            REQUIRE(dec.size() == truth.size());
            // Greedy bipartite pairing by distance.
            std::vector<bool> used(truth.size(), false);
            for (const auto& d : dec.minutiae) {
                int best = -1;
                double bd = 1e9;
                for (std::size_t t = 0; t < truth.size(); ++t) {
                    const double dist = std::hypot(d.x - truth.minutiae[t].x, d.y - truth.minutiae[t].y);
                    if (!used[t] && dist < bd) {
                        bd = dist;
                        best = static_cast<int>(t);
                    }
                }
                REQUIRE(best >= 0);
                used[static_cast<std::size_t>(best)] = true;
                CHECK(bd <= 2.0);
                CHECK(angle_difference(d.theta, truth.minutiae[static_cast<std::size_t>(best)].theta) <= kTwoPi / 12);
            }
        }
    }

    TEST_CASE("suppression keeps the stronger peak, then the smaller row/col")
    {
        MinmapParams p;
        MinutiaeMap m(40, 40);
        // Two isolated single-cell peaks 5 px apart in channel 0.
        m.at(10, 10, 0) = 0.8;
        m.at(10, 15, 0) = 0.9;
        auto dec = decode_minutiae_map(m, p);
        REQUIRE(dec.size() == 1);
        CHECK(std::abs(dec.minutiae[0].x - 15.0) < 0.51);

        m.at(10, 15, 0) = 0.8;
        dec = decode_minutiae_map(m, p);
        REQUIRE(dec.size() == 1);
        CHECK(std::abs(dec.minutiae[0].x - 10.0) < 0.51);

        // Below threshold: nothing.
        MinutiaeMap weak(20, 20);
        weak.at(5, 5, 3) = 0.29;
        CHECK(decode_minutiae_map(weak, p).empty());
    }

    TEST_CASE("channel dump format")
    {
        testing_support::TempDir dir("minmap");
        MinutiaeSet one;
        one.minutiae.push_back({2.0, 1.0, 0.0});
        const auto map = encode_minutiae_map(one, 3, 4, MinmapParams{});
        dump_channels(map, dir.path() / "m");
        std::ifstream in(dir.path() / "m_ch00.txt");
        REQUIRE(in.good());
        int w = 0, h = 0, k = -1;
        in >> w >> h >> k;
        CHECK(w == 4);
        CHECK(h == 3);
        CHECK(k == 0);
        double v = 0.0;
        for (int i = 0; i < 1 * 4 + 2 + 1; ++i)
            in >> v;
        CHECK(std::abs(v - 1.0) < 1e-9);
        CHECK(std::filesystem::exists(dir.path() / "m_ch11.txt"));
    }

    TEST_CASE("parameter validation")
    {
        MinmapParams p;
        p.sigma_s = 0.0;
        CHECK_THROWS_AS(p.validate(), ValidationError);
        p = {};
        p.nms_radius = 0.5;
        CHECK_THROWS_AS(p.validate(), ValidationError);
        p = {};
        p.peak_threshold = 1.5;
        CHECK_THROWS_AS(p.validate(), ValidationError);
    }
}
