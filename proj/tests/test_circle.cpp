#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dvcover/circle.hpp"
#include "dvcover/rng.hpp"

using namespace dvcover;

namespace {

ArcConfiguration random_config(Xoshiro256& g, int n)
{
    std::vector<double> lens;
    for (int k = 0; k < n; ++k) lens.push_back(std::min(0.5, 0.5 * uniform01(g) + 1e-3));
    std::sort(lens.rbegin(), lens.rend());
    ArcConfiguration cfg;
    for (double l : lens) cfg.emplace_back(uniform01(g), l);
    return cfg;
}

// Union measure by unrolling each arc onto [0, 2) and merging intervals.
double union_measure(const ArcConfiguration& cfg)
{
    std::vector<std::pair<double, double>> iv;
    for (const auto& a : cfg) {
        const double s = a.start().pos();
        if (s + a.length <= 1.0) {
            iv.emplace_back(s, s + a.length);
        } else {
            iv.emplace_back(s, 1.0);
            iv.emplace_back(0.0, s + a.length - 1.0);
        }
    }
    std::sort(iv.begin(), iv.end());
    double total = 0.0, cur_a = -1.0, cur_b = -1.0;
    for (const auto& [a, b] : iv) {
        if (a > cur_b) {
            total += cur_b - cur_a;
            cur_a = a;
            cur_b = b;
        } else {
            cur_b = std::max(cur_b, b);
        }
    }
    total += cur_b - cur_a;
    return total;
}

} // namespace

TEST(CircDist, Examples)
{
    EXPECT_DOUBLE_EQ(circ_dist(CirclePoint(0.0), CirclePoint(0.0)), 0.0);
    EXPECT_NEAR(circ_dist(CirclePoint(0.1), CirclePoint(0.9)), 0.2, 1e-15);
    EXPECT_DOUBLE_EQ(circ_dist(CirclePoint(0.25), CirclePoint(0.75)), 0.5);
}

TEST(CircDist, SymmetricAndTriangle)
{
    auto g = make_stream(11, 0, 0);
    for (int i = 0; i < 10000; ++i) {
        CirclePoint p(uniform01(g)), q(uniform01(g)), r(uniform01(g));
        const double pq = circ_dist(p, q);
        EXPECT_EQ(pq, circ_dist(q, p));
        EXPECT_LE(pq, 0.5);
        EXPECT_LE(pq, circ_dist(p, r) + circ_dist(r, q) + 1e-15);
    }
}

TEST(CirclePoint, StaysInUnitInterval)
{
    EXPECT_DOUBLE_EQ(CirclePoint(1.25).pos(), 0.25);
    EXPECT_DOUBLE_EQ(CirclePoint(-0.25).pos(), 0.75);
    const double p = CirclePoint(-1e-18).pos();
    EXPECT_GE(p, 0.0);
    EXPECT_LT(p, 1.0);
    EXPECT_LT((CirclePoint(0.9) + 0.3).pos(), 1.0);
}

TEST(Arc, RejectsBadLength)
{
    EXPECT_THROW(Arc(0.0, 0.6), std::invalid_argument);
    EXPECT_THROW(Arc(0.0, 0.0), std::invalid_argument);
}

TEST(ArcContains, Examples)
{
    EXPECT_TRUE(arc_contains(Arc(0.0, 0.5), CirclePoint(0.24)));
    EXPECT_FALSE(arc_contains(Arc(0.0, 0.5), CirclePoint(0.25)));
    EXPECT_TRUE(arc_contains(Arc(0.9, 0.3), CirclePoint(0.02)));
}

TEST(CoverCount, Examples)
{
    ArcConfiguration one{Arc(0.0, 0.5)};
    EXPECT_EQ(cover_count(one, CirclePoint(0.0)), 1u);
    EXPECT_EQ(cover_count(one, CirclePoint(0.5)), 0u);
    ArcConfiguration two{Arc(0.0, 0.5), Arc(0.1, 0.4)};
    EXPECT_EQ(cover_count(two, CirclePoint(0.05)), 2u);
}

TEST(UncoveredGaps, SingleArc)
{
    const auto g = uncovered_gaps(ArcConfiguration{Arc(0.0, 0.5)});
    ASSERT_EQ(g.gaps.size(), 1u);
    EXPECT_DOUBLE_EQ(g.gaps[0].start.pos(), 0.25);
    EXPECT_DOUBLE_EQ(g.gaps[0].length, 0.5);
    EXPECT_DOUBLE_EQ(g.total_length, 0.5);
}

TEST(UncoveredGaps, FullCoverAndZeroLengthGaps)
{
    // Arcs longer than 1/2 are outside the Arc invariant; two half-circle
    // arcs give the same full cover up to two boundary points.
    const auto g = uncovered_gaps(ArcConfiguration{Arc(0.0, 0.5), Arc(0.5, 0.5)});
    EXPECT_EQ(g.total_length, 0.0);
    ASSERT_EQ(g.gaps.size(), 2u);
    for (const auto& gap : g.gaps) EXPECT_EQ(gap.length, 0.0);
    EXPECT_TRUE(g.contains(CirclePoint(0.25)));
    EXPECT_TRUE(g.contains(CirclePoint(0.75)));

    const auto full = uncovered_gaps(ArcConfiguration{Arc(0.0, 0.5), Arc(0.5, 0.5), Arc(0.25, 0.1), Arc(0.75, 0.1)});
    EXPECT_TRUE(full.fully_covered());
    EXPECT_EQ(full.total_length, 0.0);
}

TEST(UncoveredGaps, ThreeArcsAgainstGridOracle)
{
    ArcConfiguration cfg{Arc(0.1, 0.3), Arc(0.5, 0.2), Arc(0.8, 0.25)};
    const auto g = uncovered_gaps(cfg);
    ASSERT_EQ(g.gaps.size(), 3u);
    const double expect[3][2] = {{0.25, 0.4}, {0.6, 0.675}, {0.925, 0.95}};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(g.gaps[i].start.pos(), expect[i][0], 1e-15);
        EXPECT_NEAR(g.gaps[i].start.pos() + g.gaps[i].length, expect[i][1], 1e-15);
    }
    EXPECT_NEAR(g.total_length, 0.25, 1e-15);
    const int grid = 1000000;
    int mismatches = 0;
    for (int i = 0; i < grid; ++i) {
        const CirclePoint p((i + 0.5) / grid);
        if (g.contains(p) != (cover_count(cfg, p) == 0)) ++mismatches;
    }
    EXPECT_EQ(mismatches, 0);
}

TEST(UncoveredGaps, RandomCrossCheckWithArcContains)
{
    auto g = make_stream(21, 0, 0);
    int mismatches = 0;
    for (int c = 0; c < 200; ++c) {
        const auto cfg = random_config(g, 1 + static_cast<int>(uniform01(g) * 50));
        const auto gaps = uncovered_gaps(cfg);
        for (int i = 0; i < 1000; ++i) {
            const CirclePoint p(uniform01(g));
            if (gaps.contains(p) != (cover_count(cfg, p) == 0)) ++mismatches;
        }
    }
    EXPECT_EQ(mismatches, 0);
}

TEST(UncoveredGaps, MeasureComplementsUnion)
{
    auto g = make_stream(22, 0, 0);
    for (int c = 0; c < 500; ++c) {
        const auto cfg = random_config(g, 1 + static_cast<int>(uniform01(g) * 50));
        const auto gaps = uncovered_gaps(cfg);
        EXPECT_NEAR(gaps.total_length + union_measure(cfg), 1.0, 1e-12);
        double sum = 0.0;
        for (std::size_t i = 0; i < gaps.gaps.size(); ++i) {
            sum += gaps.gaps[i].length;
            if (i > 0) { EXPECT_LT(gaps.gaps[i - 1].start.pos(), gaps.gaps[i].start.pos()); }
        }
        EXPECT_NEAR(sum, gaps.total_length, 1e-12);
        EXPECT_EQ(gaps.gaps.empty(), gaps.total_length == 0.0 && gaps.gaps.empty());
    }
}

TEST(UncoveredGaps, RotationEquivariant)
{
    auto g = make_stream(23, 0, 0);
    for (int c = 0; c < 200; ++c) {
        const auto cfg = random_config(g, 10);
        const double shift = uniform01(g);
        ArcConfiguration rotated;
        for (const auto& a : cfg) rotated.emplace_back(a.center + shift, a.length);
        const auto g0 = uncovered_gaps(cfg), g1 = uncovered_gaps(rotated);
        ASSERT_EQ(g0.gaps.size(), g1.gaps.size());
        EXPECT_NEAR(g0.total_length, g1.total_length, 1e-12);
        for (const auto& gap : g0.gaps) {
            const CirclePoint mid = gap.start + 0.5 * gap.length;
            EXPECT_TRUE(g1.contains(mid + shift));
        }
    }
}

TEST(SortedArcs, IncrementalMatchesFull)
{
    auto g = make_stream(24, 0, 0);
    auto cfg = random_config(g, 40);
    SortedArcs s(cfg);
    GapSet inc;
    for (int step = 0; step < 2000; ++step) {
        const auto id = static_cast<std::size_t>(uniform01(g) * cfg.size());
        cfg[id].center = CirclePoint(uniform01(g));
        s.move(static_cast<std::uint32_t>(id), cfg[id].start().pos());
        s.gaps(inc);
        const auto full = uncovered_gaps(cfg);
        ASSERT_EQ(inc.gaps.size(), full.gaps.size());
        for (std::size_t i = 0; i < full.gaps.size(); ++i) {
            EXPECT_EQ(inc.gaps[i].start.pos(), full.gaps[i].start.pos());
            EXPECT_EQ(inc.gaps[i].length, full.gaps[i].length);
        }
    }
}
