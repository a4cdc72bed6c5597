#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dvcover/brownian_sim.hpp"
#include "dvcover/conditions.hpp"
#include "dvcover/moments.hpp"
#include "dvcover/numerics.hpp"
#include "dvcover/poisson_sim.hpp"

using namespace dvcover;

namespace {

// Unbiased estimate of E[X_n^2] for the Brownian model: X_n^2 is the measure of
// pairs of uncovered (time, place) points, so sample two uniform points and
// draw each arc's centers exactly at both times.
MeanSe brownian_pair_moment(std::int64_t n, const LengthSequence& seq, bool circle, std::int64_t reps,
                            std::uint64_t seed)
{
    const auto lens = lengths(seq, n);
    double s = 0.0;
    for (std::int64_t r = 0; r < reps; ++r) {
        auto g = make_stream(seed, static_cast<std::uint64_t>(r), 0);
        const double t1 = uniform01(g), t2 = uniform01(g);
        const CirclePoint x1(circle ? uniform01(g) : 0.0), x2(circle ? uniform01(g) : 0.0);
        const double dt = std::abs(t1 - t2);
        bool both = true;
        for (double l : lens) {
            const CirclePoint a(uniform01(g));
            const CirclePoint b = dt > 0.0 ? a + sample_increment(dt, g).pos() : a;
            if (circ_dist(a, x1) < 0.5 * l || circ_dist(b, x2) < 0.5 * l) {
                both = false;
                break;
            }
        }
        s += both;
    }
    return mean_se_from_sums(s, s, static_cast<double>(reps));
}

} // namespace

TEST(SecondMoment, EmptyConfiguration)
{
    for (auto m : {ModelSpec::poisson(1.0), ModelSpec::brownian()})
        for (auto q : {MomentQuestion::point, MomentQuestion::circle}) {
            const auto r = second_moment(m, q, 0, LengthSequence::c_over_n(1.0));
            EXPECT_EQ(r.EX, 1.0);
            EXPECT_EQ(r.EX2, 1.0);
            EXPECT_EQ(r.lower_bound, 1.0);
        }
    EXPECT_THROW(second_moment_point(ModelSpec::static_model(), 5, LengthSequence::c_over_n(1.0)), ValidationError);
    EXPECT_THROW(second_moment_point(ModelSpec::brownian(), -1, LengthSequence::c_over_n(1.0)), ValidationError);
}

TEST(SecondMoment, SingleArcClosedForm)
{
    // 2 int_0^1 (1 - t)(1/4 + e^{-2t}/4) dt
    const double closed = 0.25 + 0.5 * (0.5 - 0.25 * (1.0 - std::exp(-2.0)));
    const auto r = second_moment_point(ModelSpec::poisson(1.0), 1, LengthSequence::explicit_list({0.5}));
    EXPECT_NEAR(r.EX2, 0.391917, 1e-6);
    EXPECT_NEAR(r.EX2, closed, 1e-12);
    EXPECT_NEAR(r.lower_bound, 0.6379, 1e-4);
    EXPECT_NEAR(r.EX, 0.5, 1e-15);
    EXPECT_TRUE(r.converged);
}

TEST(SecondMoment, StationaryReductionIdentity)
{
    // int int g(|t - s|) ds dt = 2 int (1 - t) g(t) dt
    auto g = [](double u) { return std::exp(-3.0 * u) + std::cos(5.0 * u); };
    const double lhs = adaptive_simpson(
        [&](double t) { return adaptive_simpson([&](double s) { return g(std::abs(t - s)); }, 0.0, t, 1e-13) +
                               adaptive_simpson([&](double s) { return g(std::abs(t - s)); }, t, 1.0, 1e-13); },
        0.0, 1.0, 1e-12);
    const double rhs = adaptive_simpson([&](double t) { return 2.0 * (1.0 - t) * g(t); }, 0.0, 1.0, 1e-14);
    EXPECT_NEAR(lhs, rhs, 1e-9);
}

TEST(SecondMoment, PoissonPointLowerBoundStable)
{
    const auto seq = LengthSequence::c_over_n(1.0);
    std::vector<double> lb;
    for (std::int64_t n : {100, 1000, 10000}) {
        const auto r = second_moment_point(ModelSpec::poisson(2.0), n, seq);
        EXPECT_TRUE(r.converged);
        EXPECT_GT(r.lower_bound, 0.1);
        lb.push_back(r.lower_bound);
    }
    EXPECT_LT(std::abs(lb[2] / lb[1] - 1.0), 0.10);
}

TEST(SecondMoment, PoissonCircleLowerBoundStable)
{
    const auto seq = LengthSequence::c_over_n(1.5);
    const auto a = second_moment_circle(ModelSpec::poisson(1.0), 100, seq);
    const auto b = second_moment_circle(ModelSpec::poisson(1.0), 1000, seq);
    EXPECT_TRUE(a.converged);
    EXPECT_TRUE(b.converged);
    EXPECT_LT(std::abs(b.lower_bound / a.lower_bound - 1.0), 0.15);
}

TEST(SecondMoment, CircleSingleArcAgainstMonteCarlo)
{
    const auto seq = LengthSequence::explicit_list({0.5});
    const auto r = second_moment_circle(ModelSpec::poisson(1.0), 1, seq);
    McParams p;
    p.n = 1;
    p.alpha = 1.0;
    p.seq = seq;
    p.reps = 100000;
    p.master_seed = 11;
    const auto mc = mc_circle(p);
    EXPECT_NEAR(r.EX2, mc.second_moment, 4 * mc.second_moment_se + 1e-12);
}

TEST(SecondMoment, PoissonAgainstMonteCarlo)
{
    std::uint64_t seed = 20;
    for (std::int64_t n : {2, 5, 10})
        for (double alpha : {0.5, 1.0, 2.0}) {
            const auto seq = LengthSequence::c_over_n(1.0);
            McParams p;
            p.n = n;
            p.alpha = alpha;
            p.seq = seq;
            p.reps = 1000000;
            p.master_seed = seed++;
            const auto mc = mc_point(p);
            const auto r = second_moment_point(ModelSpec::poisson(alpha), n, seq);
            EXPECT_NEAR(r.EX2, mc.second_moment, 4 * mc.second_moment_se) << n << ' ' << alpha;
        }
    for (std::int64_t n : {2, 5}) {
        const auto seq = LengthSequence::c_over_n(2.0);
        McParams p;
        p.n = n;
        p.alpha = 1.0;
        p.seq = seq;
        p.reps = 100000;
        p.master_seed = seed++;
        const auto mc = mc_circle(p);
        const auto r = second_moment_circle(ModelSpec::poisson(1.0), n, seq);
        EXPECT_NEAR(r.EX2, mc.second_moment, 4 * mc.second_moment_se) << n;
    }
}

TEST(SecondMoment, BrownianAgainstMonteCarlo)
{
    std::uint64_t seed = 40;
    for (std::int64_t n : {1, 5, 10}) {
        const auto seq = LengthSequence::c_over_n(1.0);
        const auto mc = brownian_pair_moment(n, seq, false, 1000000, seed++);
        const auto r = second_moment_point(ModelSpec::brownian(), n, seq);
        EXPECT_NEAR(r.EX2, mc.mean, 4 * mc.se) << n;
    }
    for (std::int64_t n : {2, 5}) {
        const auto seq = LengthSequence::c_over_n(2.0);
        const auto mc = brownian_pair_moment(n, seq, true, 1000000, seed++);
        const auto r = second_moment_circle(ModelSpec::brownian(), n, seq);
        EXPECT_NEAR(r.EX2, mc.mean, 4 * mc.se) << n;
    }
}

TEST(SecondMoment, CauchySchwarzMatrix)
{
    std::vector<ModelSpec> models{ModelSpec::poisson(0.5), ModelSpec::poisson(1.0), ModelSpec::poisson(2.0),
                                  ModelSpec::brownian()};
    for (const auto& m : models)
        for (double c : {0.5, 1.0, 2.0})
            for (std::int64_t n : {1, 5, 20, 100}) {
                const auto seq = LengthSequence::c_over_n(c);
                const auto r = second_moment_point(m, n, seq);
                EXPECT_GE(r.EX2, r.EX * r.EX * (1 - 1e-12));
                EXPECT_LE(r.EX2, r.EX * (1 + 1e-12));
                EXPECT_GT(r.lower_bound, 0.0);
                EXPECT_LE(r.lower_bound, 1.0 + 1e-12);
                EXPECT_NEAR(r.EX, seq_stats(seq, n).u_n, 1e-14 * r.EX);
                if (m.kind == ModelKind::brownian && n > 20) continue;
                const auto rc = second_moment_circle(m, n, seq);
                EXPECT_GE(rc.EX2, rc.EX * rc.EX * (1 - 1e-12)) << c << ' ' << n;
                EXPECT_LE(rc.lower_bound, 1.0 + 1e-12);
                EXPECT_GT(rc.lower_bound, 0.0);
            }
}

TEST(SecondMoment, KernelNonincreasingInTime)
{
    const auto lens = lengths(LengthSequence::c_over_n(1.0), 50);
    for (const auto& m : {ModelSpec::poisson(1.0), ModelSpec::brownian()}) {
        double prev = point_kernel(m, lens, 0.0);
        for (int j = 1; j <= 2000; ++j) {
            const double t = std::pow(10.0, -6.0 + 6.0 * j / 2000.0);
            const double k = point_kernel(m, lens, t);
            EXPECT_LE(k, prev * (1 + 1e-12)) << t;
            prev = k;
        }
    }
}

TEST(DivergenceProfile, Examples)
{
    const std::vector<std::int64_t> ns{100, 1000, 10000};
    const auto bounded = divergence_profile(ModelSpec::poisson(2.0), MomentQuestion::point, LengthSequence::c_over_n(1.0), ns);
    EXPECT_NEAR(bounded.slope, 0.0, 0.1);
    EXPECT_EQ(bounded.verdict, ProfileVerdict::bounded);

    const auto diverging =
        divergence_profile(ModelSpec::poisson(2.0), MomentQuestion::point, LengthSequence::c_over_n(2.5), ns);
    EXPECT_GE(diverging.slope, 0.3);
    EXPECT_EQ(diverging.verdict, ProfileVerdict::diverging);

    const auto brown = divergence_profile(ModelSpec::brownian(), MomentQuestion::point, LengthSequence::c_over_n(1.0), ns);
    EXPECT_NEAR(brown.slope, 0.0, 0.1);
    EXPECT_EQ(brown.verdict, ProfileVerdict::bounded);

    std::ostringstream os;
    write_profile_csv(os, bounded);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "n,EX,EX2,lower_bound,slope_fit");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 3);

    const std::vector<std::int64_t> bad{100, 100};
    EXPECT_THROW(divergence_profile(ModelSpec::brownian(), MomentQuestion::point, LengthSequence::c_over_n(1.0), bad),
                 ValidationError);
}

TEST(DivergenceProfile, AgreesWithSeriesCriterion)
{
    struct Case
    {
        ModelSpec model;
        MomentQuestion q;
        double c;
        double beta;
        std::vector<std::int64_t> ns;
    };
    const std::vector<std::int64_t> pt{100, 1000, 10000};
    const std::vector<std::int64_t> circ{100, 300, 1000};
    const std::vector<Case> cases{
        {ModelSpec::poisson(2.0), MomentQuestion::point, 1.0, 2.0, pt},
        {ModelSpec::poisson(2.0), MomentQuestion::point, 2.5, 2.0, pt},
        {ModelSpec::brownian(), MomentQuestion::point, 1.0, 2.0, pt},
        {ModelSpec::brownian(), MomentQuestion::point, 2.5, 2.0, pt},
        {ModelSpec::poisson(1.0), MomentQuestion::circle, 1.5, 2.0, circ},
    };
    for (const auto& cs : cases) {
        const auto seq = LengthSequence::c_over_n(cs.c);
        const auto prof = divergence_profile(cs.model, cs.q, seq, cs.ns);
        const auto series = series_beta(seq, cs.beta, 1000000);
        const auto expected = series.verdict == SeriesVerdict::converges ? ProfileVerdict::bounded
                              : series.verdict == SeriesVerdict::diverges ? ProfileVerdict::diverging
                                                                           : ProfileVerdict::inconclusive;
        EXPECT_NE(series.verdict, SeriesVerdict::inconclusive) << cs.c;
        EXPECT_EQ(prof.verdict, expected) << to_string(cs.model.kind) << " c=" << cs.c << " slope=" << prof.slope;
    }
}
