#include <cmath>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "dvcover/length_seq.hpp"

using namespace dvcover;
using quad = boost::multiprecision::cpp_bin_float_quad;

TEST(Lengths, CapThenCOverN)
{
    const auto v = lengths(LengthSequence::c_over_n(1.0), 4);
    ASSERT_EQ(v.size(), 4u);
    EXPECT_DOUBLE_EQ(v[0], 0.5);
    EXPECT_DOUBLE_EQ(v[1], 0.5);
    EXPECT_DOUBLE_EQ(v[2], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(v[3], 0.25);
}

TEST(Lengths, SmallC)
{
    const auto v = lengths(LengthSequence::c_over_n(0.4), 3);
    EXPECT_DOUBLE_EQ(v[0], 0.4);
    EXPECT_DOUBLE_EQ(v[1], 0.2);
    EXPECT_DOUBLE_EQ(v[2], 0.4 / 3.0);
}

TEST(Lengths, ExplicitIdentity)
{
    const auto v = lengths(LengthSequence::explicit_list({0.5, 0.25, 0.25}), 3);
    EXPECT_EQ(v, (std::vector<double>{0.5, 0.25, 0.25}));
    EXPECT_THROW(lengths(LengthSequence::explicit_list({0.5}), 2), ValidationError);
}

TEST(Lengths, RejectsBadParameters)
{
    EXPECT_THROW(LengthSequence::c_over_n(0.0), ValidationError);
    EXPECT_THROW(LengthSequence::c_over_n(-1.0), ValidationError);
    EXPECT_THROW(LengthSequence::power(1.0, 0.0), ValidationError);
    EXPECT_THROW(LengthSequence::explicit_list({0.25, 0.5}), ValidationError);
    EXPECT_THROW(lengths(LengthSequence::c_over_n(1.0), 0), ValidationError);
}

TEST(Lengths, LogKindsUseCapBeforeFormulaStart)
{
    const auto s = LengthSequence::c_over_n_minus_log(2.0);
    EXPECT_GE(s.formula_start(), 2);
    for (std::int64_t k = 1; k < s.formula_start(); ++k) EXPECT_DOUBLE_EQ(s.at(k), 0.5);
    const double x = 100.0;
    EXPECT_DOUBLE_EQ(s.at(100), 2.0 / x - 1.0 / (x * std::log(x)));
}

TEST(Lengths, NonincreasingAndPositiveForEveryKind)
{
    const std::vector<LengthSequence> seqs{
        LengthSequence::c_over_n(0.3),           LengthSequence::c_over_n(3.0),
        LengthSequence::c_over_n_minus_log(0.5), LengthSequence::c_over_n_minus_log(2.0),
        LengthSequence::c_over_n_minus_log(4.0), LengthSequence::c_over_n_minus_sqrtlog(0.5),
        LengthSequence::c_over_n_minus_sqrtlog(2.0), LengthSequence::power(1.0, 2.0),
        LengthSequence::power(3.0, 0.7)};
    for (const auto& s : seqs) {
        const auto v = lengths(s, 200000);
        EXPECT_LE(v[0], 0.5) << s.describe();
        for (std::size_t i = 0; i < v.size(); ++i) {
            ASSERT_GT(v[i], 0.0) << s.describe() << " at " << i + 1;
            if (i > 0) { ASSERT_LE(v[i], v[i - 1]) << s.describe() << " at " << i + 1; }
        }
    }
}

TEST(Descriptor, ParseDescribeRoundTrip)
{
    for (const char* text : {"c_over_n,c=1.5", "kind:c_over_n,c=1.5", "power,c=1,gamma=2", "c_over_n_minus_log,c=2",
                             "c_over_n_minus_sqrtlog,c=2,cap=0.25", "explicit,values=0.5:0.25:0.25"}) {
        const auto s = LengthSequence::parse(text);
        const auto t = LengthSequence::parse(s.describe());
        EXPECT_EQ(s.describe(), t.describe());
        for (std::int64_t k = 1; k <= 3; ++k) EXPECT_EQ(s.at(k), t.at(k));
    }
    EXPECT_DOUBLE_EQ(LengthSequence::parse("c_over_n,c=1,cap=0.25").at(1), 0.25);
}

TEST(Descriptor, MalformedRejected)
{
    for (const char* text : {"", "bogus,c=1", "c_over_n", "c_over_n,c=abc", "c_over_n,c=1,d=2", "c_over_n,c",
                             "power,c=1", "c_over_n,c=1,cap=0.75", "c_over_n,c=1,c=2", "explicit"}) {
        EXPECT_THROW(LengthSequence::parse(text), ValidationError) << text;
    }
}

TEST(SeqStats, DirectProduct)
{
    const auto s = seq_stats(LengthSequence::c_over_n(1.0), 4);
    EXPECT_NEAR(s.S_n, 0.5 + 0.5 + 1.0 / 3.0 + 0.25, 1e-15);
    EXPECT_NEAR(s.u_n, 0.125, 1e-15);
    const auto e = seq_stats(LengthSequence::explicit_list({0.5, 0.25}), 2);
    EXPECT_NEAR(e.u_n, 0.375, 1e-15);
    EXPECT_NEAR(e.S_n, 0.75, 1e-15);
}

TEST(SeqStats, HighPrecisionOracle)
{
    const auto seq = LengthSequence::c_over_n(0.8);
    const std::int64_t n = 1000000;
    // log u_n = -sum_k sum_j l_k^j / j, accumulated in 113-bit arithmetic.
    quad log_u = 0;
    for (std::int64_t k = 1; k <= n; ++k) {
        const quad l = k == 1 ? quad(0.5) : quad(0.8) / k;
        quad p = l;
        for (int j = 1; j <= 200; ++j) {
            const quad term = p / j;
            log_u -= term;
            if (term < quad(1e-40)) break;
            p *= l;
        }
    }
    const double ref = static_cast<double>(exp(log_u));
    const auto s = seq_stats(seq, n);
    EXPECT_NEAR(s.u_n / ref, 1.0, 1e-6);
    EXPECT_NEAR(s.u_n, std::exp(s.log_u_n), 1e-12 * s.u_n);
}

TEST(SeqStats, ExtendsConsistently)
{
    const auto seq = LengthSequence::c_over_n_minus_log(2.0);
    SeqAccumulator acc(seq);
    double prev_S = 0.0;
    for (std::int64_t k = 1; k <= 5000; ++k) {
        acc.step();
        const auto st = acc.stats();
        EXPECT_NEAR(st.S_n - prev_S, seq.at(k), 1e-12);
        EXPECT_GE(st.S_n, prev_S);
        EXPECT_GT(st.u_n, 0.0);
        EXPECT_LT(st.u_n, 1.0);
        prev_S = st.S_n;
    }
    const auto direct = seq_stats(seq, 5000);
    EXPECT_EQ(direct.S_n, acc.S());
}

TEST(SeqStats, CauchyConvergenceOfSMinusCLogN)
{
    const auto seq = LengthSequence::c_over_n(0.8);
    std::vector<double> d;
    for (std::int64_t n = 1 << 10; n <= (1 << 20); n *= 2)
        d.push_back(seq_stats(seq, n).S_n - 0.8 * std::log(static_cast<double>(n)));
    for (std::size_t i = 2; i < d.size(); ++i) EXPECT_LE(std::abs(d[i] - d[i - 1]), std::abs(d[i - 1] - d[i - 2]) + 1e-12);
    EXPECT_LT(std::abs(d.back() - d[d.size() - 2]), 1e-6);
}

TEST(ThetaBounds, COverN)
{
    const auto b = theta_bounds(LengthSequence::c_over_n(1.0), 100);
    EXPECT_DOUBLE_EQ(b.M1_hat, 1.0);
    EXPECT_DOUBLE_EQ(b.M0_hat, 0.5);
    EXPECT_FALSE(b.warning);
}

TEST(ThetaBounds, PowerTwoWarns)
{
    const auto b = theta_bounds(LengthSequence::power(1.0, 2.0), 100);
    EXPECT_NEAR(b.M0_hat, 0.01, 1e-15);
    EXPECT_TRUE(b.warning);
}

TEST(ThetaBounds, MinusLogKind)
{
    const auto b = theta_bounds(LengthSequence::c_over_n_minus_log(2.0), 10000);
    // The capped first term gives k l_k = 0.5 exactly.
    EXPECT_DOUBLE_EQ(b.M0_hat, 0.5);
    EXPECT_GT(b.M1_hat, 0.5);
    EXPECT_LT(b.M1_hat, 2.1);
    EXPECT_THROW(theta_bounds(LengthSequence::c_over_n(1.0), 9), ValidationError);
}
