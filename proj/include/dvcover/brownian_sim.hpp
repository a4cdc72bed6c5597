#pragma once

// Brownian model: exact increments for two-time correlations, and paths
// sampled on a time grid for measure-type estimates.
//
// Grid scans see the configuration only at grid times and miss short
// uncovered excursions, so they estimate measures, never existence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "dvcover/circle.hpp"
#include "dvcover/error.hpp"
#include "dvcover/length_seq.hpp"
#include "dvcover/numerics.hpp"
#include "dvcover/parallel.hpp"
#include "dvcover/poisson_sim.hpp"
#include "dvcover/rng.hpp"

namespace dvcover {

inline constexpr double kMaxGridDt = 1e-2;
inline constexpr double kDefaultGridDt = 1e-4;
inline constexpr double kGridValueBudget = 2e8; // stored center values

/// Brownian displacement over time t, reduced modulo one.
inline CirclePoint sample_increment(double t, Xoshiro256& g)
{
    if (!(t > 0.0)) throw ValidationError("increment time must be positive");
    return CirclePoint(std::sqrt(t) * standard_normal(g));
}

struct GridOptions
{
    bool zero_increments = false; // test hook: freeze every arc at its initial center
};

/// Number of grid steps: ceil(1/dt), with 1/dt that is an integer up to
/// rounding taken as exact.
inline std::int64_t grid_steps(double dt)
{
    const double inv = 1.0 / dt;
    const double r = std::round(inv);
    if (std::abs(inv - r) <= 1e-9 * r) return static_cast<std::int64_t>(r);
    return static_cast<std::int64_t>(std::ceil(inv));
}

namespace detail {

inline void check_dt(double dt, const GridOptions& opt)
{
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (dt > kMaxGridDt && !opt.zero_increments) throw ValidationError("dt must not exceed 1e-2");
}

} // namespace detail

/// Per-step generator of all n centers. Arc i draws its initial center and
/// then one normal per step from its own stream.
class BrownianGridStream
{
public:
    BrownianGridStream(std::int64_t n, double dt, const LengthSequence& seq, std::uint64_t master_seed,
                       std::uint64_t replicate_index, GridOptions opt = {})
        : dt_(dt), steps_(0), sigma_(std::sqrt(dt)), opt_(opt)
    {
        if (n < 1) throw ValidationError("n must be at least 1");
        detail::check_dt(dt, opt);
        steps_ = grid_steps(dt);
        lengths_ = lengths(seq, n);
        rngs_.reserve(static_cast<std::size_t>(n));
        centers_.reserve(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            rngs_.push_back(make_stream(master_seed, replicate_index, static_cast<std::uint64_t>(i)));
            centers_.push_back(CirclePoint(uniform01(rngs_.back())));
        }
    }

    std::int64_t step() const noexcept { return step_; }
    std::int64_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }
    double time() const noexcept { return static_cast<double>(step_) * dt_; }
    std::span<const CirclePoint> centers() const noexcept { return centers_; }
    std::span<const double> lengths_view() const noexcept { return lengths_; }
    bool done() const noexcept { return step_ >= steps_; }

    void advance()
    {
        if (done()) return;
        ++step_;
        if (opt_.zero_increments) return;
        for (std::size_t i = 0; i < centers_.size(); ++i)
            centers_[i] = centers_[i] + sigma_ * standard_normal(rngs_[i]);
    }

private:
    double dt_;
    std::int64_t steps_;
    double sigma_;
    GridOptions opt_;
    std::int64_t step_ = 0;
    std::vector<double> lengths_;
    std::vector<Xoshiro256> rngs_;
    std::vector<CirclePoint> centers_;
};

struct BrownianGridRun
{
    std::int64_t n = 0;
    double dt = 0.0;
    std::int64_t steps = 0;
    std::vector<double> lengths;
    std::vector<CirclePoint> centers; // (steps + 1) x n, row m holds time m dt
    std::uint64_t master_seed = 0;
    std::uint64_t replicate_index = 0;

    std::span<const CirclePoint> at_step(std::int64_t m) const
    {
        return std::span<const CirclePoint>(centers).subspan(static_cast<std::size_t>(m * n), static_cast<std::size_t>(n));
    }
};

inline BrownianGridRun run_grid(std::int64_t n, double dt, const LengthSequence& seq, std::uint64_t master_seed,
                                std::uint64_t replicate_index, GridOptions opt = {})
{
    BrownianGridStream s(n, dt, seq, master_seed, replicate_index, opt);
    const double values = static_cast<double>(n) * static_cast<double>(s.steps() + 1);
    if (values > kGridValueBudget)
        throw Refusal(Refusal::Reason::budget_exceeded,
                      "stored grid would hold " + detail::format_double(values) + " center values; use streaming scans");
    BrownianGridRun run;
    run.n = n;
    run.dt = dt;
    run.steps = s.steps();
    run.lengths.assign(s.lengths_view().begin(), s.lengths_view().end());
    run.master_seed = master_seed;
    run.replicate_index = replicate_index;
    run.centers.reserve(static_cast<std::size_t>(values));
    for (;;) {
        run.centers.insert(run.centers.end(), s.centers().begin(), s.centers().end());
        if (s.done()) break;
        s.advance();
    }
    return run;
}

struct GridPointScan
{
    double grid_uncovered_fraction = 0.0;
    ExceptionalTimeSet grid_time_set; // each uncovered grid time m stands for [m dt, (m + 1) dt)
};

struct GridCircleScan
{
    double grid_time_uncovered_fraction = 0.0;
    double mean_gap_measure = 0.0;
};

namespace detail {

inline bool point_uncovered(std::span<const CirclePoint> centers, std::span<const double> lens, CirclePoint x)
{
    for (std::size_t i = 0; i < centers.size(); ++i)
        if (circ_dist(centers[i], x) < 0.5 * lens[i]) return false;
    return true;
}

class PointGridAccumulator
{
public:
    PointGridAccumulator(double dt, std::int64_t steps) : dt_(dt), steps_(steps) {}

    void add(std::int64_t m, bool uncovered)
    {
        if (!uncovered) return;
        ++count_;
        out_.grid_time_set.append(static_cast<double>(m) * dt_, std::min(1.0, static_cast<double>(m + 1) * dt_));
    }

    GridPointScan finish()
    {
        out_.grid_uncovered_fraction = static_cast<double>(count_) / static_cast<double>(steps_ + 1);
        out_.grid_time_set.finalize();
        return std::move(out_);
    }

private:
    double dt_;
    std::int64_t steps_;
    std::int64_t count_ = 0;
    GridPointScan out_;
};

inline GapSet gaps_of(std::span<const CirclePoint> centers, std::span<const double> lens)
{
    ArcConfiguration cfg;
    cfg.reserve(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) cfg.emplace_back(centers[i], lens[i]);
    return uncovered_gaps(cfg);
}

} // namespace detail

inline GridPointScan scan_point_grid(const BrownianGridRun& run, CirclePoint x)
{
    detail::PointGridAccumulator acc(run.dt, run.steps);
    for (std::int64_t m = 0; m <= run.steps; ++m) acc.add(m, detail::point_uncovered(run.at_step(m), run.lengths, x));
    return acc.finish();
}

inline GridPointScan scan_point_grid(BrownianGridStream& s, CirclePoint x)
{
    detail::PointGridAccumulator acc(s.dt(), s.steps());
    for (;;) {
        acc.add(s.step(), detail::point_uncovered(s.centers(), s.lengths_view(), x));
        if (s.done()) break;
        s.advance();
    }
    return acc.finish();
}

inline GridCircleScan scan_circle_grid(const BrownianGridRun& run)
{
    std::int64_t uncovered = 0;
    KahanSum gap;
    for (std::int64_t m = 0; m <= run.steps; ++m) {
        const auto g = detail::gaps_of(run.at_step(m), run.lengths);
        if (!g.fully_covered()) ++uncovered;
        gap.add(g.total_length);
    }
    const double count = static_cast<double>(run.steps + 1);
    return GridCircleScan{static_cast<double>(uncovered) / count, gap.value() / count};
}

inline GridCircleScan scan_circle_grid(BrownianGridStream& s)
{
    std::int64_t uncovered = 0;
    KahanSum gap;
    for (;;) {
        const auto g = detail::gaps_of(s.centers(), s.lengths_view());
        if (!g.fully_covered()) ++uncovered;
        gap.add(g.total_length);
        if (s.done()) break;
        s.advance();
    }
    const double count = static_cast<double>(s.steps() + 1);
    return GridCircleScan{static_cast<double>(uncovered) / count, gap.value() / count};
}

/// Stream one row per grid time: step, time, cover count of x, gap measure.
inline void write_grid_csv(std::ostream& os, BrownianGridStream& s, CirclePoint x)
{
    os << "step,time,cover_count,gap_measure\n";
    for (;;) {
        const auto c = s.centers();
        const auto lens = s.lengths_view();
        std::size_t count = 0;
        for (std::size_t i = 0; i < c.size(); ++i)
            if (circ_dist(c[i], x) < 0.5 * lens[i]) ++count;
        const auto g = detail::gaps_of(c, lens);
        os << s.step() << ',' << detail::format_double(s.time()) << ',' << count << ','
           << detail::format_double(g.total_length) << '\n';
        if (s.done()) break;
        s.advance();
    }
}

struct GridMcParams
{
    std::int64_t n = 1;
    double dt = kDefaultGridDt;
    LengthSequence seq = LengthSequence::c_over_n(1.0);
    std::int64_t reps = 100;
    std::uint64_t master_seed = 0;
    int threads = 1;
};

/// Monte Carlo of the grid-uncovered fraction of a fixed point.
inline McAggregate mc_point_grid(const GridMcParams& p, CirclePoint x = CirclePoint(0.0))
{
    if (p.reps < 100) throw ValidationError("reps must be at least 100");
    const auto sums = chunked_reduce<MomentSums>(p.reps, p.threads, [&](std::int64_t rep, MomentSums& acc) {
        BrownianGridStream s(p.n, p.dt, p.seq, p.master_seed, static_cast<std::uint64_t>(rep));
        const auto r = scan_point_grid(s, x);
        acc.add(r.grid_uncovered_fraction, !r.grid_time_set.empty());
    });
    return summarize(sums);
}

/// Monte Carlo of the mean gap measure over grid times; p_nonempty is the
/// frequency of an uncovered grid time.
inline McAggregate mc_circle_grid(const GridMcParams& p)
{
    if (p.reps < 100) throw ValidationError("reps must be at least 100");
    const auto sums = chunked_reduce<MomentSums>(p.reps, p.threads, [&](std::int64_t rep, MomentSums& acc) {
        BrownianGridStream s(p.n, p.dt, p.seq, p.master_seed, static_cast<std::uint64_t>(rep));
        const auto r = scan_circle_grid(s);
        acc.add(r.mean_gap_measure, r.grid_time_uncovered_fraction > 0.0);
    });
    return summarize(sums);
}

/// Monte Carlo of P(arc misses 0 at time 0 and misses x at time t) with exact increments.
inline MeanSe mc_pair_brownian(double ell, double t, double x, std::int64_t reps, std::uint64_t master_seed,
                               int threads = 1)
{
    if (!(ell > 0.0 && ell <= 0.5)) throw ValidationError("ell must lie in (0, 1/2]");
    if (!(t > 0.0)) throw ValidationError("t must be positive");
    const auto sums = chunked_reduce<MomentSums>(reps, threads, [&](std::int64_t rep, MomentSums& acc) {
        auto g = make_stream(master_seed, static_cast<std::uint64_t>(rep), 0);
        const CirclePoint u0(uniform01(g));
        const CirclePoint ut = u0 + sample_increment(t, g).pos();
        const bool miss = circ_dist(u0, CirclePoint(0.0)) >= 0.5 * ell && circ_dist(ut, CirclePoint(x)) >= 0.5 * ell;
        acc.add(miss ? 1.0 : 0.0, miss);
    });
    return mean_se_from_sums(sums.x.value(), sums.x2.value(), static_cast<double>(sums.count));
}

/// Same two-point function from a grid path with step t / steps_per_t.
inline MeanSe mc_pair_brownian_grid(double ell, double t, int steps_per_t, std::int64_t reps, std::uint64_t master_seed,
                                    int threads = 1)
{
    if (!(ell > 0.0 && ell <= 0.5)) throw ValidationError("ell must lie in (0, 1/2]");
    if (!(t > 0.0) || steps_per_t < 1) throw ValidationError("t and steps must be positive");
    const double sigma = std::sqrt(t / steps_per_t);
    const auto sums = chunked_reduce<MomentSums>(reps, threads, [&](std::int64_t rep, MomentSums& acc) {
        auto g = make_stream(master_seed, static_cast<std::uint64_t>(rep), 0);
        const CirclePoint u0(uniform01(g));
        CirclePoint u = u0;
        for (int k = 0; k < steps_per_t; ++k) u = u + sigma * standard_normal(g);
        const bool miss = circ_dist(u0, CirclePoint(0.0)) >= 0.5 * ell && circ_dist(u, CirclePoint(0.0)) >= 0.5 * ell;
        acc.add(miss ? 1.0 : 0.0, miss);
    });
    return mean_se_from_sums(sums.x.value(), sums.x2.value(), static_cast<double>(sums.count));
}

} // namespace dvcover
