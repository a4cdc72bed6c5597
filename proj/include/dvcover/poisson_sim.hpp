#pragma once

// Event-driven simulation of the Poisson-updating model on [0, 1].
//
// Arc i keeps its center until the jump times of a Poisson process of rate
// l_i^{-alpha}, at which the center is redrawn uniformly. Between events the
// configuration is static, so the uncovered time set of a point and the
// uncovered space-time set of the circle are computed exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dvcover/circle.hpp"
#include "dvcover/error.hpp"
#include "dvcover/length_seq.hpp"
#include "dvcover/numerics.hpp"
#include "dvcover/parallel.hpp"
#include "dvcover/rng.hpp"

namespace dvcover {

inline constexpr double kDefaultEventBudget = 1e8;

struct PoissonEvent
{
    double time = 0.0;       // in (0, 1]
    std::uint32_t arc = 0;   // 0-based arc index
    CirclePoint new_center;

    friend bool operator==(const PoissonEvent&, const PoissonEvent&) = default;
};

struct PoissonTimeline
{
    std::int64_t n = 0;
    double alpha = 0.0;
    std::vector<double> lengths;
    std::vector<CirclePoint> initial_centers;
    std::vector<PoissonEvent> events; // sorted by (time, arc)
    std::uint64_t master_seed = 0;
    std::uint64_t replicate_index = 0;

    friend bool operator==(const PoissonTimeline&, const PoissonTimeline&) = default;
};

/// Sum of update rates l_i^{-alpha}: the expected number of events on [0, 1].
inline double expected_event_count(std::span<const double> lens, double alpha)
{
    KahanSum s;
    for (double l : lens) s.add(std::pow(l, -alpha));
    return s.value();
}

namespace detail {

inline void check_alpha(double alpha)
{
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be a nonnegative number");
}

inline void check_budget(double expected, double budget)
{
    if (expected > budget)
        throw Refusal(Refusal::Reason::budget_exceeded,
                      "expected event count " + format_double(expected) + " exceeds the event budget " +
                          format_double(budget));
}

} // namespace detail

inline PoissonTimeline build_timeline(std::int64_t n, double alpha, const LengthSequence& seq, std::uint64_t master_seed,
                                      std::uint64_t replicate_index, double budget = kDefaultEventBudget)
{
    if (n < 1) throw ValidationError("n must be at least 1");
    detail::check_alpha(alpha);
    PoissonTimeline tl;
    tl.n = n;
    tl.alpha = alpha;
    tl.lengths = lengths(seq, n);
    tl.master_seed = master_seed;
    tl.replicate_index = replicate_index;
    detail::check_budget(expected_event_count(tl.lengths, alpha), budget);

    tl.initial_centers.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        auto g = make_stream(master_seed, replicate_index, static_cast<std::uint64_t>(i));
        tl.initial_centers[static_cast<std::size_t>(i)] = CirclePoint(uniform01(g));
        const double rate = std::pow(tl.lengths[static_cast<std::size_t>(i)], -alpha);
        double t = 0.0;
        for (;;) {
            t += exponential(g, rate);
            if (t > 1.0) break;
            tl.events.push_back(PoissonEvent{t, static_cast<std::uint32_t>(i), CirclePoint(uniform01(g))});
        }
    }
    std::sort(tl.events.begin(), tl.events.end(), [](const PoissonEvent& a, const PoissonEvent& b) {
        return a.time < b.time || (a.time == b.time && a.arc < b.arc);
    });
    return tl;
}

/// One line per event: `time arc_index new_center`, arc_index 1-based.
inline void write_timeline(std::ostream& os, const PoissonTimeline& tl)
{
    os << "# n=" << tl.n << " alpha=" << detail::format_double(tl.alpha) << " master_seed=" << tl.master_seed
       << " replicate=" << tl.replicate_index << '\n';
    for (std::size_t i = 0; i < tl.initial_centers.size(); ++i)
        os << "0 " << (i + 1) << ' ' << detail::format_double(tl.initial_centers[i].pos()) << '\n';
    for (const auto& e : tl.events)
        os << detail::format_double(e.time) << ' ' << (e.arc + 1) << ' ' << detail::format_double(e.new_center.pos()) << '\n';
}

/// Finite union of half-open intervals [start, end) in [0, 1].
struct ExceptionalTimeSet
{
    std::vector<std::pair<double, double>> intervals;
    double measure = 0.0;

    bool empty() const noexcept { return intervals.empty(); }

    /// Append [a, b) to the right of all stored intervals, merging if adjacent.
    void append(double a, double b)
    {
        if (!(b > a)) return;
        if (!intervals.empty() && intervals.back().second >= a)
            intervals.back().second = std::max(intervals.back().second, b);
        else
            intervals.emplace_back(a, b);
    }

    void finalize()
    {
        KahanSum s;
        for (const auto& [a, b] : intervals) s.add(b - a);
        measure = s.value();
    }

    bool contains(double t) const noexcept
    {
        auto it = std::upper_bound(intervals.begin(), intervals.end(), t,
                                   [](double v, const std::pair<double, double>& iv) { return v < iv.first; });
        if (it == intervals.begin()) return false;
        --it;
        return t >= it->first && t < it->second;
    }
};

/// Times in [0, 1) at which no arc of the timeline covers x.
inline ExceptionalTimeSet scan_point(const PoissonTimeline& tl, CirclePoint x)
{
    std::vector<CirclePoint> centers = tl.initial_centers;
    std::int64_t count = 0;
    for (std::size_t i = 0; i < centers.size(); ++i)
        if (circ_dist(centers[i], x) < 0.5 * tl.lengths[i]) ++count;

    ExceptionalTimeSet out;
    double seg_start = 0.0;
    for (const auto& e : tl.events) {
        if (count == 0) out.append(seg_start, e.time);
        const double half = 0.5 * tl.lengths[e.arc];
        const bool was = circ_dist(centers[e.arc], x) < half;
        const bool now = circ_dist(e.new_center, x) < half;
        count += static_cast<int>(now) - static_cast<int>(was);
        centers[e.arc] = e.new_center;
        seg_start = e.time;
    }
    if (count == 0) out.append(seg_start, 1.0);
    out.finalize();
    return out;
}

struct SpaceTimeMeasureResult
{
    ExceptionalTimeSet time_set; // times at which the circle is not fully covered
    double spacetime_measure = 0.0;
};

enum class GapUpdate { full, incremental };

/// Called once per static segment [t0, t1) with the gaps in force there.
using SegmentVisitor = std::function<void(double t0, double t1, const GapSet& gaps)>;

inline SpaceTimeMeasureResult scan_circle(const PoissonTimeline& tl, GapUpdate mode = GapUpdate::incremental,
                                          const SegmentVisitor& visit = {})
{
    ArcConfiguration cfg;
    cfg.reserve(tl.initial_centers.size());
    for (std::size_t i = 0; i < tl.initial_centers.size(); ++i) cfg.emplace_back(tl.initial_centers[i], tl.lengths[i]);

    SortedArcs sorted;
    if (mode == GapUpdate::incremental) sorted = SortedArcs(cfg);

    GapSet gaps;
    auto recompute = [&] {
        if (mode == GapUpdate::incremental)
            sorted.gaps(gaps);
        else
            gaps = uncovered_gaps(cfg);
    };
    recompute();

    SpaceTimeMeasureResult out;
    KahanSum measure;
    double seg_start = 0.0;
    auto close_segment = [&](double t1) {
        if (!(t1 > seg_start)) return;
        if (!gaps.fully_covered()) out.time_set.append(seg_start, t1);
        measure.add((t1 - seg_start) * gaps.total_length);
        if (visit) visit(seg_start, t1, gaps);
    };

    for (std::size_t k = 0; k < tl.events.size(); ++k) {
        const auto& e = tl.events[k];
        close_segment(e.time);
        cfg[e.arc].center = e.new_center;
        if (mode == GapUpdate::incremental) sorted.move(e.arc, to_span(cfg[e.arc]).start);
        seg_start = e.time;
        // Simultaneous events leave no segment between them.
        if (k + 1 == tl.events.size() || tl.events[k + 1].time != e.time) recompute();
    }
    close_segment(1.0);
    out.time_set.finalize();
    out.spacetime_measure = measure.value();
    return out;
}

/// Centers at S_n = inf{t : no arc covers x}, or nullopt if x stays covered
/// on all of [0, 1].
struct FirstUncovered
{
    double time = 0.0;
    std::vector<CirclePoint> centers;
};

inline std::optional<FirstUncovered> first_uncovered(const PoissonTimeline& tl, CirclePoint x)
{
    std::vector<CirclePoint> centers = tl.initial_centers;
    std::int64_t count = 0;
    for (std::size_t i = 0; i < centers.size(); ++i)
        if (circ_dist(centers[i], x) < 0.5 * tl.lengths[i]) ++count;
    if (count == 0) return FirstUncovered{0.0, centers};
    for (std::size_t k = 0; k < tl.events.size(); ++k) {
        const auto& e = tl.events[k];
        const double half = 0.5 * tl.lengths[e.arc];
        count += static_cast<int>(circ_dist(e.new_center, x) < half) - static_cast<int>(circ_dist(centers[e.arc], x) < half);
        centers[e.arc] = e.new_center;
        if (count == 0 && (k + 1 == tl.events.size() || tl.events[k + 1].time != e.time))
            return FirstUncovered{e.time, centers};
    }
    return std::nullopt;
}

/// Uncovered time set of a fixed point, sampled through the coverage
/// indicators instead of the center paths.
///
/// Whether arc i covers x is a two-state Markov chain: each update redraws
/// the state as on with probability l_i, so off -> on has rate r l_i and
/// on -> off has rate r (1 - l_i), with r = l_i^{-alpha}. The arcs are
/// independent, so the uncovered set is built arc by arc, and arc i is only
/// simulated on the set left uncovered by arcs 1..i-1, jumping across the
/// rest with the chain's transition law. The result has the same law as
/// scan_point applied to build_timeline, at a cost that does not grow with
/// the total event count.
inline ExceptionalTimeSet scan_point_chain(std::int64_t n, double alpha, const LengthSequence& seq,
                                           std::uint64_t master_seed, std::uint64_t replicate_index)
{
    if (n < 1) throw ValidationError("n must be at least 1");
    detail::check_alpha(alpha);
    const auto lens = lengths(seq, n);

    std::vector<std::pair<double, double>> cur{{0.0, 1.0}}, next;
    for (std::int64_t i = 0; i < n && !cur.empty(); ++i) {
        const double l = lens[static_cast<std::size_t>(i)];
        const double r = std::pow(l, -alpha);
        auto g = make_stream(master_seed, replicate_index, static_cast<std::uint64_t>(i));
        bool on = uniform01(g) < l;
        double clock = 0.0;
        next.clear();
        for (const auto& [a, b] : cur) {
            if (a > clock) {
                const double p_on = l + ((on ? 1.0 : 0.0) - l) * std::exp(-r * (a - clock));
                on = uniform01(g) < p_on;
            }
            double t = a;
            while (t < b) {
                const double hold = exponential(g, on ? r * (1.0 - l) : r * l);
                const double end = std::min(t + hold, b);
                if (!on && end > t) {
                    if (!next.empty() && next.back().second >= t)
                        next.back().second = end;
                    else
                        next.emplace_back(t, end);
                }
                if (t + hold >= b) break;
                t += hold;
                on = !on;
            }
            clock = b;
        }
        std::swap(cur, next);
    }
    ExceptionalTimeSet out;
    out.intervals = std::move(cur);
    out.finalize();
    return out;
}

enum class PointMethod { chain, timeline };

inline const char* to_string(PointMethod m) { return m == PointMethod::chain ? "chain" : "timeline"; }

struct McParams
{
    std::int64_t n = 1;
    double alpha = 1.0;
    LengthSequence seq = LengthSequence::c_over_n(1.0);
    std::int64_t reps = 1000;
    std::uint64_t master_seed = 0;
    int threads = 1;
    double budget = kDefaultEventBudget;
};

struct MomentSums
{
    KahanSum x, x2, x4, nonempty;
    std::int64_t count = 0;

    void add(double v, bool is_nonempty)
    {
        x.add(v);
        x2.add(v * v);
        x4.add(v * v * v * v);
        nonempty.add(is_nonempty ? 1.0 : 0.0);
        ++count;
    }

    void merge(const MomentSums& o)
    {
        x.merge(o.x);
        x2.merge(o.x2);
        x4.merge(o.x4);
        nonempty.merge(o.nonempty);
        count += o.count;
    }
};

struct McAggregate
{
    std::int64_t reps = 0;
    double mean = 0.0;          // mean of X_n
    double se = 0.0;
    double second_moment = 0.0; // mean of X_n^2
    double second_moment_se = 0.0;
    double p_nonempty = 0.0;
    double se_p = 0.0;
};

inline McAggregate summarize(const MomentSums& s)
{
    McAggregate a;
    a.reps = s.count;
    const double c = static_cast<double>(s.count);
    const auto m1 = mean_se_from_sums(s.x.value(), s.x2.value(), c);
    const auto m2 = mean_se_from_sums(s.x2.value(), s.x4.value(), c);
    const auto p = mean_se_from_sums(s.nonempty.value(), s.nonempty.value(), c);
    a.mean = m1.mean;
    a.se = m1.se;
    a.second_moment = m2.mean;
    a.second_moment_se = m2.se;
    a.p_nonempty = p.mean;
    a.se_p = p.se;
    return a;
}

namespace detail {

inline void check_mc(const McParams& p)
{
    if (p.n < 1) throw ValidationError("n must be at least 1");
    if (p.reps < 100) throw ValidationError("reps must be at least 100");
    check_alpha(p.alpha);
}

} // namespace detail

/// Monte Carlo of X_n = |T_n| for a fixed point x.
inline McAggregate mc_point(const McParams& p, CirclePoint x = CirclePoint(0.0), PointMethod method = PointMethod::chain)
{
    detail::check_mc(p);
    if (method == PointMethod::timeline) detail::check_budget(expected_event_count(lengths(p.seq, p.n), p.alpha), p.budget);
    const auto sums = chunked_reduce<MomentSums>(p.reps, p.threads, [&](std::int64_t rep, MomentSums& acc) {
        const auto r = static_cast<std::uint64_t>(rep);
        const ExceptionalTimeSet ts = method == PointMethod::chain
                                          ? scan_point_chain(p.n, p.alpha, p.seq, p.master_seed, r)
                                          : scan_point(build_timeline(p.n, p.alpha, p.seq, p.master_seed, r, p.budget), x);
        acc.add(ts.measure, !ts.empty());
    });
    return summarize(sums);
}

/// Monte Carlo of the space-time uncovered measure; p_nonempty is the
/// frequency of a nonempty uncovered time set.
inline McAggregate mc_circle(const McParams& p, GapUpdate mode = GapUpdate::incremental)
{
    detail::check_mc(p);
    detail::check_budget(expected_event_count(lengths(p.seq, p.n), p.alpha), p.budget);
    const auto sums = chunked_reduce<MomentSums>(p.reps, p.threads, [&](std::int64_t rep, MomentSums& acc) {
        const auto tl = build_timeline(p.n, p.alpha, p.seq, p.master_seed, static_cast<std::uint64_t>(rep), p.budget);
        const auto r = scan_circle(tl, mode);
        acc.add(r.spacetime_measure, !r.time_set.empty());
    });
    return summarize(sums);
}

/// Monte Carlo of P(arc misses 0 at time 0 and misses x at time t) for one arc.
inline MeanSe mc_pair_poisson(double ell, double alpha, double t, double x, std::int64_t reps, std::uint64_t master_seed,
                              int threads = 1)
{
    if (!(ell > 0.0 && ell <= 0.5)) throw ValidationError("ell must lie in (0, 1/2]");
    detail::check_alpha(alpha);
    if (!(t >= 0.0)) throw ValidationError("t must be nonnegative");
    const double rate = std::pow(ell, -alpha);
    const auto sums = chunked_reduce<MomentSums>(reps, threads, [&](std::int64_t rep, MomentSums& acc) {
        auto g = make_stream(master_seed, static_cast<std::uint64_t>(rep), 0);
        const CirclePoint u0(uniform01(g));
        const CirclePoint ut = exponential(g, rate) < t ? CirclePoint(uniform01(g)) : u0;
        const bool miss = circ_dist(u0, CirclePoint(0.0)) >= 0.5 * ell && circ_dist(ut, CirclePoint(x)) >= 0.5 * ell;
        acc.add(miss ? 1.0 : 0.0, miss);
    });
    return mean_se_from_sums(sums.x.value(), sums.x2.value(), static_cast<double>(sums.count));
}

} // namespace dvcover
