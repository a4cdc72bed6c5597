#pragma once

// Box-counting dimension of uncovered time sets and space-time sets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "dvcover/circle.hpp"
#include "dvcover/error.hpp"
#include "dvcover/numerics.hpp"
#include "dvcover/parallel.hpp"
#include "dvcover/poisson_sim.hpp"

namespace dvcover {

// Box edges closer than this (in box units) to an interval endpoint are
// treated as coinciding with it.
inline constexpr double kBoxSnap = 1e-9;

struct BoxCountRun
{
    std::vector<double> deltas; // decreasing
    std::vector<std::int64_t> counts;
    double slope = 0.0;
    double slope_lo = 0.0;
    double slope_hi = 0.0;
};

namespace detail {

inline void check_deltas(std::span<const double> deltas)
{
    if (deltas.size() < 2) throw ValidationError("at least two box sizes are required");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0.0 && deltas[i] <= 1.0)) throw ValidationError("box sizes must lie in (0, 1]");
        if (i > 0 && !(deltas[i] < deltas[i - 1])) throw ValidationError("box sizes must be decreasing");
    }
}

/// Least-squares slope of log count against log(1 / delta) over nonzero
/// counts, with a 95% Student-t interval.
inline void fit_counts(BoxCountRun& run, std::span<const double> scale_deltas)
{
    std::vector<double> x, y;
    for (std::size_t i = 0; i < run.counts.size(); ++i) {
        if (run.counts[i] <= 0) continue;
        x.push_back(-std::log(scale_deltas[i]));
        y.push_back(std::log(static_cast<double>(run.counts[i])));
    }
    if (x.size() < 2) {
        run.slope = run.slope_lo = run.slope_hi = 0.0;
        return;
    }
    const auto f = fit_line(x, y);
    run.slope = f.slope;
    const double half = x.size() > 2 ? student_t_975(x.size() - 2) * f.slope_se : 0.0;
    run.slope_lo = f.slope - half;
    run.slope_hi = f.slope + half;
}

/// Indices of the delta-boxes [i delta, (i + 1) delta) meeting [a, b).
inline std::pair<std::int64_t, std::int64_t> box_range(double a, double b, double delta)
{
    const auto lo = static_cast<std::int64_t>(std::floor(a / delta + kBoxSnap));
    const auto hi = static_cast<std::int64_t>(std::ceil(b / delta - kBoxSnap)) - 1;
    return {lo, std::max(lo, hi)};
}

} // namespace detail

/// Number of delta-boxes meeting a union of sorted disjoint half-open intervals.
inline std::int64_t count_boxes_1d(const ExceptionalTimeSet& ts, double delta)
{
    std::int64_t count = 0, last = -1;
    for (const auto& [a, b] : ts.intervals) {
        auto [lo, hi] = detail::box_range(a, b, delta);
        lo = std::max(lo, last + 1);
        if (hi >= lo) {
            count += hi - lo + 1;
            last = hi;
        }
    }
    return count;
}

inline BoxCountRun box_count_1d(const ExceptionalTimeSet& ts, std::span<const double> deltas)
{
    detail::check_deltas(deltas);
    BoxCountRun run;
    run.deltas.assign(deltas.begin(), deltas.end());
    for (double d : deltas) run.counts.push_back(count_boxes_1d(ts, d));
    detail::fit_counts(run, deltas);
    return run;
}

/// Space-time rectangle [t0, t1) x [x0, x0 + len] (mod 1 in x).
struct SpaceTimeCell
{
    double t0 = 0.0, t1 = 0.0;
    double x0 = 0.0, len = 0.0;
};

struct CellSet
{
    std::vector<SpaceTimeCell> cells;
    double resolution = 0.0; // time resolution of the cells; 0 when exact
};

/// Uncovered space-time cells of a Poisson timeline (exact).
inline CellSet poisson_cells(const PoissonTimeline& tl)
{
    CellSet out;
    scan_circle(tl, GapUpdate::incremental, [&](double t0, double t1, const GapSet& g) {
        for (const auto& gap : g.gaps) out.cells.push_back(SpaceTimeCell{t0, t1, gap.start.pos(), gap.length});
    });
    return out;
}

inline constexpr std::int64_t kMaxBoxGrid = std::int64_t{1} << 30;

/// Anisotropic box counts: at level i the boxes are dt[i] x dx[i]. The
/// slope is fitted against log(1 / dx).
inline BoxCountRun box_count_2d(const CellSet& cs, std::span<const double> dts, std::span<const double> dxs)
{
    detail::check_deltas(dxs);
    if (dts.size() != dxs.size()) throw ValidationError("time and space box sizes must pair up");
    for (double d : dts)
        if (!(d > 0.0 && d <= 1.0)) throw ValidationError("box sizes must lie in (0, 1]");
    for (double d : dts)
        if (cs.resolution > d)
            throw Refusal(Refusal::Reason::precondition_failed,
                          "cell time resolution " + detail::format_double(cs.resolution) +
                              " is coarser than the box size " + detail::format_double(d));

    BoxCountRun run;
    run.deltas.assign(dxs.begin(), dxs.end());
    for (std::size_t lvl = 0; lvl < dxs.size(); ++lvl) {
        const double dt = dts[lvl], dx = dxs[lvl];
        const auto nt = static_cast<std::int64_t>(std::ceil(1.0 / dt - kBoxSnap));
        const auto nx = static_cast<std::int64_t>(std::ceil(1.0 / dx - kBoxSnap));
        if (nt * nx > kMaxBoxGrid)
            throw Refusal(Refusal::Reason::budget_exceeded, "box grid too fine for an exact count");
        std::vector<bool> hit(static_cast<std::size_t>(nt * nx), false);
        std::int64_t count = 0;
        auto mark = [&](std::int64_t i, std::int64_t j) {
            const auto idx = static_cast<std::size_t>(i * nx + j);
            if (!hit[idx]) {
                hit[idx] = true;
                ++count;
            }
        };
        for (const auto& c : cs.cells) {
            auto [i0, i1] = detail::box_range(c.t0, c.t1, dt);
            i1 = std::min(i1, nt - 1);
            // Closed x-range [x0, x0 + len], possibly wrapping past 1.
            const auto j0 = static_cast<std::int64_t>(std::floor(c.x0 / dx + kBoxSnap));
            const auto j1 = static_cast<std::int64_t>(std::floor((c.x0 + c.len) / dx - kBoxSnap));
            for (std::int64_t i = i0; i <= i1; ++i)
                for (std::int64_t j = j0; j <= std::max(j0, j1); ++j) mark(i, ((j % nx) + nx) % nx);
        }
        run.counts.push_back(count);
    }
    detail::fit_counts(run, dxs);
    return run;
}

/// Dyadic sizes 2^-k with lo <= 2^-k <= hi, largest first.
inline std::vector<double> dyadic_window(double lo, double hi)
{
    std::vector<double> out;
    for (int k = 0; k < 60; ++k) {
        const double d = std::ldexp(1.0, -k);
        if (d < lo * (1.0 - 1e-12)) break;
        if (d <= hi * (1.0 + 1e-12)) out.push_back(d);
    }
    return out;
}

struct TrendPoint
{
    std::int64_t n = 0;
    double mean_slope = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::int64_t nonempty = 0; // replicates that entered the average
    std::int64_t reps = 0;
};

struct DimensionTrend
{
    std::vector<TrendPoint> per_n;
    double extrapolated_dim = 0.0;
    bool monotone = true;
};

/// Averages per-replicate slopes at each n and extrapolates linearly in
/// 1 / log n to 1 / log n = 0. Empty replicates carry no slope and are left
/// out of the average.
inline DimensionTrend dimension_trend(std::span<const std::int64_t> ns, std::span<const std::vector<std::optional<double>>> slopes)
{
    if (ns.size() < 3) throw ValidationError("a dimension trend needs at least three values of n");
    if (ns.size() != slopes.size()) throw ValidationError("one slope list per n is required");
    DimensionTrend out;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] < 2 || (i > 0 && ns[i] <= ns[i - 1])) throw ValidationError("n values must be increasing and at least 2");
        TrendPoint p;
        p.n = ns[i];
        p.reps = static_cast<std::int64_t>(slopes[i].size());
        double s = 0.0, s2 = 0.0;
        for (const auto& v : slopes[i]) {
            if (!v) continue;
            ++p.nonempty;
            s += *v;
            s2 += *v * *v;
        }
        const auto m = mean_se_from_sums(s, s2, static_cast<double>(p.nonempty));
        p.mean_slope = m.mean;
        const double half = p.nonempty > 1 ? student_t_975(static_cast<std::size_t>(p.nonempty - 1)) * m.se : 0.0;
        p.ci_lo = m.mean - half;
        p.ci_hi = m.mean + half;
        out.per_n.push_back(p);
        if (p.nonempty > 0) {
            x.push_back(1.0 / std::log(static_cast<double>(p.n)));
            y.push_back(p.mean_slope);
        }
    }
    for (std::size_t i = 2; i < out.per_n.size(); ++i) {
        const double d1 = out.per_n[i - 1].mean_slope - out.per_n[i - 2].mean_slope;
        const double d2 = out.per_n[i].mean_slope - out.per_n[i - 1].mean_slope;
        if (d1 * d2 < 0.0) out.monotone = false;
    }
    if (x.size() >= 2)
        out.extrapolated_dim = fit_line(x, y).intercept;
    else if (x.size() == 1)
        out.extrapolated_dim = y.front();
    return out;
}

struct TypeIPoissonScan
{
    std::vector<std::int64_t> ns;
    std::vector<std::vector<std::optional<double>>> slopes;
    DimensionTrend trend;
};

/// Box-counting slopes of T_n for the Poisson model over the window
/// delta in [n^{-alpha}, n^{-alpha/4}], at each n in ns.
inline TypeIPoissonScan type1_poisson_dimension(double alpha, const LengthSequence& seq, std::span<const std::int64_t> ns,
                                                std::int64_t reps, std::uint64_t master_seed, int threads)
{
    if (!(alpha > 0.0)) throw ValidationError("alpha must be positive for the type I dimension scan");
    if (reps < 2) throw ValidationError("reps must be at least 2");
    TypeIPoissonScan out;
    out.ns.assign(ns.begin(), ns.end());
    for (auto n : ns) {
        const double nd = static_cast<double>(n);
        const auto deltas = dyadic_window(std::pow(nd, -alpha), std::pow(nd, -alpha / 4.0));
        if (deltas.size() < 2) throw ValidationError("box window holds fewer than two dyadic sizes");
        out.slopes.push_back(parallel_map<std::optional<double>>(reps, threads, [&](std::int64_t rep) -> std::optional<double> {
            const auto ts = scan_point_chain(n, alpha, seq, master_seed, static_cast<std::uint64_t>(rep));
            if (ts.empty()) return std::nullopt;
            return box_count_1d(ts, deltas).slope;
        }));
    }
    out.trend = dimension_trend(out.ns, out.slopes);
    return out;
}

inline void write_box_csv(std::ostream& os, const BoxCountRun& run)
{
    os << "delta,count\n";
    for (std::size_t i = 0; i < run.deltas.size(); ++i)
        os << detail::format_double(run.deltas[i]) << ',' << run.counts[i] << '\n';
}

inline void write_trend_csv(std::ostream& os, const DimensionTrend& t)
{
    os << "n,slope,ci_lo,ci_hi\n";
    for (const auto& p : t.per_n)
        os << p.n << ',' << detail::format_double(p.mean_slope) << ',' << detail::format_double(p.ci_lo) << ','
           << detail::format_double(p.ci_hi) << '\n';
}

} // namespace dvcover
