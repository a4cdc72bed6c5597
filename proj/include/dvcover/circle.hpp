#pragma once

// Geometry on the circle of circumference one.
//
// Points are fractions of the circumference in [0, 1). Arcs are open;
// the uncovered set of finitely many arcs is a finite union of closed
// arcs ("gaps"). A gap of length zero is an isolated point where two open
// arcs abut, and it is kept.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dvcover/error.hpp"

namespace dvcover {

/// Reduce a real number modulo one into [0, 1).
inline double wrap_unit(double x) noexcept
{
    double r = x - std::floor(x);
    if (r >= 1.0) r = 0.0; // x slightly below an integer rounds up
    return r;
}

class CirclePoint
{
public:
    constexpr CirclePoint() = default;
    explicit CirclePoint(double pos) noexcept : pos_(wrap_unit(pos)) {}

    double pos() const noexcept { return pos_; }

    CirclePoint operator+(double offset) const noexcept { return CirclePoint(pos_ + offset); }
    CirclePoint operator-(double offset) const noexcept { return CirclePoint(pos_ - offset); }

    friend bool operator==(CirclePoint, CirclePoint) = default;

private:
    double pos_ = 0.0;
};

/// Arclength distance, in [0, 1/2].
inline double circ_dist(CirclePoint p, CirclePoint q) noexcept
{
    const double d = std::abs(p.pos() - q.pos()); // already in [0, 1)
    return std::min(d, 1.0 - d);
}

/// Counter-clockwise displacement from `from` to `to`, in [0, 1).
inline double ccw_offset(CirclePoint from, CirclePoint to) noexcept
{
    return wrap_unit(to.pos() - from.pos());
}

struct Arc
{
    CirclePoint center;
    double length = 0.0;

    Arc() = default;
    Arc(CirclePoint c, double len) : center(c), length(len)
    {
        if (!(len > 0.0 && len <= 0.5)) throw ValidationError("arc length must lie in (0, 1/2]");
    }
    Arc(double c, double len) : Arc(CirclePoint(c), len) {}

    /// Counter-clockwise start of the open arc.
    CirclePoint start() const noexcept { return center - 0.5 * length; }
};

/// Strict containment: the arc is open.
inline bool arc_contains(const Arc& a, CirclePoint p) noexcept
{
    return circ_dist(a.center, p) < 0.5 * a.length;
}

/// A first-n covering state. Lengths are nonincreasing when the arcs come
/// from a LengthSequence; the geometry routines do not rely on that.
using ArcConfiguration = std::vector<Arc>;

inline std::size_t cover_count(std::span<const Arc> cfg, CirclePoint p) noexcept
{
    std::size_t count = 0;
    for (const auto& a : cfg)
        if (arc_contains(a, p)) ++count;
    return count;
}

/// Closed arc [start, start + length] (mod 1).
struct Gap
{
    CirclePoint start;
    double length = 0.0;

    bool contains(CirclePoint p) const noexcept { return ccw_offset(start, p) <= length; }
    double end_linear() const noexcept { return start.pos() + length; }
};

struct GapSet
{
    std::vector<Gap> gaps;     // disjoint, sorted by start
    double total_length = 0.0; // sum of gap lengths

    bool fully_covered() const noexcept { return gaps.empty(); }

    bool contains(CirclePoint p) const noexcept
    {
        return std::any_of(gaps.begin(), gaps.end(), [&](const Gap& g) { return g.contains(p); });
    }
};

/// Arc as a counter-clockwise span, the form the sweep consumes.
struct ArcSpan
{
    double start = 0.0; // in [0, 1)
    double length = 0.0;
    std::uint32_t id = 0;

    friend bool operator<(const ArcSpan& a, const ArcSpan& b) noexcept
    {
        return a.start < b.start || (a.start == b.start && a.id < b.id);
    }
};

inline ArcSpan to_span(const Arc& a, std::uint32_t id = 0) noexcept
{
    return ArcSpan{a.start().pos(), a.length, id};
}

/// Complement of the union of open arcs given as spans sorted by start.
/// Linear in the number of arcs; `out` is overwritten and its storage reused.
inline void sweep_gaps(std::span<const ArcSpan> sorted, GapSet& out)
{
    out.gaps.clear();
    out.total_length = 0.0;
    if (sorted.empty()) {
        out.gaps.push_back(Gap{CirclePoint(0.0), 1.0});
        out.total_length = 1.0;
        return;
    }

    // Arcs running past 1 cover [0, reach) after wrapping.
    double reach = 0.0;
    for (const auto& s : sorted) reach = std::max(reach, s.start + s.length - 1.0);
    const bool zero_covered = reach > 0.0;

    double cur = reach; // [.., cur) handled; the point `cur` is not covered by processed arcs
    for (const auto& s : sorted) {
        if (s.start < cur) {
            cur = std::max(cur, s.start + s.length);
        } else {
            out.gaps.push_back(Gap{CirclePoint(cur), s.start - cur});
            cur = s.start + s.length;
        }
    }

    if (!zero_covered && cur <= 1.0) {
        // The trailing gap [cur, 1] joins the leading gap, which starts at 0.
        double head = 0.0;
        if (!out.gaps.empty() && out.gaps.front().start.pos() == 0.0) {
            head = out.gaps.front().length;
            out.gaps.erase(out.gaps.begin());
        }
        out.gaps.push_back(Gap{CirclePoint(cur), (1.0 - cur) + head});
        if (cur >= 1.0) {
            // The trailing piece is the single point 0; it belongs at the front.
            Gap g = out.gaps.back();
            out.gaps.pop_back();
            g.start = CirclePoint(0.0);
            out.gaps.insert(out.gaps.begin(), g);
        }
    }

    double total = 0.0;
    for (const auto& g : out.gaps) total += g.length;
    out.total_length = total;
}

/// Uncovered set of a configuration; sorts a copy of the arc spans.
inline GapSet uncovered_gaps(std::span<const Arc> cfg)
{
    std::vector<ArcSpan> spans;
    spans.reserve(cfg.size());
    for (std::size_t i = 0; i < cfg.size(); ++i) spans.push_back(to_span(cfg[i], static_cast<std::uint32_t>(i)));
    std::sort(spans.begin(), spans.end());
    GapSet out;
    sweep_gaps(spans, out);
    return out;
}

/// Arc spans kept sorted by start under single-arc moves, so each
/// recomputation of the gap set is a linear sweep without re-sorting.
class SortedArcs
{
public:
    SortedArcs() = default;

    explicit SortedArcs(std::span<const Arc> cfg)
    {
        spans_.reserve(cfg.size());
        for (std::size_t i = 0; i < cfg.size(); ++i) spans_.push_back(to_span(cfg[i], static_cast<std::uint32_t>(i)));
        std::sort(spans_.begin(), spans_.end());
    }

    /// Move arc `id` to a new start position.
    void move(std::uint32_t id, double new_start)
    {
        auto it = std::find_if(spans_.begin(), spans_.end(), [&](const ArcSpan& s) { return s.id == id; });
        if (it == spans_.end()) throw ValidationError("unknown arc id");
        ArcSpan moved = *it;
        moved.start = new_start;
        auto dest = std::lower_bound(spans_.begin(), spans_.end(), moved);
        if (dest <= it)
            std::move_backward(dest, it, it + 1);
        else
            std::move(it + 1, dest--, it);
        *dest = moved;
    }

    void gaps(GapSet& out) const { sweep_gaps(spans_, out); }

    std::span<const ArcSpan> spans() const noexcept { return spans_; }

private:
    std::vector<ArcSpan> spans_;
};

} // namespace dvcover
