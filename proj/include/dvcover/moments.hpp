#pragma once

// Second moments of the uncovered measure X_n.
//
// For a stationary pair correlation g, the double time integral reduces to
//
//     int_0^1 int_0^1 g(|t - s|) ds dt = 2 int_0^1 (1 - t) g(t) dt,
//
// and g(t) = prod_k rho_k(t). The products are normalised by
// (1 - l_k)^2 so that EX2 = u_n^2 R, with R = 2 int (1 - t) prod_k
// rho_k / (1 - l_k)^2 dt. The lower bound (EX)^2 / EX2 is then 1 / R,
// which stays representable when u_n underflows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dvcover/conditions.hpp"
#include "dvcover/correlations.hpp"
#include "dvcover/error.hpp"
#include "dvcover/length_seq.hpp"
#include "dvcover/numerics.hpp"

namespace dvcover {

enum class MomentQuestion { point, circle };

inline const char* to_string(MomentQuestion q) { return q == MomentQuestion::point ? "point" : "circle"; }

inline constexpr int kDefaultQuadNodes = 16;
inline constexpr double kQuadRelTol = 1e-8;

struct MomentReport
{
    ModelSpec model;
    MomentQuestion question = MomentQuestion::point;
    std::int64_t n = 0;
    double EX = 1.0;
    double EX2 = 1.0;
    double lower_bound = 1.0;
    double log_ratio = 0.0; // log(EX2 / EX^2)
    int quad_nodes = 0;     // Gauss-Legendre nodes per panel (per axis) in the final rule
    double quad_error_estimate = 0.0;
    bool converged = true;
};

namespace detail {

inline void check_moment_model(const ModelSpec& m)
{
    if (m.kind == ModelKind::static_model) throw ValidationError("second moments need a dynamical model");
    if (m.kind == ModelKind::poisson && !(m.alpha >= 0.0)) throw ValidationError("alpha must be nonnegative");
}

/// Product of many factors near one, folded into a log every 32 terms.
class ProductLog
{
public:
    void mul(double f) noexcept
    {
        prod_ *= f;
        if (++pending_ == 32) flush();
    }
    void add_log(double v) noexcept { log_ += v; }
    double value() noexcept
    {
        flush();
        return log_;
    }

private:
    void flush() noexcept
    {
        log_ += std::log(prod_);
        prod_ = 1.0;
        pending_ = 0;
    }
    double prod_ = 1.0;
    double log_ = 0.0;
    int pending_ = 0;
};

/// rho_k(t) / (1 - l)^2 for the point question.
inline double point_factor(const ModelSpec& m, double ell, double t)
{
    const double q = 1.0 - ell;
    if (m.kind == ModelKind::poisson) return 1.0 + update_survival(ell, m.alpha, t) * ell / q;
    return 1.0 + (expected_overlap(ell, t) - ell * ell) / (q * q);
}

/// rho_k(t, x) / (1 - l)^2 for the circle question.
inline double circle_factor(const ModelSpec& m, double ell, double t, double x)
{
    const double q = 1.0 - ell;
    if (m.kind == ModelKind::poisson)
        return 1.0 + update_survival(ell, m.alpha, t) * (std::max(0.0, ell - x) - ell * ell) / (q * q);
    return 1.0 + (expected_shifted_overlap(ell, t, x) - ell * ell) / (q * q);
}

/// Length scale in t below which every factor is close to its t = 0 value.
inline double time_scale(const ModelSpec& m, double smallest_ell)
{
    return m.kind == ModelKind::poisson ? std::pow(smallest_ell, m.alpha) : smallest_ell * smallest_ell;
}

/// Panel edges 0 < ... < hi: halving from hi down to lo, then 0.
inline std::vector<double> geometric_edges(double hi, double lo)
{
    std::vector<double> e{hi};
    while (e.back() / 2.0 > lo) e.push_back(e.back() / 2.0);
    e.push_back(0.0);
    std::reverse(e.begin(), e.end());
    return e;
}

struct Node
{
    double x;
    double w;
};

inline std::vector<Node> composite_nodes(std::span<const double> edges, int m)
{
    const auto& rule = gauss_legendre(m);
    std::vector<Node> out;
    out.reserve((edges.size() - 1) * static_cast<std::size_t>(m));
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double a = edges[p], b = edges[p + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int i = 0; i < m; ++i) out.push_back(Node{mid + half * rule.nodes[i], half * rule.weights[i]});
    }
    return out;
}

/// Doubles the per-panel node count until two successive estimates agree
/// to kQuadRelTol. `estimate(m)` returns the integral with m nodes.
template <typename Estimate>
void refine(Estimate&& estimate, int m0, int m_max, double& value, double& error, int& nodes, bool& converged)
{
    int m = std::max(2, m0);
    double prev = estimate(m);
    for (;;) {
        const int m2 = 2 * m;
        if (m2 > m_max) {
            value = prev;
            nodes = m;
            converged = false;
            return;
        }
        const double cur = estimate(m2);
        error = std::abs(cur - prev);
        value = cur;
        nodes = m2;
        if (error <= kQuadRelTol * std::abs(cur)) {
            converged = true;
            return;
        }
        prev = cur;
        m = m2;
    }
}

inline MomentReport finish_report(const ModelSpec& model, MomentQuestion q, std::int64_t n, double log_u, double R,
                                  double R_err, int nodes, bool converged)
{
    MomentReport r;
    r.model = model;
    r.question = q;
    r.n = n;
    r.EX = std::exp(log_u);
    r.log_ratio = std::log(R);
    r.EX2 = std::exp(2.0 * log_u + r.log_ratio);
    r.lower_bound = 1.0 / R;
    r.quad_nodes = nodes;
    r.quad_error_estimate = std::exp(2.0 * log_u) * R_err;
    r.converged = converged;
    return r;
}

} // namespace detail

/// prod_k rho_k(t) / (1 - l_k)^2 at one time, for the point question.
inline double point_kernel(const ModelSpec& model, std::span<const double> lens, double t)
{
    detail::ProductLog pl;
    for (double l : lens) pl.mul(detail::point_factor(model, l, t));
    return std::exp(pl.value());
}

inline MomentReport second_moment_point(const ModelSpec& model, std::int64_t n, const LengthSequence& seq,
                                        int quad_nodes = kDefaultQuadNodes)
{
    detail::check_moment_model(model);
    if (n < 0) throw ValidationError("n must be nonnegative");
    if (quad_nodes < 2) throw ValidationError("quad_nodes must be at least 2");
    if (n == 0) return detail::finish_report(model, MomentQuestion::point, 0, 0.0, 1.0, 0.0, quad_nodes, true);

    const auto lens = lengths(seq, n);
    const auto stats = seq_stats(seq, n);
    const double smallest = *std::min_element(lens.begin(), lens.end());
    const auto edges = detail::geometric_edges(1.0, detail::time_scale(model, smallest) / 64.0);

    auto estimate = [&](int m) {
        KahanSum s;
        for (const auto& nd : detail::composite_nodes(edges, m))
            s.add(nd.w * 2.0 * (1.0 - nd.x) * point_kernel(model, lens, nd.x));
        return s.value();
    };
    double R = 0.0, err = 0.0;
    int nodes = 0;
    bool ok = false;
    detail::refine(estimate, quad_nodes, 1024, R, err, nodes, ok);
    return detail::finish_report(model, MomentQuestion::point, n, stats.log_u_n, R, err, nodes, ok);
}

/// E[X_n^2] for the space-time uncovered measure, by a tensor Gauss-Legendre
/// rule over x in [0, 1/2] (doubled by symmetry) and t in [0, 1].
inline MomentReport second_moment_circle(const ModelSpec& model, std::int64_t n, const LengthSequence& seq,
                                         int quad_nodes = kDefaultQuadNodes)
{
    detail::check_moment_model(model);
    if (n < 0) throw ValidationError("n must be nonnegative");
    if (quad_nodes < 2) throw ValidationError("quad_nodes must be at least 2");
    if (n == 0) return detail::finish_report(model, MomentQuestion::circle, 0, 0.0, 1.0, 0.0, quad_nodes, true);

    auto lens = lengths(seq, n);
    std::sort(lens.begin(), lens.end(), std::greater<>());
    const auto stats = seq_stats(seq, n);
    const double smallest = lens.back();
    const auto t_edges = detail::geometric_edges(1.0, detail::time_scale(model, smallest) / 64.0);

    // x edges: every distinct length (the factors have kinks there), and
    // halving below the smallest one.
    std::vector<double> x_edges = detail::geometric_edges(smallest, smallest / 64.0);
    for (double l : lens)
        if (l > smallest) x_edges.push_back(l);
    std::sort(x_edges.begin(), x_edges.end());
    x_edges.erase(std::unique(x_edges.begin(), x_edges.end()), x_edges.end());
    if (x_edges.back() < 0.5) x_edges.push_back(0.5);

    const bool poisson = model.kind == ModelKind::poisson;
    const std::size_t N = lens.size();

    // Poisson: the factor of arc k is a_k(t) - b_k(t) x for x < l_k and
    // a_k(t) - b_k(t) l_k beyond, so each t node needs one pass over the arcs.
    std::vector<double> rates(N);
    for (std::size_t k = 0; k < N; ++k) rates[k] = std::pow(lens[k], -model.alpha);

    auto estimate_poisson = [&](int m) {
        const auto tn = detail::composite_nodes(t_edges, m);
        const auto xn = detail::composite_nodes(x_edges, m);
        std::vector<std::size_t> active(xn.size());
        for (std::size_t i = 0; i < xn.size(); ++i)
            active[i] = static_cast<std::size_t>(
                std::upper_bound(lens.begin(), lens.end(), xn[i].x, std::greater<>()) - lens.begin());
        std::vector<KahanSum> inner(xn.size());
        std::vector<double> a(N), b(N), suffix(N + 1);
        for (const auto& tv : tn) {
            for (std::size_t k = 0; k < N; ++k) {
                const double q = 1.0 - lens[k];
                const double s = std::exp(-tv.x * rates[k]);
                b[k] = s / (q * q);
                a[k] = 1.0 + b[k] * (lens[k] - lens[k] * lens[k]);
            }
            suffix[N] = 0.0;
            for (std::size_t k = N; k-- > 0;) suffix[k] = suffix[k + 1] + std::log(1.0 - b[k] * lens[k] * lens[k]);
            const double wt = tv.w * 2.0 * (1.0 - tv.x);
            for (std::size_t i = 0; i < xn.size(); ++i) {
                detail::ProductLog pl;
                const double x = xn[i].x;
                for (std::size_t k = 0; k < active[i]; ++k) pl.mul(a[k] - b[k] * x);
                pl.add_log(suffix[active[i]]);
                inner[i].add(wt * std::exp(pl.value()));
            }
        }
        KahanSum total;
        for (std::size_t i = 0; i < xn.size(); ++i) total.add(2.0 * xn[i].w * inner[i].value());
        return total.value();
    };

    auto estimate_brownian = [&](int m) {
        const auto tn = detail::composite_nodes(t_edges, m);
        const auto xn = detail::composite_nodes(x_edges, m);
        KahanSum total;
        for (const auto& xv : xn) {
            KahanSum inner;
            for (const auto& tv : tn) {
                detail::ProductLog pl;
                for (std::size_t k = 0; k < N; ++k) pl.mul(detail::circle_factor(model, lens[k], tv.x, xv.x));
                inner.add(tv.w * 2.0 * (1.0 - tv.x) * std::exp(pl.value()));
            }
            total.add(2.0 * xv.w * inner.value());
        }
        return total.value();
    };
    auto estimate = [&](int m) { return poisson ? estimate_poisson(m) : estimate_brownian(m); };
    double R = 0.0, err = 0.0;
    int nodes = 0;
    bool ok = false;
    detail::refine(estimate, quad_nodes, 128, R, err, nodes, ok);
    return detail::finish_report(model, MomentQuestion::circle, n, stats.log_u_n, R, err, nodes, ok);
}

inline MomentReport second_moment(const ModelSpec& model, MomentQuestion q, std::int64_t n, const LengthSequence& seq,
                                  int quad_nodes = kDefaultQuadNodes)
{
    return q == MomentQuestion::point ? second_moment_point(model, n, seq, quad_nodes)
                                      : second_moment_circle(model, n, seq, quad_nodes);
}

inline constexpr double kProfileMargin = 0.15;

enum class ProfileVerdict { bounded, diverging, inconclusive };

inline const char* to_string(ProfileVerdict v)
{
    switch (v) {
    case ProfileVerdict::bounded: return "bounded";
    case ProfileVerdict::diverging: return "diverging";
    case ProfileVerdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct DivergenceProfile
{
    std::vector<MomentReport> rows;
    double slope = 0.0; // fitted slope of log(EX2 / u_n^2) against log n
    double margin = kProfileMargin;
    ProfileVerdict verdict = ProfileVerdict::inconclusive;
};

/// Tabulates the second-moment bound across n_list. The slope is fitted
/// over the upper half of n_list (at least two points): the ratio is
/// bounded when the slope stays within the margin of zero and diverging
/// when it exceeds the margin.
inline DivergenceProfile divergence_profile(const ModelSpec& model, MomentQuestion q, const LengthSequence& seq,
                                            std::span<const std::int64_t> n_list, int quad_nodes = kDefaultQuadNodes,
                                            double margin = kProfileMargin)
{
    if (n_list.size() < 2) throw ValidationError("n_list needs at least two entries");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] < 1) throw ValidationError("n_list entries must be positive");
        if (i > 0 && n_list[i] <= n_list[i - 1]) throw ValidationError("n_list must be increasing");
    }
    DivergenceProfile out;
    out.margin = margin;
    for (auto n : n_list) out.rows.push_back(second_moment(model, q, n, seq, quad_nodes));

    const std::size_t first = std::min(n_list.size() / 2, n_list.size() - 2);
    std::vector<double> lx, ly;
    for (std::size_t i = first; i < n_list.size(); ++i) {
        lx.push_back(std::log(static_cast<double>(n_list[i])));
        ly.push_back(out.rows[i].log_ratio);
    }
    out.slope = fit_line(lx, ly).slope;
    if (std::abs(out.slope) <= margin)
        out.verdict = ProfileVerdict::bounded;
    else if (out.slope > margin)
        out.verdict = ProfileVerdict::diverging;
    else
        out.verdict = ProfileVerdict::inconclusive;
    return out;
}

inline void write_profile_csv(std::ostream& os, const DivergenceProfile& p)
{
    os << "n,EX,EX2,lower_bound,slope_fit\n";
    for (const auto& r : p.rows)
        os << r.n << ',' << detail::format_double(r.EX) << ',' << detail::format_double(r.EX2) << ','
           << detail::format_double(r.lower_bound) << ',' << detail::format_double(p.slope) << '\n';
}

} // namespace dvcover
