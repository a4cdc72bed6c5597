#pragma once

// Finite-horizon evaluators for the covering criteria: series of the form
// sum e^{S_n} / (n^{1+beta} (log n)^p), liminf-type clauses on n^k u_n,
// the beta_0 index, the exceptional-time threshold table and the
// Hausdorff-dimension formulas.
//
// A limit can never be decided from finitely many terms. Every tail
// quantity y(n) is therefore fitted as
//
//     y(n) ~ a + s log n + r log log n
//
// over checkpoints spread geometrically (four per octave) across
// [sqrt(N), N]. The power exponent s decides when |s| exceeds the margin;
// inside the margin the series verdict is "inconclusive". Clause
// evaluation for the threshold table additionally consults the
// logarithmic exponent r, which separates boundary sequences such as
// l_n = 2/n - 1/(n log n) from l_n = 2/n.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dvcover/error.hpp"
#include "dvcover/length_seq.hpp"
#include "dvcover/numerics.hpp"

namespace dvcover {

inline constexpr double kDefaultMargin = 0.05;
inline constexpr double kLogExponentMargin = 0.5;

enum class SeriesVerdict { converges, diverges, inconclusive };

inline const char* to_string(SeriesVerdict v)
{
    switch (v) {
    case SeriesVerdict::converges: return "converges";
    case SeriesVerdict::diverges: return "diverges";
    case SeriesVerdict::inconclusive: return "inconclusive";
    }
    return "?";
}

/// Checkpoints at which tails are sampled: round(2^{j/4}) for all j with
/// value in [lo, hi], deduplicated, with hi appended.
inline std::vector<std::int64_t> geometric_checkpoints(std::int64_t lo, std::int64_t hi)
{
    std::vector<std::int64_t> out;
    for (int j = 0;; ++j) {
        const auto v = static_cast<std::int64_t>(std::llround(std::pow(2.0, j / 4.0)));
        if (v > hi) break;
        if (v >= lo && (out.empty() || out.back() != v)) out.push_back(v);
    }
    if (out.empty() || out.back() != hi) out.push_back(hi);
    return out;
}

/// Powers of two up to N, then N.
inline std::vector<std::int64_t> dyadic_checkpoints(std::int64_t N)
{
    std::vector<std::int64_t> out;
    for (std::int64_t v = 1; v <= N; v *= 2) out.push_back(v);
    if (out.back() != N) out.push_back(N);
    return out;
}

struct TailFit
{
    double power_exponent = 0.0; // s
    double log_exponent = 0.0;   // r
    std::size_t points = 0;
};

/// Least-squares fit of y(n) against (log n, log log n).
inline TailFit fit_tail(const std::vector<std::int64_t>& ns, const std::vector<double>& ys)
{
    std::vector<double> x1, x2;
    x1.reserve(ns.size());
    x2.reserve(ns.size());
    for (auto n : ns) {
        const double L = std::log(static_cast<double>(n));
        x1.push_back(L);
        x2.push_back(std::log(L));
    }
    const auto b = fit_two_regressors(x1, x2, ys);
    return TailFit{b[1], b[2], ns.size()};
}

/// Verdict on sum n^{s-1} (log n)^r from the fitted exponents.
inline SeriesVerdict power_verdict(const TailFit& f, double margin)
{
    if (f.power_exponent < -margin) return SeriesVerdict::converges;
    if (f.power_exponent > margin) return SeriesVerdict::diverges;
    return SeriesVerdict::inconclusive;
}

inline SeriesVerdict refined_verdict(const TailFit& f, double margin)
{
    const auto v = power_verdict(f, margin);
    if (v != SeriesVerdict::inconclusive) return v;
    if (f.log_exponent < -1.0 - kLogExponentMargin) return SeriesVerdict::converges;
    if (f.log_exponent > -1.0 + kLogExponentMargin) return SeriesVerdict::diverges;
    return SeriesVerdict::inconclusive;
}

struct PartialSum
{
    std::int64_t n = 0;
    double log_value = 0.0; // log of the partial sum
    double value = 0.0;     // exp(log_value); may be +inf
};

struct SeriesDiagnostic
{
    double beta = 0.0;
    double log_power = 0.0;
    std::int64_t horizon = 0;
    double margin = kDefaultMargin;
    std::vector<PartialSum> partial_sums; // at dyadic checkpoints
    double growth_exponent_hat = 0.0;     // fitted power exponent of term * n
    double log_exponent_hat = 0.0;        // fitted log-power of term * n
    SeriesVerdict verdict = SeriesVerdict::inconclusive;         // from the power exponent alone
    SeriesVerdict refined = SeriesVerdict::inconclusive;         // also consults the log exponent
};

/// Diagnostic for sum_n e^{S_n} / (n^{1+beta} (log n)^{log_power}).
/// With log_power > 0 the series starts at n = 2.
inline SeriesDiagnostic series_diagnostic(const LengthSequence& seq, double beta, double log_power, std::int64_t N,
                                          double margin = kDefaultMargin)
{
    if (!(beta >= 0.0)) throw ValidationError("beta must be nonnegative");
    if (N < 100) throw ValidationError("series horizon must be at least 100");
    if (N > seq.max_n()) throw ValidationError("explicit length list is shorter than the requested horizon");

    SeriesDiagnostic d;
    d.beta = beta;
    d.log_power = log_power;
    d.horizon = N;
    d.margin = margin;

    const auto dyadic = dyadic_checkpoints(N);
    const auto fit_ns = geometric_checkpoints(static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(N)))), N);
    std::vector<double> fit_ys;
    fit_ys.reserve(fit_ns.size());

    SeqAccumulator acc(seq);
    LogSumExp partial;
    std::size_t next_dyadic = 0, next_fit = 0;
    while (acc.n() < N) {
        acc.step();
        const auto n = acc.n();
        const double logn = std::log(static_cast<double>(n));
        if (log_power == 0.0 || n >= 2) {
            const double log_term = acc.S() - (1.0 + beta) * logn - (log_power != 0.0 ? log_power * std::log(logn) : 0.0);
            partial.add_log(log_term);
            if (next_fit < fit_ns.size() && fit_ns[next_fit] == n) {
                fit_ys.push_back(log_term + logn);
                ++next_fit;
            }
        }
        if (next_dyadic < dyadic.size() && dyadic[next_dyadic] == n) {
            if (!partial.empty()) {
                const double lv = partial.log_value();
                d.partial_sums.push_back(PartialSum{n, lv, std::exp(lv)});
            }
            ++next_dyadic;
        }
    }

    const TailFit f = fit_tail(fit_ns, fit_ys);
    d.growth_exponent_hat = f.power_exponent;
    d.log_exponent_hat = f.log_exponent;
    d.verdict = power_verdict(f, margin);
    d.refined = refined_verdict(f, margin);
    return d;
}

/// Diagnostic for sum_n e^{S_n} / n^{1+beta}.
inline SeriesDiagnostic series_beta(const LengthSequence& seq, double beta, std::int64_t N, double margin = kDefaultMargin)
{
    return series_diagnostic(seq, beta, 0.0, N, margin);
}

struct Beta0Estimate
{
    double value = 0.0;     // fitted growth rate of S_n in log n, clamped at 0
    double log_coefficient = 0.0; // fitted coefficient of log log n in S_n
    double max_ratio = 0.0; // max of S_n / log n over dyadic checkpoints in [sqrt N, N]
};

/// Finite-horizon estimate of beta_0 = limsup S_n / log n.
///
/// The raw ratio S_n / log n converges only at rate 1/log n (the constant
/// part of S_n), so the reported value is the fitted coefficient of log n
/// in S_n ~ a + b log n + r log log n; the raw maximum is kept alongside.
inline Beta0Estimate beta0_estimate(const LengthSequence& seq, std::int64_t N)
{
    if (N < 1000) throw ValidationError("beta0 horizon must be at least 1000");
    if (N > seq.max_n()) throw ValidationError("explicit length list is shorter than the requested horizon");
    const auto lo = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(N))));
    const auto fit_ns = geometric_checkpoints(lo, N);
    const auto dyadic = dyadic_checkpoints(N);
    std::vector<double> ys;
    Beta0Estimate est;
    SeqAccumulator acc(seq);
    std::size_t next_fit = 0, next_dyadic = 0;
    while (acc.n() < N) {
        acc.step();
        const auto n = acc.n();
        if (next_fit < fit_ns.size() && fit_ns[next_fit] == n) {
            ys.push_back(acc.S());
            ++next_fit;
        }
        if (next_dyadic < dyadic.size() && dyadic[next_dyadic] == n) {
            if (n >= lo) est.max_ratio = std::max(est.max_ratio, acc.S() / std::log(static_cast<double>(n)));
            ++next_dyadic;
        }
    }
    const TailFit f = fit_tail(fit_ns, ys);
    est.value = std::max(0.0, f.power_exponent);
    est.log_coefficient = f.log_exponent;
    return est;
}

// ---------------------------------------------------------------------------
// Threshold table

enum class Question { typeI, typeII, typeIII };
enum class ModelKind { static_model, brownian, poisson };
enum class ThresholdResult { exceptional_times_exist, none_exist, inconclusive };

inline const char* to_string(Question q)
{
    switch (q) {
    case Question::typeI: return "typeI";
    case Question::typeII: return "typeII";
    case Question::typeIII: return "typeIII";
    }
    return "?";
}

inline const char* to_string(ModelKind m)
{
    switch (m) {
    case ModelKind::static_model: return "static";
    case ModelKind::brownian: return "brownian";
    case ModelKind::poisson: return "poisson";
    }
    return "?";
}

inline const char* to_string(ThresholdResult r)
{
    switch (r) {
    case ThresholdResult::exceptional_times_exist: return "exceptional_times_exist";
    case ThresholdResult::none_exist: return "none_exist";
    case ThresholdResult::inconclusive: return "inconclusive";
    }
    return "?";
}

struct ModelSpec
{
    ModelKind kind = ModelKind::static_model;
    double alpha = 0.0; // poisson only

    static ModelSpec static_model() { return {ModelKind::static_model, 0.0}; }
    static ModelSpec brownian() { return {ModelKind::brownian, 0.0}; }
    static ModelSpec poisson(double alpha)
    {
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("poisson alpha must be nonnegative");
        return {ModelKind::poisson, alpha};
    }
};

/// Outcome of one existence or nonexistence clause, with the fit behind it.
struct ClauseReport
{
    std::string statement;
    bool fires = false;
    TailFit fit;
    double min_value = 0.0; // liminf clauses: min of the sequence over checkpoints
    SeriesVerdict series = SeriesVerdict::inconclusive; // series clauses
};

struct ThresholdVerdict
{
    Question question = Question::typeI;
    ModelSpec model;
    ThresholdResult result = ThresholdResult::inconclusive;
    std::string basis;
    std::vector<ClauseReport> clauses;
};

/// Bounded-and-not-growing test for liminf_n n^kappa (log n)^log_power u_n < infinity.
inline ClauseReport liminf_clause(const LengthSequence& seq, double kappa, double log_power, std::int64_t N,
                                  double margin, std::string statement)
{
    const auto lo = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(N))));
    const auto fit_ns = geometric_checkpoints(lo, N);
    std::vector<double> ys;
    double min_log = std::numeric_limits<double>::infinity();
    SeqAccumulator acc(seq);
    std::size_t next = 0;
    while (acc.n() < N) {
        acc.step();
        const auto n = acc.n();
        if (next < fit_ns.size() && fit_ns[next] == n) {
            const double L = std::log(static_cast<double>(n));
            const double y = kappa * L + (log_power != 0.0 ? log_power * std::log(L) : 0.0) + acc.log_u();
            ys.push_back(y);
            min_log = std::min(min_log, y);
            ++next;
        }
    }
    ClauseReport c;
    c.statement = std::move(statement);
    c.fit = fit_tail(fit_ns, ys);
    c.min_value = std::exp(min_log);
    c.fires = c.fit.power_exponent < -margin ||
              (std::abs(c.fit.power_exponent) <= margin && c.fit.log_exponent < kLogExponentMargin);
    return c;
}

inline ClauseReport series_clause(const LengthSequence& seq, double beta, double log_power, std::int64_t N,
                                  double margin, std::string statement)
{
    const auto d = series_diagnostic(seq, beta, log_power, N, margin);
    ClauseReport c;
    c.statement = std::move(statement);
    c.fit = TailFit{d.growth_exponent_hat, d.log_exponent_hat, 0};
    c.series = d.refined;
    c.fires = d.refined == SeriesVerdict::converges;
    return c;
}

/// Convergence of sum_n f(l_n) judged from the fitted tail of n f(l_n).
inline SeriesVerdict length_power_series(const LengthSequence& seq, double exponent, std::int64_t N, double margin,
                                         TailFit* fit_out = nullptr)
{
    const auto lo = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(N))));
    const auto fit_ns = geometric_checkpoints(lo, N);
    std::vector<double> ys;
    for (auto n : fit_ns) ys.push_back(exponent * std::log(seq.at(n)) + std::log(static_cast<double>(n)));
    const auto f = fit_tail(fit_ns, ys);
    if (fit_out) *fit_out = f;
    return refined_verdict(f, margin);
}

/// Apply the clause pair for this model and question at horizon N.
///
/// Throws Refusal(precondition_failed) when the standing
/// hypothesis does not hold numerically: Theta(1/n) lengths for types I/II,
/// a summable length sequence for type III.
inline ThresholdVerdict threshold_verdict(Question question, ModelSpec model, const LengthSequence& seq,
                                          std::int64_t N, double margin = kDefaultMargin)
{
    if (N < 1000) throw ValidationError("threshold horizon must be at least 1000");
    if (N > seq.max_n()) throw ValidationError("explicit length list is shorter than the requested horizon");

    ThresholdVerdict v;
    v.question = question;
    v.model = model;

    auto decide_pair = [&](ClauseReport nonexistence, ClauseReport existence, const std::string& label) {
        const bool none = nonexistence.fires, exist = existence.fires;
        if (none && !exist) {
            v.result = ThresholdResult::none_exist;
            v.basis = label + ": " + nonexistence.statement;
        } else if (exist && !none) {
            v.result = ThresholdResult::exceptional_times_exist;
            v.basis = label + ": " + existence.statement;
        } else if (exist && none) {
            v.result = ThresholdResult::inconclusive;
            v.basis = label + ": both clauses fired at this horizon (contradictory fits)";
        } else {
            v.result = ThresholdResult::inconclusive;
            v.basis = label + ": neither clause holds (intermediate case)";
        }
        v.clauses.push_back(std::move(nonexistence));
        v.clauses.push_back(std::move(existence));
    };

    if (question == Question::typeIII) {
        TailFit fit;
        const auto sum_l = length_power_series(seq, 1.0, N, margin, &fit);
        if (sum_l != SeriesVerdict::converges)
            throw Refusal(Refusal::Reason::precondition_failed,
                          "type III questions need sum l_n < infinity; the tail fit does not show convergence");
        ClauseReport pre{"sum l_n < infinity", true, fit, 0.0, sum_l};
        v.clauses.push_back(pre);
        switch (model.kind) {
        case ModelKind::static_model:
            v.result = ThresholdResult::none_exist;
            v.basis = "Borel-Cantelli: a fixed point is covered finitely often when sum l_n < infinity";
            return v;
        case ModelKind::brownian:
            v.result = ThresholdResult::exceptional_times_exist;
            v.basis = "Brownian model, type III: exceptional times exist for every summable sequence";
            return v;
        case ModelKind::poisson: {
            TailFit f;
            const auto s = length_power_series(seq, 1.0 - model.alpha, N, margin, &f);
            ClauseReport c{"sum l_n^{1-alpha}", s != SeriesVerdict::inconclusive, f, 0.0, s};
            v.clauses.push_back(c);
            if (s == SeriesVerdict::converges) {
                v.result = ThresholdResult::none_exist;
                v.basis = "Poisson model, type III: sum l_n^{1-alpha} < infinity";
            } else if (s == SeriesVerdict::diverges) {
                v.result = ThresholdResult::exceptional_times_exist;
                v.basis = "Poisson model, type III: sum l_n^{1-alpha} = infinity";
            } else {
                v.result = ThresholdResult::inconclusive;
                v.basis = "Poisson model, type III: sum l_n^{1-alpha} undecided at this horizon";
            }
            return v;
        }
        }
    }

    // Types I and II.
    if (model.kind != ModelKind::static_model) {
        const auto tb = theta_bounds(seq, std::min<std::int64_t>(N, 1 << 20));
        if (tb.warning)
            throw Refusal(Refusal::Reason::precondition_failed,
                          "lengths are not Theta(1/n) over the horizon (M0_hat=" + detail::format_double(tb.M0_hat) +
                              ", tail slope=" + detail::format_double(tb.tail_slope) + ")");
    }

    switch (model.kind) {
    case ModelKind::static_model: {
        if (question == Question::typeI) {
            TailFit f;
            const auto s = length_power_series(seq, 1.0, N, margin, &f);
            v.clauses.push_back(ClauseReport{"sum l_n", s != SeriesVerdict::inconclusive, f, 0.0, s});
            v.result = s == SeriesVerdict::diverges    ? ThresholdResult::none_exist
                       : s == SeriesVerdict::converges ? ThresholdResult::exceptional_times_exist
                                                       : ThresholdResult::inconclusive;
            v.basis = "Borel-Cantelli: a fixed point is covered infinitely often iff sum l_n = infinity";
            return v;
        }
        auto c = series_clause(seq, 1.0, 0.0, N, margin, "sum e^{S_n}/n^2 < infinity");
        v.result = c.series == SeriesVerdict::converges  ? ThresholdResult::exceptional_times_exist
                   : c.series == SeriesVerdict::diverges ? ThresholdResult::none_exist
                                                         : ThresholdResult::inconclusive;
        v.basis = "static covering: the circle is covered a.s. iff sum e^{S_n}/n^2 = infinity";
        v.clauses.push_back(std::move(c));
        return v;
    }
    case ModelKind::brownian:
        if (question == Question::typeI) {
            decide_pair(liminf_clause(seq, 2.0, 0.0, N, margin, "liminf n^2 u_n < infinity"),
                        series_clause(seq, 2.0, 0.0, N, margin, "sum e^{S_n}/n^3 < infinity"),
                        "Brownian type I");
        } else {
            decide_pair(liminf_clause(seq, 3.0, 0.0, N, margin, "liminf n^3 u_n < infinity"),
                        series_clause(seq, 3.0, 0.0, N, margin, "sum e^{S_n}/n^4 < infinity"),
                        "Brownian type II");
        }
        return v;
    case ModelKind::poisson: {
        const double a = model.alpha;
        if (question == Question::typeI) {
            if (a == 0.0) {
                v.result = ThresholdResult::none_exist;
                v.basis = "Poisson alpha = 0, type I: each arc stays put over [0,1] with probability >= 1/e";
                return v;
            }
            auto c = series_clause(seq, a, 0.0, N, margin, "sum e^{S_n}/n^{1+alpha} < infinity");
            v.result = c.series == SeriesVerdict::converges  ? ThresholdResult::exceptional_times_exist
                       : c.series == SeriesVerdict::diverges ? ThresholdResult::none_exist
                                                             : ThresholdResult::inconclusive;
            v.basis = "Poisson type I: exceptional times exist iff sum e^{S_n}/n^{1+alpha} < infinity";
            v.clauses.push_back(std::move(c));
            return v;
        }
        if (a == 0.0) {
            decide_pair(liminf_clause(seq, 1.0, 1.0, N, margin, "liminf n (log n) u_n < infinity"),
                        series_clause(seq, 1.0, 1.0, N, margin, "sum e^{S_n}/(n^2 log n) < infinity"),
                        "Poisson alpha = 0 type II");
        } else {
            decide_pair(liminf_clause(seq, 1.0 + a, 0.0, N, margin, "liminf n^{1+alpha} u_n < infinity"),
                        series_clause(seq, 1.0 + a, 0.0, N, margin, "sum e^{S_n}/n^{2+alpha} < infinity"),
                        "Poisson type II");
        }
        return v;
    }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Hausdorff dimension formulas

enum class HdKind {
    typeI_brownian,            // {t : x in F_t}
    typeI_poisson,             // {t : x in F_t}
    spacetime_brownian,        // {(t, x) : x in F_t}
    space_projection_brownian, // {x : exists t, x in F_t}
    time_projection_brownian,  // {t : F_t nonempty}
    spacetime_poisson,
    space_projection_poisson,
    time_projection_poisson,
};

inline const char* to_string(HdKind k)
{
    switch (k) {
    case HdKind::typeI_brownian: return "typeI_brownian";
    case HdKind::typeI_poisson: return "typeI_poisson";
    case HdKind::spacetime_brownian: return "spacetime_brownian";
    case HdKind::space_projection_brownian: return "space_projection_brownian";
    case HdKind::time_projection_brownian: return "time_projection_brownian";
    case HdKind::spacetime_poisson: return "spacetime_poisson";
    case HdKind::space_projection_poisson: return "space_projection_poisson";
    case HdKind::time_projection_poisson: return "time_projection_poisson";
    }
    return "?";
}

inline bool is_poisson(HdKind k)
{
    return k == HdKind::typeI_poisson || k == HdKind::spacetime_poisson || k == HdKind::space_projection_poisson ||
           k == HdKind::time_projection_poisson;
}

enum class BoundType { exact, upper };

struct HdValue
{
    BoundType bound = BoundType::exact;
    double value = 0.0;
};

/// Dimension of the exceptional set as a function of beta_0 (and alpha
/// for the Poisson model). Values are clamped below at 0. Where only an
/// inequality is known the result is tagged as an upper bound.
inline HdValue hd_formula(HdKind kind, double beta0, std::optional<double> alpha = std::nullopt)
{
    if (!(beta0 >= 0.0)) throw ValidationError("beta0 must be nonnegative");
    const double b = beta0;
    auto exact = [](double v) { return HdValue{BoundType::exact, std::max(0.0, v)}; };
    auto upper = [](double v) { return HdValue{BoundType::upper, std::max(0.0, v)}; };

    double a = 0.0;
    if (is_poisson(kind)) {
        if (!alpha) throw ValidationError("alpha is required for Poisson dimension formulas");
        a = *alpha;
        if (a == 0.0 && kind == HdKind::spacetime_poisson) {
            // alpha = 0: only the bound HD <= 1 is available while exceptional times exist.
            return b <= 1.0 ? upper(1.0) : exact(0.0);
        }
        if (!(a > 0.0)) throw ValidationError("alpha must be positive for this dimension formula");
    }

    switch (kind) {
    case HdKind::typeI_brownian: return exact(1.0 - b / 2.0);
    case HdKind::typeI_poisson: return exact(1.0 - b / a);
    case HdKind::spacetime_brownian:
        if (b <= 2.0) return exact(2.0 - b / 2.0);
        if (b <= 3.0) return exact(3.0 - b);
        return exact(0.0);
    case HdKind::space_projection_brownian:
        if (b < 2.0) return exact(1.0);
        if (b <= 3.0) return upper(3.0 - b);
        return exact(0.0);
    case HdKind::time_projection_brownian:
        if (b < 1.0) return exact(1.0);
        if (b <= 3.0) return upper((3.0 - b) / 2.0);
        return exact(0.0);
    case HdKind::spacetime_poisson:
        if (a >= 1.0) {
            if (b <= a) return exact(2.0 - b / a);
            if (b <= 1.0 + a) return exact(1.0 + a - b);
            return exact(0.0);
        }
        if (b <= 1.0) return exact(2.0 - b);
        if (b <= 1.0 + a) return exact((1.0 + a - b) / a);
        return exact(0.0);
    case HdKind::space_projection_poisson:
        if (b < a) return exact(1.0);
        if (b <= 1.0 + a) return upper(1.0 + a - b);
        return exact(0.0);
    case HdKind::time_projection_poisson:
        if (b < 1.0) return exact(1.0);
        if (b <= 1.0 + a) return upper((1.0 + a - b) / a);
        return exact(0.0);
    }
    return exact(0.0);
}

// ---------------------------------------------------------------------------
// Integral / series co-convergence

struct Lemma21Diagnostic
{
    double beta = 0.0;
    double b = 0.0;
    std::int64_t horizon = 0;
    std::vector<PartialSum> integral_partials; // integral from l_n^beta to b, at dyadic n
    std::vector<PartialSum> series_partials;
    TailFit integral_fit;
    SeriesVerdict integral_verdict = SeriesVerdict::inconclusive;
    SeriesVerdict series_verdict = SeriesVerdict::inconclusive;
    bool agree = false;
};

/// Compare int_0^b exp(sum_{n : l_n^beta >= t} l_n) dt with
/// sum e^{S_n}/n^{1+beta}. The integrand is e^{S_k} on (l_{k+1}^beta, l_k^beta],
/// so the integral is accumulated exactly piece by piece down to l_N^beta.
inline Lemma21Diagnostic lemma21_diagnostic(const LengthSequence& seq, double beta, double b, std::int64_t N,
                                            double margin = kDefaultMargin)
{
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    if (!(b > 0.0 && b <= 1.0)) throw ValidationError("b must lie in (0, 1]");
    if (N < 100) throw ValidationError("horizon must be at least 100");
    if (N + 1 > seq.max_n()) throw ValidationError("explicit length list is shorter than the requested horizon");

    Lemma21Diagnostic d;
    d.beta = beta;
    d.b = b;
    d.horizon = N;

    const auto dyadic = dyadic_checkpoints(N);
    const auto fit_ns = geometric_checkpoints(static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(N)))), N);
    std::vector<double> fit_ys;

    LogSumExp integral;
    // Above l_1^beta the index set is empty and the integrand is 1.
    const double top = std::pow(seq.at(1), beta);
    if (b > top) integral.add_log(std::log(b - top));

    SeqAccumulator acc(seq);
    std::size_t next_dyadic = 0, next_fit = 0;
    double upper = std::pow(seq.at(1), beta);
    while (acc.n() < N) {
        acc.step();
        const auto k = acc.n();
        // Piece (l_{k+1}^beta, l_k^beta] carries e^{S_k}; clip to (.., b].
        const double lower = std::pow(seq.at(k + 1), beta);
        const double hi = std::min(upper, b);
        const double width = hi - lower;
        double log_piece = -std::numeric_limits<double>::infinity();
        if (width > 0.0) {
            log_piece = acc.S() + std::log(width);
            integral.add_log(log_piece);
        }
        if (next_fit < fit_ns.size() && fit_ns[next_fit] == k) {
            fit_ys.push_back(log_piece + std::log(static_cast<double>(k)));
            ++next_fit;
        }
        if (next_dyadic < dyadic.size() && dyadic[next_dyadic] == k) {
            if (!integral.empty()) {
                const double lv = integral.log_value();
                d.integral_partials.push_back(PartialSum{k, lv, std::exp(lv)});
            }
            ++next_dyadic;
        }
        upper = lower;
    }

    d.integral_fit = fit_tail(fit_ns, fit_ys);
    d.integral_verdict = power_verdict(d.integral_fit, margin);
    const auto s = series_beta(seq, beta, N, margin);
    d.series_partials = s.partial_sums;
    d.series_verdict = s.verdict;
    d.agree = d.integral_verdict == d.series_verdict;
    return d;
}

} // namespace dvcover
