#pragma once

// Small numerical toolkit shared by the analytic and simulation modules:
// compensated and log-space accumulation, normal distribution functions,
// Gauss-Legendre rules, least-squares fits and the Kolmogorov-Smirnov test.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace dvcover {

/// Neumaier-compensated running sum.
class KahanSum
{
public:
    KahanSum() = default;
    explicit KahanSum(double v) : sum_(v) {}

    void add(double v) noexcept
    {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }

    KahanSum& operator+=(double v) noexcept
    {
        add(v);
        return *this;
    }

    void merge(const KahanSum& other) noexcept
    {
        add(other.sum_);
        add(other.comp_);
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Sum of exp(x_i) kept as log(scale) + log(compensated sum).
/// The scale is raised only when a term would otherwise overflow the
/// scaled accumulator, so most additions are plain compensated adds.
class LogSumExp
{
public:
    void add_log(double log_term) noexcept
    {
        if (log_term == -std::numeric_limits<double>::infinity()) return;
        if (empty_) {
            scale_ = log_term;
            empty_ = false;
        } else if (log_term > scale_ + 300.0) {
            const double shrink = std::exp(scale_ - log_term);
            KahanSum rescaled;
            rescaled.add(sum_.value() * shrink);
            sum_ = rescaled;
            scale_ = log_term;
        }
        sum_.add(std::exp(log_term - scale_));
    }

    double log_value() const noexcept
    {
        if (empty_) return -std::numeric_limits<double>::infinity();
        return scale_ + std::log(sum_.value());
    }

    bool empty() const noexcept { return empty_; }

private:
    bool empty_ = true;
    double scale_ = 0.0;
    KahanSum sum_;
};

// ---------------------------------------------------------------------------
// Normal distribution

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794; // 1/sqrt(2 pi)

/// Standard normal CDF through erfc; relative accuracy is that of the
/// platform erfc (a few ulp) in both tails.
inline double normal_cdf(double z) noexcept
{
    return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0);
}

inline double normal_pdf(double z) noexcept
{
    return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

/// P(a < Z < b) for a standard normal Z, evaluated in whichever tail
/// avoids cancellation.
inline double normal_interval(double a, double b) noexcept
{
    if (b <= a) return 0.0;
    if (a >= 0.0) return normal_cdf(-a) - normal_cdf(-b);
    if (b <= 0.0) return normal_cdf(b) - normal_cdf(a);
    return 1.0 - normal_cdf(a) - normal_cdf(-b);
}

// ---------------------------------------------------------------------------
// Gauss-Legendre

struct GaussRule
{
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights;
};

inline GaussRule compute_gauss_legendre(int m)
{
    if (m < 1) throw std::invalid_argument("gauss-legendre rule needs at least one node");
    GaussRule rule;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    const int half = (m + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= m; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            dp = m * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // Recompute the derivative at the converged root.
        double p1 = 1.0, p2 = 0.0;
        for (int j = 1; j <= m; ++j) {
            const double p3 = p2;
            p2 = p1;
            p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
        }
        dp = m * (z * p1 - p2) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = -z;
        rule.nodes[m - 1 - i] = z;
        rule.weights[i] = w;
        rule.weights[m - 1 - i] = w;
    }
    if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
    return rule;
}

/// Cached rule; the returned reference stays valid for the program lifetime.
inline const GaussRule& gauss_legendre(int m)
{
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(m);
    if (it == cache.end()) it = cache.emplace(m, compute_gauss_legendre(m)).first;
    return it->second;
}

/// Adaptive Simpson quadrature. Slow but independent of the Gauss-Legendre
/// machinery; used as an oracle.
template <typename F>
double adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 50)
{
    struct Impl
    {
        F& f;
        double rec(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth)
        {
            const double m = 0.5 * (a + b);
            const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            const double flm = f(lm), frm = f(rm);
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            const double delta = left + right - whole;
            if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
            return rec(a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
        }
    };
    Impl impl{f};
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return impl.rec(a, b, fa, fm, fb, whole, tol, max_depth);
}

// ---------------------------------------------------------------------------
// Regression

struct LineFit
{
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    std::size_t points = 0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y)
{
    assert(x.size() == y.size());
    LineFit fit;
    fit.points = x.size();
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2) {
        if (!y.empty()) fit.intercept = y[0];
        return fit;
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) {
        fit.intercept = my;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return fit;
}

/// Least squares for y ~ b0 + b1 x1 + b2 x2 via normal equations (3x3,
/// solved with partial pivoting on centred data).
inline std::array<double, 3> fit_two_regressors(std::span<const double> x1, std::span<const double> x2,
                                                std::span<const double> y)
{
    const std::size_t n = y.size();
    assert(x1.size() == n && x2.size() == n);
    if (n < 3) throw std::invalid_argument("two-regressor fit needs at least three points");
    double m1 = 0, m2 = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        m1 += x1[i];
        m2 += x2[i];
        my += y[i];
    }
    m1 /= n;
    m2 /= n;
    my /= n;
    double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d1 = x1[i] - m1, d2 = x2[i] - m2, dy = y[i] - my;
        a11 += d1 * d1;
        a12 += d1 * d2;
        a22 += d2 * d2;
        b1 += d1 * dy;
        b2 += d2 * dy;
    }
    const double det = a11 * a22 - a12 * a12;
    if (!(std::abs(det) > 0.0)) throw std::runtime_error("two-regressor fit is singular");
    const double c1 = (b1 * a22 - b2 * a12) / det;
    const double c2 = (a11 * b2 - a12 * b1) / det;
    return {my - c1 * m1 - c2 * m2, c1, c2};
}

/// Two-sided 97.5% Student-t quantile.
inline double student_t_975(std::size_t dof)
{
    static constexpr std::array<double, 30> table{12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                                  2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                                  2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                                  2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
    if (dof == 0) return std::numeric_limits<double>::infinity();
    if (dof <= table.size()) return table[dof - 1];
    return 1.96;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// P(K > x) for the Kolmogorov distribution.
inline double kolmogorov_sf(double x)
{
    if (x <= 0.0) return 1.0;
    if (x < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult
{
    double statistic = 0.0; // sup |F_n - F|
    double p_value = 1.0;   // asymptotic, with the Stephens small-sample correction
    std::size_t n = 0;
};

/// One-sample KS test of `sample` against Uniform[0, 1). Sorts a copy.
inline KsResult ks_uniform(std::vector<double> sample)
{
    KsResult r;
    r.n = sample.size();
    if (sample.empty()) return r;
    std::sort(sample.begin(), sample.end());
    const auto n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = std::clamp(sample[i], 0.0, 1.0);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    r.statistic = d;
    const double sn = std::sqrt(n);
    r.p_value = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
    return r;
}

/// Two-sample KS test.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b)
{
    KsResult r;
    if (a.empty() || b.empty()) return r;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    r.statistic = d;
    r.n = a.size() + b.size();
    const double ne = std::sqrt(na * nb / (na + nb));
    r.p_value = kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
    return r;
}

/// Sample mean and standard error of the mean.
struct MeanSe
{
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se_from_sums(double sum, double sum_sq, double count)
{
    MeanSe r;
    if (count <= 0) return r;
    r.mean = sum / count;
    if (count > 1) {
        const double var = std::max(0.0, (sum_sq - count * r.mean * r.mean) / (count - 1.0));
        r.se = std::sqrt(var / count);
    }
    return r;
}

} // namespace dvcover
