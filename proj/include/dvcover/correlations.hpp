#pragma once

// Pairwise non-coverage correlations rho_k = P(arc k misses x at time 0
// and misses y at time t), for the Brownian and Poisson-updating models.

#include <algorithm>
#include <cmath>
#include <limits>

#include "dvcover/error.hpp"
#include "dvcover/numerics.hpp"

namespace dvcover {

/// Normal(0, variance) reduced modulo 1.
class WrappedNormal
{
public:
    explicit WrappedNormal(double variance) : variance_(variance), sigma_(std::sqrt(variance))
    {
        if (!(variance > 0.0) || !std::isfinite(variance)) throw ValidationError("wrapped normal variance must be positive");
        truncation_K_ = truncation_for(variance);
    }

    /// Number of integer images summed on each side.
    static int truncation_for(double variance)
    {
        return std::max(1, static_cast<int>(std::ceil(8.0 * std::sqrt(variance))) + 1);
    }

    double variance() const noexcept { return variance_; }
    double sigma() const noexcept { return sigma_; }
    int truncation_K() const noexcept { return truncation_K_; }

    double pdf(double z) const noexcept
    {
        double s = 0.0;
        for (int m = -truncation_K_; m <= truncation_K_; ++m) s += normal_pdf((z + m) / sigma_);
        return s / sigma_;
    }

    /// P(Z in (a, b) mod 1) for b - a <= 1.
    double mass(double a, double b) const noexcept
    {
        double s = 0.0;
        for (int m = -truncation_K_; m <= truncation_K_; ++m) s += normal_interval((a + m) / sigma_, (b + m) / sigma_);
        return s;
    }

private:
    double variance_;
    double sigma_;
    int truncation_K_ = 1;
};

namespace detail {

// E[(l - |W|)^+] for W ~ N(-a, sigma^2) on the real line, split into the
// halves w < 0 and w > 0 of the tent.
inline double tent_expectation(double ell, double a, double sigma) noexcept
{
    const double z0 = a / sigma, zl = (a - ell) / sigma, zr = (a + ell) / sigma;
    const double left = (ell - a) * normal_interval(zl, z0) + sigma * (normal_pdf(zl) - normal_pdf(z0));
    const double right = (ell + a) * normal_interval(z0, zr) + sigma * (normal_pdf(zr) - normal_pdf(z0));
    return left + right;
}

inline void check_ell(double ell)
{
    if (!(ell > 0.0 && ell <= 0.5)) throw ValidationError("ell must lie in (0, 1/2]");
}

inline void check_t(double t)
{
    if (!(t >= 0.0) || std::isnan(t)) throw ValidationError("t must be nonnegative");
}

} // namespace detail

/// E[(l - |Z_t - x|)^+] with Z_t wrapped normal of variance t and |.| the
/// circular distance.
inline double expected_shifted_overlap(double ell, double t, double x)
{
    detail::check_ell(ell);
    detail::check_t(t);
    x = std::abs(x - std::round(x));
    if (t == 0.0) return std::max(0.0, ell - x);
    const double sigma = std::sqrt(t);
    const int K = WrappedNormal::truncation_for(t);
    double s = 0.0;
    for (int m = -K; m <= K; ++m) s += detail::tent_expectation(ell, x + m, sigma);
    return std::clamp(s, 0.0, ell);
}

inline double expected_overlap(double ell, double t) { return expected_shifted_overlap(ell, t, 0.0); }

inline double pair_corr_brownian_point(double ell, double t) { return 1.0 - 2.0 * ell + expected_overlap(ell, t); }

inline double pair_corr_brownian_spacetime(double ell, double t, double x)
{
    return 1.0 - 2.0 * ell + expected_shifted_overlap(ell, t, x);
}

/// Probability that an arc of length l with update rate l^{-alpha} has been
/// re-drawn at least once during [0, t] is 1 - update_survival.
inline double update_survival(double ell, double alpha, double t)
{
    detail::check_ell(ell);
    detail::check_t(t);
    if (!(alpha >= 0.0)) throw ValidationError("alpha must be nonnegative");
    if (std::isinf(t)) return 0.0;
    return std::exp(-t * std::pow(ell, -alpha));
}

inline double pair_corr_poisson_point(double ell, double alpha, double t)
{
    const double e = update_survival(ell, alpha, t);
    const double q = 1.0 - ell;
    return q * q * (1.0 - e) + q * e;
}

inline double pair_corr_poisson_spacetime(double ell, double alpha, double t, double x)
{
    const double e = update_survival(ell, alpha, t);
    const double q = 1.0 - ell;
    x = std::abs(x - std::round(x));
    return (1.0 - e) * q * q + e * (1.0 - 2.0 * ell + std::max(0.0, ell - x));
}

} // namespace dvcover
