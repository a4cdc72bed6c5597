#pragma once

// Arc-length sequences l_1 >= l_2 >= ... and their partial sums
// S_n = l_1 + ... + l_n and log u_n = sum log(1 - l_k).
//
// Every emitted length is capped at 1/2 (the cap is part of the
// descriptor and echoed in reports). Kinds with a log correction emit the
// cap until the closed-form expression is positive and decreasing.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dvcover/error.hpp"
#include "dvcover/numerics.hpp"

namespace dvcover {

enum class SeqKind { c_over_n, c_over_n_minus_log, c_over_n_minus_sqrtlog, power, explicit_list };

inline const char* to_string(SeqKind k)
{
    switch (k) {
    case SeqKind::c_over_n: return "c_over_n";
    case SeqKind::c_over_n_minus_log: return "c_over_n_minus_log";
    case SeqKind::c_over_n_minus_sqrtlog: return "c_over_n_minus_sqrtlog";
    case SeqKind::power: return "power";
    case SeqKind::explicit_list: return "explicit";
    }
    return "?";
}

class LengthSequence
{
public:
    static constexpr double kDefaultCap = 0.5;

    static LengthSequence c_over_n(double c) { return LengthSequence(SeqKind::c_over_n, c, 1.0, {}); }
    static LengthSequence c_over_n_minus_log(double c) { return LengthSequence(SeqKind::c_over_n_minus_log, c, 1.0, {}); }
    static LengthSequence c_over_n_minus_sqrtlog(double c)
    {
        return LengthSequence(SeqKind::c_over_n_minus_sqrtlog, c, 1.0, {});
    }
    static LengthSequence power(double c, double gamma) { return LengthSequence(SeqKind::power, c, gamma, {}); }
    static LengthSequence explicit_list(std::vector<double> values)
    {
        return LengthSequence(SeqKind::explicit_list, 0.0, 1.0, std::move(values));
    }

    /// Parse `kind,param=value,...`, e.g. `c_over_n,c=1.5`, `power,c=1,gamma=2`,
    /// `explicit,values=0.5:0.25:0.25`. An optional `cap=` sets the cap (<= 1/2).
    static LengthSequence parse(std::string_view text);

    /// Canonical descriptor text; parse(describe()) reproduces the sequence.
    std::string describe() const;

    SeqKind kind() const noexcept { return kind_; }
    double c() const noexcept { return c_; }
    double gamma() const noexcept { return gamma_; }
    double cap() const noexcept { return cap_; }
    const std::vector<double>& values() const noexcept { return values_; }

    /// True for kinds whose lengths are Theta(1/n) by construction.
    bool claims_theta_one_over_n() const noexcept
    {
        return kind_ == SeqKind::c_over_n || kind_ == SeqKind::c_over_n_minus_log ||
               kind_ == SeqKind::c_over_n_minus_sqrtlog || (kind_ == SeqKind::power && gamma_ == 1.0);
    }

    /// First index at which the closed form is used (earlier entries are the cap).
    std::int64_t formula_start() const noexcept { return formula_start_; }

    /// Longest horizon the sequence supports (explicit lists are finite).
    std::int64_t max_n() const noexcept
    {
        return kind_ == SeqKind::explicit_list ? static_cast<std::int64_t>(values_.size())
                                               : std::numeric_limits<std::int64_t>::max();
    }

    /// l_k for k >= 1.
    double at(std::int64_t k) const
    {
        if (k < 1) throw ValidationError("length index starts at 1");
        switch (kind_) {
        case SeqKind::explicit_list:
            if (k > static_cast<std::int64_t>(values_.size()))
                throw ValidationError("explicit length list is shorter than the requested horizon");
            return std::min(cap_, values_[static_cast<std::size_t>(k - 1)]);
        case SeqKind::c_over_n: return std::min(cap_, c_ / static_cast<double>(k));
        case SeqKind::power: return std::min(cap_, c_ / std::pow(static_cast<double>(k), gamma_));
        case SeqKind::c_over_n_minus_log: {
            if (k < formula_start_) return cap_;
            const double x = static_cast<double>(k);
            return std::min(cap_, c_ / x - 1.0 / (x * std::log(x)));
        }
        case SeqKind::c_over_n_minus_sqrtlog: {
            if (k < formula_start_) return cap_;
            const double x = static_cast<double>(k);
            return std::min(cap_, c_ / x - 1.0 / (x * std::sqrt(std::log(x))));
        }
        }
        return 0.0;
    }

    LengthSequence with_cap(double cap) const
    {
        LengthSequence s = *this;
        if (!(cap > 0.0 && cap <= 0.5)) throw ValidationError("cap must lie in (0, 1/2]");
        s.cap_ = cap;
        return s;
    }

private:
    LengthSequence(SeqKind kind, double c, double gamma, std::vector<double> values)
        : kind_(kind), c_(c), gamma_(gamma), values_(std::move(values))
    {
        validate();
        formula_start_ = compute_formula_start();
    }

    void validate() const
    {
        if (kind_ == SeqKind::explicit_list) {
            if (values_.empty()) throw ValidationError("explicit length list is empty");
            for (std::size_t i = 0; i < values_.size(); ++i) {
                if (!(values_[i] > 0.0) || !std::isfinite(values_[i]))
                    throw ValidationError("explicit lengths must be positive");
                if (i > 0 && values_[i] > values_[i - 1])
                    throw ValidationError("explicit lengths must be nonincreasing");
            }
            return;
        }
        if (!(c_ > 0.0) || !std::isfinite(c_)) throw ValidationError("sequence constant c must be positive");
        if (kind_ == SeqKind::power && (!(gamma_ > 0.0) || !std::isfinite(gamma_)))
            throw ValidationError("power exponent gamma must be positive");
    }

    // Smallest n >= 2 from which the log-corrected closed form is positive
    // and has a nonpositive derivative for all larger arguments.
    std::int64_t compute_formula_start() const
    {
        double log_threshold = 0.0;
        if (kind_ == SeqKind::c_over_n_minus_log) {
            // f'(x) has the sign of -c L^2 + L + 1 with L = log x.
            log_threshold = (1.0 + std::sqrt(1.0 + 4.0 * c_)) / (2.0 * c_);
        } else if (kind_ == SeqKind::c_over_n_minus_sqrtlog) {
            // f'(x) has the sign of -c + L^{-1/2} + L^{-3/2}/2, decreasing in L.
            auto h = [&](double L) { return -c_ + 1.0 / std::sqrt(L) + 0.5 / (L * std::sqrt(L)); };
            double lo = 1e-12, hi = 1.0;
            while (h(hi) > 0.0) hi *= 2.0;
            for (int i = 0; i < 200; ++i) {
                const double mid = 0.5 * (lo + hi);
                (h(mid) > 0.0 ? lo : hi) = mid;
            }
            log_threshold = hi;
        } else {
            return 1;
        }
        const double x = std::ceil(std::exp(log_threshold));
        return std::max<std::int64_t>(2, static_cast<std::int64_t>(x));
    }

    SeqKind kind_;
    double c_ = 0.0;
    double gamma_ = 1.0;
    std::vector<double> values_;
    double cap_ = kDefaultCap;
    std::int64_t formula_start_ = 1;
};

namespace detail {

inline double parse_double(std::string_view s, std::string_view what)
{
    // std::from_chars for double is available in libstdc++ 11.
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || s.empty())
        throw ValidationError("cannot parse " + std::string(what) + " value '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

inline std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace detail

inline LengthSequence LengthSequence::parse(std::string_view text)
{
    if (text.starts_with("kind:")) text.remove_prefix(5);
    const auto parts = detail::split(text, ',');
    const std::string_view kind = parts.front();

    std::map<std::string, std::string, std::less<>> params;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string_view::npos || eq == 0)
            throw ValidationError("sequence parameter '" + std::string(parts[i]) + "' is not name=value");
        const std::string name(parts[i].substr(0, eq));
        if (params.contains(name)) throw ValidationError("duplicate sequence parameter '" + name + "'");
        params.emplace(name, std::string(parts[i].substr(eq + 1)));
    }

    auto take = [&](std::string_view name) -> std::optional<double> {
        auto it = params.find(name);
        if (it == params.end()) return std::nullopt;
        const double v = detail::parse_double(it->second, name);
        params.erase(it);
        return v;
    };
    auto require = [&](std::string_view name) {
        auto v = take(name);
        if (!v) throw ValidationError("sequence kind '" + std::string(kind) + "' needs parameter " + std::string(name));
        return *v;
    };

    std::optional<LengthSequence> seq;
    if (kind == "c_over_n") {
        seq = c_over_n(require("c"));
    } else if (kind == "c_over_n_minus_log") {
        seq = c_over_n_minus_log(require("c"));
    } else if (kind == "c_over_n_minus_sqrtlog") {
        seq = c_over_n_minus_sqrtlog(require("c"));
    } else if (kind == "power") {
        const double c = require("c");
        seq = power(c, require("gamma"));
    } else if (kind == "explicit") {
        auto it = params.find("values");
        if (it == params.end()) throw ValidationError("explicit sequence needs values=v1:v2:...");
        std::vector<double> values;
        for (auto v : detail::split(it->second, ':')) values.push_back(detail::parse_double(v, "values"));
        params.erase(it);
        seq = explicit_list(std::move(values));
    } else {
        throw ValidationError("unknown sequence kind '" + std::string(kind) + "'");
    }

    if (auto cap = take("cap")) *seq = seq->with_cap(*cap);
    if (!params.empty()) throw ValidationError("unknown sequence parameter '" + params.begin()->first + "'");
    return *seq;
}

inline std::string LengthSequence::describe() const
{
    std::string out = to_string(kind_);
    if (kind_ == SeqKind::explicit_list) {
        out += ",values=";
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (i) out += ':';
            out += detail::format_double(values_[i]);
        }
    } else {
        out += ",c=" + detail::format_double(c_);
        if (kind_ == SeqKind::power) out += ",gamma=" + detail::format_double(gamma_);
    }
    out += ",cap=" + detail::format_double(cap_);
    return out;
}

/// (l_1, ..., l_n).
inline std::vector<double> lengths(const LengthSequence& seq, std::int64_t n)
{
    if (n < 1) throw ValidationError("horizon n must be at least 1");
    if (n > seq.max_n()) throw ValidationError("explicit length list is shorter than the requested horizon");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (std::int64_t k = 1; k <= n; ++k) out[static_cast<std::size_t>(k - 1)] = seq.at(k);
    return out;
}

struct SeqStats
{
    std::int64_t n = 0;
    double S_n = 0.0;     // l_1 + ... + l_n
    double log_u_n = 0.0; // sum log(1 - l_k)
    double u_n = 1.0;
};

/// Running accumulator of S_n and log u_n, in index order.
class SeqAccumulator
{
public:
    explicit SeqAccumulator(const LengthSequence& seq) : seq_(&seq) {}

    /// Advance by one index; returns the new l_n.
    double step()
    {
        ++n_;
        const double l = seq_->at(n_);
        sum_.add(l);
        log_u_.add(std::log1p(-l));
        return l;
    }

    std::int64_t n() const noexcept { return n_; }
    double S() const noexcept { return sum_.value(); }
    double log_u() const noexcept { return log_u_.value(); }

    SeqStats stats() const { return SeqStats{n_, S(), log_u(), std::exp(log_u())}; }

private:
    const LengthSequence* seq_;
    std::int64_t n_ = 0;
    KahanSum sum_;
    KahanSum log_u_;
};

inline SeqStats seq_stats(const LengthSequence& seq, std::int64_t n)
{
    if (n < 1) throw ValidationError("horizon n must be at least 1");
    if (n > seq.max_n()) throw ValidationError("explicit length list is shorter than the requested horizon");
    SeqAccumulator acc(seq);
    while (acc.n() < n) acc.step();
    return acc.stats();
}

struct ThetaBounds
{
    double M0_hat = 0.0; // min k l_k
    double M1_hat = 0.0; // max k l_k
    double tail_slope = 0.0; // d log(k l_k) / d log k over the last two octaves
    bool warning = false;
};

inline constexpr double kThetaFloor = 1e-3;
inline constexpr double kThetaSlopeTolerance = 0.05;

/// Finite-horizon estimates of the constants in M0/n <= l_n <= M1/n.
/// The warning fires when the minimum falls below 1e-3 or when k l_k still
/// drifts as a power of k across the last two octaves.
inline ThetaBounds theta_bounds(const LengthSequence& seq, std::int64_t n)
{
    if (n < 10) throw ValidationError("theta_bounds needs a horizon of at least 10");
    if (n > seq.max_n()) throw ValidationError("explicit length list is shorter than the requested horizon");
    ThetaBounds b;
    b.M0_hat = std::numeric_limits<double>::infinity();
    b.M1_hat = 0.0;
    for (std::int64_t k = 1; k <= n; ++k) {
        const double v = static_cast<double>(k) * seq.at(k);
        b.M0_hat = std::min(b.M0_hat, v);
        b.M1_hat = std::max(b.M1_hat, v);
    }
    const std::int64_t m = std::max<std::int64_t>(1, n / 4);
    const double km = static_cast<double>(m) * seq.at(m);
    const double kn = static_cast<double>(n) * seq.at(n);
    b.tail_slope = std::log(kn / km) / std::log(static_cast<double>(n) / static_cast<double>(m));
    b.warning = b.M0_hat < kThetaFloor || std::abs(b.tail_slope) > kThetaSlopeTolerance;
    return b;
}

} // namespace dvcover
