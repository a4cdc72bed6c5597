#pragma once

// Experiment configuration, validation, dispatch and JSON reports.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvcover/brownian_sim.hpp"
#include "dvcover/conditions.hpp"
#include "dvcover/correlations.hpp"
#include "dvcover/dimension.hpp"
#include "dvcover/error.hpp"
#include "dvcover/length_seq.hpp"
#include "dvcover/moments.hpp"
#include "dvcover/parallel.hpp"
#include "dvcover/poisson_sim.hpp"
#include "dvcover/rng.hpp"

namespace dvcover {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr const char* kReportSchema = "report_v1";

using json = nlohmann::json;

struct ExperimentConfig
{
    std::string command;
    std::string model = "poisson";
    double alpha = 1.0;
    std::string seq = "c_over_n,c=1";
    std::string question; // command dependent; filled by resolve_defaults
    double horizon = 1e6;
    double ell = 0.1;
    double t = 0.05;
    double x = 0.0;
    std::int64_t reps = 1000;
    std::uint64_t seed = 1;
    std::int64_t n = 100;
    std::vector<std::int64_t> n_list;
    double dt = kDefaultGridDt;
    int quad_nodes = kDefaultQuadNodes;
    std::vector<double> deltas;
    int threads = default_threads();
    std::string method = "chain";
    double beta = 1.0;
    double b = 0.5;
    double budget = kDefaultEventBudget;
    double margin = kDefaultMargin;
    std::string out;
    std::string csv;
};

inline const std::set<std::string>& command_names()
{
    static const std::set<std::string> names{"conditions", "correlation", "simulate-point", "simulate-circle",
                                             "moments",    "dimension",   "lemma21"};
    return names;
}

/// Keys accepted in config files and on the command line (without dashes).
inline const std::set<std::string>& config_keys()
{
    static const std::set<std::string> keys{"command", "model", "alpha",   "seq",    "question", "horizon", "ell",
                                            "t",       "x",     "reps",    "seed",   "n",        "n-list",  "dt",
                                            "quad-nodes", "deltas", "threads", "method", "beta", "b",  "budget",
                                            "margin",  "out",   "csv"};
    return keys;
}

namespace detail {

inline double json_number(const json& v, const std::string& key)
{
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_double(v.get<std::string>(), key);
    throw ValidationError("config key '" + key + "' must be a number");
}

inline std::int64_t json_integer(const json& v, const std::string& key)
{
    const double d = json_number(v, key);
    if (!(std::abs(d) < 9.0e15) || d != std::floor(d)) throw ValidationError("config key '" + key + "' must be an integer");
    return static_cast<std::int64_t>(d);
}

inline std::string json_string(const json& v, const std::string& key)
{
    if (!v.is_string()) throw ValidationError("config key '" + key + "' must be a string");
    return v.get<std::string>();
}

template <typename T, typename Conv>
std::vector<T> json_list(const json& v, const std::string& key, Conv conv)
{
    std::vector<T> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(conv(e, key));
    } else if (v.is_string()) {
        const std::string s = v.get<std::string>();
        for (auto part : split(s, ',')) out.push_back(conv(json(std::string(part)), key));
    } else {
        throw ValidationError("config key '" + key + "' must be a list");
    }
    return out;
}

} // namespace detail

/// Overlay the keys of `j` onto `cfg`. Unknown keys are rejected.
inline void apply_json(ExperimentConfig& cfg, const json& j)
{
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (!config_keys().contains(key)) throw ValidationError("unknown config key '" + key + "'");
        if (key == "command") cfg.command = detail::json_string(v, key);
        else if (key == "model") cfg.model = detail::json_string(v, key);
        else if (key == "alpha") cfg.alpha = detail::json_number(v, key);
        else if (key == "seq") cfg.seq = detail::json_string(v, key);
        else if (key == "question") cfg.question = detail::json_string(v, key);
        else if (key == "horizon") cfg.horizon = detail::json_number(v, key);
        else if (key == "ell") cfg.ell = detail::json_number(v, key);
        else if (key == "t") cfg.t = detail::json_number(v, key);
        else if (key == "x") cfg.x = detail::json_number(v, key);
        else if (key == "reps") cfg.reps = detail::json_integer(v, key);
        else if (key == "seed") {
            const auto s = detail::json_integer(v, key);
            if (s < 0) throw ValidationError("seed must be nonnegative");
            cfg.seed = static_cast<std::uint64_t>(s);
        } else if (key == "n") cfg.n = detail::json_integer(v, key);
        else if (key == "n-list") cfg.n_list = detail::json_list<std::int64_t>(v, key, detail::json_integer);
        else if (key == "dt") cfg.dt = detail::json_number(v, key);
        else if (key == "quad-nodes") cfg.quad_nodes = static_cast<int>(detail::json_integer(v, key));
        else if (key == "deltas") cfg.deltas = detail::json_list<double>(v, key, detail::json_number);
        else if (key == "threads") cfg.threads = static_cast<int>(detail::json_integer(v, key));
        else if (key == "method") cfg.method = detail::json_string(v, key);
        else if (key == "beta") cfg.beta = detail::json_number(v, key);
        else if (key == "b") cfg.b = detail::json_number(v, key);
        else if (key == "budget") cfg.budget = detail::json_number(v, key);
        else if (key == "margin") cfg.margin = detail::json_number(v, key);
        else if (key == "out") cfg.out = detail::json_string(v, key);
        else if (key == "csv") cfg.csv = detail::json_string(v, key);
    }
}

/// Fill command-dependent defaults so that the echoed config is complete.
inline void resolve_defaults(ExperimentConfig& cfg)
{
    if (cfg.question.empty()) {
        if (cfg.command == "conditions") cfg.question = "typeI";
        else if (cfg.command == "moments") cfg.question = "point";
        else if (cfg.command == "dimension") cfg.question = "typeI";
    }
    if (cfg.n_list.empty()) {
        if (cfg.command == "dimension") cfg.n_list = {100, 1000, 10000};
        else if (cfg.command == "moments") cfg.n_list = {cfg.n};
    }
}

inline ModelSpec model_spec(const ExperimentConfig& cfg)
{
    if (cfg.model == "static") return ModelSpec::static_model();
    if (cfg.model == "brownian") return ModelSpec::brownian();
    if (cfg.model == "poisson") return ModelSpec::poisson(cfg.alpha);
    throw ValidationError("unknown model '" + cfg.model + "'");
}

/// Every check that does not need the computation itself.
inline void validate(const ExperimentConfig& cfg)
{
    if (cfg.command.empty()) throw ValidationError("no command given");
    if (!command_names().contains(cfg.command)) throw ValidationError("unknown command '" + cfg.command + "'");
    const auto model = model_spec(cfg);
    (void)LengthSequence::parse(cfg.seq);
    const auto& c = cfg.command;

    if (cfg.threads < 1 || cfg.threads > 1024) throw ValidationError("threads must lie in [1, 1024]");
    if (!(cfg.budget > 0.0)) throw ValidationError("budget must be positive");
    if (!(cfg.margin > 0.0 && cfg.margin < 1.0)) throw ValidationError("margin must lie in (0, 1)");
    if (cfg.quad_nodes < 2 || cfg.quad_nodes > 512) throw ValidationError("quad-nodes must lie in [2, 512]");
    if (!(cfg.horizon >= 1000.0 && cfg.horizon <= 1e9) || cfg.horizon != std::floor(cfg.horizon))
        throw ValidationError("horizon must be an integer in [1000, 1e9]");

    auto need_dynamic = [&] {
        if (model.kind == ModelKind::static_model) throw ValidationError("command '" + c + "' needs a dynamical model");
    };

    if (c == "conditions") {
        if (cfg.question != "typeI" && cfg.question != "typeII" && cfg.question != "typeIII")
            throw ValidationError("question must be typeI, typeII or typeIII");
    } else if (c == "correlation") {
        need_dynamic();
        if (!(cfg.ell > 0.0 && cfg.ell <= 0.5)) throw ValidationError("ell must lie in (0, 1/2]");
        if (!(cfg.t >= 0.0) || !std::isfinite(cfg.t)) throw ValidationError("t must be a nonnegative number");
        if (!(cfg.x >= 0.0 && cfg.x <= 0.5)) throw ValidationError("x must lie in [0, 1/2]");
        if (cfg.reps < 100) throw ValidationError("reps must be at least 100");
    } else if (c == "simulate-point" || c == "simulate-circle") {
        need_dynamic();
        if (cfg.n < 1) throw ValidationError("n must be at least 1");
        if (cfg.reps < 100) throw ValidationError("reps must be at least 100");
        if (cfg.method != "chain" && cfg.method != "timeline") throw ValidationError("method must be chain or timeline");
        if (model.kind == ModelKind::brownian && !(cfg.dt > 0.0 && cfg.dt <= kMaxGridDt))
            throw ValidationError("dt must lie in (0, 1e-2]");
    } else if (c == "moments") {
        need_dynamic();
        if (cfg.question != "point" && cfg.question != "circle") throw ValidationError("question must be point or circle");
        for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
            if (cfg.n_list[i] < 0) throw ValidationError("n-list entries must be nonnegative");
            if (i > 0 && cfg.n_list[i] <= cfg.n_list[i - 1]) throw ValidationError("n-list must be increasing");
        }
    } else if (c == "dimension") {
        need_dynamic();
        if (cfg.question != "typeI" && cfg.question != "spacetime")
            throw ValidationError("dimension question must be typeI or spacetime");
        if (cfg.reps < 2) throw ValidationError("reps must be at least 2");
        if (model.kind == ModelKind::poisson && !(cfg.alpha > 0.0))
            throw ValidationError("dimension scans need alpha > 0");
        if (cfg.question == "typeI" && cfg.n_list.size() < 3)
            throw ValidationError("a dimension trend needs at least three values in n-list");
        for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
            if (cfg.n_list[i] < 2) throw ValidationError("n-list entries must be at least 2");
            if (i > 0 && cfg.n_list[i] <= cfg.n_list[i - 1]) throw ValidationError("n-list must be increasing");
        }
        if (!cfg.deltas.empty()) {
            if (cfg.deltas.size() < 2) throw ValidationError("at least two deltas are required");
            for (std::size_t i = 0; i < cfg.deltas.size(); ++i) {
                if (!(cfg.deltas[i] > 0.0 && cfg.deltas[i] <= 1.0)) throw ValidationError("deltas must lie in (0, 1]");
                if (i > 0 && !(cfg.deltas[i] < cfg.deltas[i - 1])) throw ValidationError("deltas must be decreasing");
            }
        }
        if (cfg.question == "spacetime" && cfg.n < 1) throw ValidationError("n must be at least 1");
        if (model.kind == ModelKind::brownian && !(cfg.dt > 0.0 && cfg.dt <= kMaxGridDt))
            throw ValidationError("dt must lie in (0, 1e-2]");
    } else if (c == "lemma21") {
        if (!(cfg.beta > 0.0)) throw ValidationError("beta must be positive");
        if (!(cfg.b > 0.0 && cfg.b <= 1.0)) throw ValidationError("b must lie in (0, 1]");
    }
}

inline json config_echo(const ExperimentConfig& cfg)
{
    const auto seq = LengthSequence::parse(cfg.seq);
    json j;
    j["command"] = cfg.command;
    j["model"] = cfg.model;
    j["alpha"] = cfg.alpha;
    j["seq"] = seq.describe();
    j["seq_cap"] = seq.cap();
    j["question"] = cfg.question;
    j["horizon"] = cfg.horizon;
    j["ell"] = cfg.ell;
    j["t"] = cfg.t;
    j["x"] = cfg.x;
    j["reps"] = cfg.reps;
    j["seed"] = cfg.seed;
    j["n"] = cfg.n;
    j["n-list"] = cfg.n_list;
    j["dt"] = cfg.dt;
    j["quad-nodes"] = cfg.quad_nodes;
    j["deltas"] = cfg.deltas;
    j["threads"] = cfg.threads;
    j["method"] = cfg.method;
    j["beta"] = cfg.beta;
    j["b"] = cfg.b;
    j["budget"] = cfg.budget;
    j["margin"] = cfg.margin;
    j["rng_recipe"] = kRngRecipe;
    j["chunk_size"] = kChunkSize;
    j["quad_rel_tol"] = kQuadRelTol;
    j["profile_margin"] = kProfileMargin;
    j["theta_floor"] = kThetaFloor;
    j["theta_slope_tolerance"] = kThetaSlopeTolerance;
    j["box_snap"] = kBoxSnap;
    return j;
}

struct Report
{
    json config;
    json results;
    json warnings = json::array();
    double wall_time_s = 0.0;
    std::string csv; // optional table

    json to_json() const
    {
        json j;
        j["schema"] = kReportSchema;
        j["config"] = config;
        j["results"] = results;
        j["warnings"] = warnings;
        j["provenance"] = {{"artifact_version", kArtifactVersion}, {"wall_time_s", wall_time_s}};
        return j;
    }
};

namespace detail {

inline json to_json(const McAggregate& a)
{
    return {{"reps", a.reps},         {"mean", a.mean},
            {"se", a.se},             {"second_moment", a.second_moment},
            {"second_moment_se", a.second_moment_se},
            {"p_nonempty", a.p_nonempty}, {"se_p", a.se_p}};
}

inline json to_json(const TailFit& f)
{
    return {{"power_exponent", f.power_exponent}, {"log_exponent", f.log_exponent}};
}

inline json to_json(const SeriesDiagnostic& d)
{
    json partial = json::array();
    for (const auto& p : d.partial_sums) partial.push_back({{"n", p.n}, {"log_value", p.log_value}});
    return {{"beta", d.beta},
            {"log_power", d.log_power},
            {"horizon", d.horizon},
            {"margin", d.margin},
            {"partial_sums", partial},
            {"growth_exponent_hat", d.growth_exponent_hat},
            {"log_exponent_hat", d.log_exponent_hat},
            {"verdict", to_string(d.verdict)},
            {"refined_verdict", to_string(d.refined)}};
}

inline json to_json(const ThresholdVerdict& v)
{
    json clauses = json::array();
    for (const auto& c : v.clauses)
        clauses.push_back({{"statement", c.statement},
                           {"fires", c.fires},
                           {"fit", to_json(c.fit)},
                           {"min_value", c.min_value},
                           {"series", to_string(c.series)}});
    return {{"question", to_string(v.question)},
            {"model", to_string(v.model.kind)},
            {"alpha", v.model.alpha},
            {"result", to_string(v.result)},
            {"basis", v.basis},
            {"clauses", clauses}};
}

inline json to_json(const MomentReport& r)
{
    return {{"model", to_string(r.model.kind)},
            {"alpha", r.model.alpha},
            {"question", to_string(r.question)},
            {"n", r.n},
            {"EX", r.EX},
            {"EX2", r.EX2},
            {"lower_bound", r.lower_bound},
            {"log_ratio", r.log_ratio},
            {"quad_nodes", r.quad_nodes},
            {"quad_error_estimate", r.quad_error_estimate},
            {"converged", r.converged}};
}

inline json to_json(const BoxCountRun& r)
{
    return {{"deltas", r.deltas}, {"counts", r.counts}, {"slope", r.slope}, {"slope_ci", {r.slope_lo, r.slope_hi}}};
}

inline json to_json(const DimensionTrend& t)
{
    json per = json::array();
    for (const auto& p : t.per_n)
        per.push_back({{"n", p.n},
                       {"mean_slope", p.mean_slope},
                       {"ci", {p.ci_lo, p.ci_hi}},
                       {"nonempty", p.nonempty},
                       {"reps", p.reps}});
    return {{"per_n", per}, {"extrapolated_dim", t.extrapolated_dim}, {"monotone", t.monotone}};
}

inline Question parse_question(const std::string& q)
{
    if (q == "typeI") return Question::typeI;
    if (q == "typeII") return Question::typeII;
    return Question::typeIII;
}

inline std::vector<HdKind> hd_kinds_for(ModelKind m)
{
    if (m == ModelKind::brownian)
        return {HdKind::typeI_brownian, HdKind::spacetime_brownian, HdKind::space_projection_brownian,
                HdKind::time_projection_brownian};
    if (m == ModelKind::poisson)
        return {HdKind::typeI_poisson, HdKind::spacetime_poisson, HdKind::space_projection_poisson,
                HdKind::time_projection_poisson};
    return {};
}

inline double z_score(double estimate, double se, double target)
{
    return se > 0.0 ? (estimate - target) / se : (estimate == target ? 0.0 : std::numeric_limits<double>::infinity());
}

inline void run_conditions(const ExperimentConfig& cfg, Report& rep)
{
    const auto model = model_spec(cfg);
    const auto seq = LengthSequence::parse(cfg.seq);
    const auto N = static_cast<std::int64_t>(cfg.horizon);
    auto& r = rep.results;

    const auto b0 = beta0_estimate(seq, N);
    r["beta0"] = {{"value", b0.value}, {"log_coefficient", b0.log_coefficient}, {"max_ratio", b0.max_ratio}};

    const auto tb = theta_bounds(seq, std::min<std::int64_t>(N, 1 << 20));
    r["theta_bounds"] = {{"M0_hat", tb.M0_hat}, {"M1_hat", tb.M1_hat}, {"tail_slope", tb.tail_slope}, {"warning", tb.warning}};
    if (tb.warning) rep.warnings.push_back("lengths are not Theta(1/n) over the horizon");

    double beta = 1.0;
    if (model.kind == ModelKind::brownian) beta = 2.0;
    if (model.kind == ModelKind::poisson && model.alpha > 0.0) beta = model.alpha;
    const auto series = series_beta(seq, beta, N, cfg.margin);
    r["series"] = to_json(series);
    if (series.verdict == SeriesVerdict::inconclusive)
        rep.warnings.push_back("series growth exponent lies inside the inconclusive band");

    const auto verdict = threshold_verdict(parse_question(cfg.question), model, seq, N, cfg.margin);
    r["verdict"] = to_json(verdict);
    if (verdict.result == ThresholdResult::inconclusive) rep.warnings.push_back("threshold verdict is inconclusive");

    json hd = json::object();
    for (auto kind : hd_kinds_for(model.kind)) {
        std::optional<double> a;
        if (is_poisson(kind)) a = model.alpha;
        try {
            const auto v = hd_formula(kind, b0.value, a);
            hd[to_string(kind)] = {{"bound", v.bound == BoundType::exact ? "exact" : "upper"}, {"value", v.value}};
        } catch (const ValidationError& e) {
            hd[to_string(kind)] = {{"error", e.what()}};
        }
    }
    r["hd"] = hd;
}

inline void run_correlation(const ExperimentConfig& cfg, Report& rep)
{
    const auto model = model_spec(cfg);
    auto& r = rep.results;
    const bool poisson = model.kind == ModelKind::poisson;
    const bool spacetime = cfg.x != 0.0;
    double analytic = 0.0;
    if (poisson)
        analytic = spacetime ? pair_corr_poisson_spacetime(cfg.ell, model.alpha, cfg.t, cfg.x)
                             : pair_corr_poisson_point(cfg.ell, model.alpha, cfg.t);
    else
        analytic = spacetime ? pair_corr_brownian_spacetime(cfg.ell, cfg.t, cfg.x) : pair_corr_brownian_point(cfg.ell, cfg.t);
    r["analytic"] = analytic;
    r["kind"] = spacetime ? "spacetime" : "point";

    MeanSe mc;
    if (cfg.t == 0.0) {
        // No motion: the two events are determined by one uniform center.
        mc = poisson ? mc_pair_poisson(cfg.ell, model.alpha, 0.0, cfg.x, cfg.reps, cfg.seed, cfg.threads)
                     : mc_pair_poisson(cfg.ell, 0.0, 0.0, cfg.x, cfg.reps, cfg.seed, cfg.threads);
    } else if (poisson) {
        mc = mc_pair_poisson(cfg.ell, model.alpha, cfg.t, cfg.x, cfg.reps, cfg.seed, cfg.threads);
    } else {
        mc = mc_pair_brownian(cfg.ell, cfg.t, cfg.x, cfg.reps, cfg.seed, cfg.threads);
    }
    const double z = z_score(mc.mean, mc.se, analytic);
    r["monte_carlo"] = {{"reps", cfg.reps}, {"mean", mc.mean}, {"se", mc.se}, {"z", z}, {"within_4se", std::abs(z) <= 4.0}};
    if (std::abs(z) > 4.0) rep.warnings.push_back("monte carlo estimate is more than 4 standard errors from the analytic value");
}

inline void run_simulate(const ExperimentConfig& cfg, Report& rep, bool circle)
{
    const auto model = model_spec(cfg);
    const auto seq = LengthSequence::parse(cfg.seq);
    auto& r = rep.results;
    const auto stats = seq_stats(seq, cfg.n);
    McAggregate a;
    if (model.kind == ModelKind::poisson) {
        McParams p{cfg.n, model.alpha, seq, cfg.reps, cfg.seed, cfg.threads, cfg.budget};
        if (circle) {
            a = mc_circle(p);
        } else {
            a = mc_point(p, CirclePoint(cfg.x), cfg.method == "chain" ? PointMethod::chain : PointMethod::timeline);
        }
        r["method"] = circle ? "timeline" : cfg.method;
    } else {
        GridMcParams p{cfg.n, cfg.dt, seq, cfg.reps, cfg.seed, cfg.threads};
        a = circle ? mc_circle_grid(p) : mc_point_grid(p, CirclePoint(cfg.x));
        r["method"] = "grid";
        rep.warnings.push_back("brownian grid scans estimate measures only; short excursions are missed");
    }
    r["aggregate"] = to_json(a);
    r["u_n"] = stats.u_n;
    r["z_mean_vs_u_n"] = z_score(a.mean, a.se, stats.u_n);
    r["lower_bound_empirical"] = a.second_moment > 0.0 ? a.mean * a.mean / a.second_moment : 0.0;
}

inline void run_moments(const ExperimentConfig& cfg, Report& rep)
{
    const auto model = model_spec(cfg);
    const auto seq = LengthSequence::parse(cfg.seq);
    const auto q = cfg.question == "point" ? MomentQuestion::point : MomentQuestion::circle;
    auto& r = rep.results;
    if (cfg.n_list.size() >= 2) {
        const auto prof = divergence_profile(model, q, seq, cfg.n_list, cfg.quad_nodes);
        json rows = json::array();
        for (const auto& m : prof.rows) {
            rows.push_back(to_json(m));
            if (!m.converged) rep.warnings.push_back("quadrature did not reach tolerance at n=" + std::to_string(m.n));
        }
        r["profile"] = {{"rows", rows}, {"slope", prof.slope}, {"margin", prof.margin}, {"verdict", to_string(prof.verdict)}};
        std::ostringstream os;
        write_profile_csv(os, prof);
        rep.csv = os.str();
    } else {
        const auto m = second_moment(model, q, cfg.n_list.front(), seq, cfg.quad_nodes);
        r["moment"] = to_json(m);
        if (!m.converged) rep.warnings.push_back("quadrature did not reach tolerance");
        std::ostringstream os;
        DivergenceProfile single;
        single.rows.push_back(m);
        write_profile_csv(os, single);
        rep.csv = os.str();
    }
}

inline void run_dimension(const ExperimentConfig& cfg, Report& rep)
{
    const auto model = model_spec(cfg);
    const auto seq = LengthSequence::parse(cfg.seq);
    auto& r = rep.results;
    rep.warnings.push_back("box-counting slopes are consistency checks, not Hausdorff dimensions");

    if (cfg.question == "typeI") {
        std::vector<std::vector<std::optional<double>>> slopes;
        for (auto n : cfg.n_list) {
            std::vector<double> deltas = cfg.deltas;
            if (deltas.empty()) {
                const double nd = static_cast<double>(n);
                deltas = model.kind == ModelKind::poisson
                             ? dyadic_window(std::pow(nd, -model.alpha), std::pow(nd, -model.alpha / 4.0))
                             : dyadic_window(std::max(cfg.dt, 1.0 / (nd * nd)), std::pow(nd, -0.5));
                if (deltas.size() < 2) throw ValidationError("box window holds fewer than two dyadic sizes");
            }
            if (model.kind == ModelKind::brownian && deltas.back() < cfg.dt)
                throw Refusal(Refusal::Reason::precondition_failed, "grid step dt is coarser than the smallest box size");
            slopes.push_back(parallel_map<std::optional<double>>(cfg.reps, cfg.threads, [&](std::int64_t rep_i) -> std::optional<double> {
                const auto ri = static_cast<std::uint64_t>(rep_i);
                ExceptionalTimeSet ts;
                if (model.kind == ModelKind::poisson) {
                    ts = scan_point_chain(n, model.alpha, seq, cfg.seed, ri);
                } else {
                    BrownianGridStream s(n, cfg.dt, seq, cfg.seed, ri);
                    ts = scan_point_grid(s, CirclePoint(cfg.x)).grid_time_set;
                }
                if (ts.empty()) return std::nullopt;
                return box_count_1d(ts, deltas).slope;
            }));
        }
        const auto trend = dimension_trend(cfg.n_list, slopes);
        r["trend"] = to_json(trend);
        if (!trend.monotone) rep.warnings.push_back("per-n slopes drift non-monotonically");
        if (model.kind == ModelKind::poisson) {
            const auto b0 = beta0_estimate(seq, 1000000);
            const auto hd = hd_formula(HdKind::typeI_poisson, b0.value, model.alpha);
            r["hd_target"] = {{"kind", "typeI_poisson"}, {"beta0", b0.value}, {"value", hd.value}};
        }
        std::ostringstream os;
        write_trend_csv(os, trend);
        rep.csv = os.str();
        return;
    }

    // Space-time box counts pooled over replicates, isotropic boxes.
    if (model.kind != ModelKind::poisson)
        throw Refusal(Refusal::Reason::precondition_failed, "space-time box counts need exact Poisson cells");
    std::vector<double> deltas = cfg.deltas;
    if (deltas.empty()) deltas = dyadic_window(1.0 / 1024.0, 0.5);
    const auto runs = parallel_map<BoxCountRun>(cfg.reps, cfg.threads, [&](std::int64_t rep_i) {
        const auto tl = build_timeline(cfg.n, model.alpha, seq, cfg.seed, static_cast<std::uint64_t>(rep_i), cfg.budget);
        return box_count_2d(poisson_cells(tl), deltas, deltas);
    });
    double s = 0.0, s2 = 0.0;
    std::int64_t used = 0;
    json per = json::array();
    for (const auto& run : runs) {
        per.push_back(run.slope);
        if (run.counts.back() == 0) continue;
        ++used;
        s += run.slope;
        s2 += run.slope * run.slope;
    }
    const auto m = mean_se_from_sums(s, s2, static_cast<double>(used));
    const double half = used > 1 ? student_t_975(static_cast<std::size_t>(used - 1)) * m.se : 0.0;
    r["spacetime"] = {{"deltas", deltas}, {"mean_slope", m.mean}, {"ci", {m.mean - half, m.mean + half}},
                      {"nonempty", used},  {"per_rep_slopes", per}};
    std::ostringstream os;
    os << "rep,slope\n";
    for (std::size_t i = 0; i < runs.size(); ++i) os << i << ',' << format_double(runs[i].slope) << '\n';
    rep.csv = os.str();
}

inline void run_lemma21(const ExperimentConfig& cfg, Report& rep)
{
    const auto seq = LengthSequence::parse(cfg.seq);
    const auto d = lemma21_diagnostic(seq, cfg.beta, cfg.b, static_cast<std::int64_t>(cfg.horizon), cfg.margin);
    auto partial = [](const std::vector<PartialSum>& v) {
        json a = json::array();
        for (const auto& p : v) a.push_back({{"n", p.n}, {"log_value", p.log_value}});
        return a;
    };
    rep.results = {{"beta", d.beta},
                   {"b", d.b},
                   {"horizon", d.horizon},
                   {"integral_partials", partial(d.integral_partials)},
                   {"series_partials", partial(d.series_partials)},
                   {"integral_fit", to_json(d.integral_fit)},
                   {"integral_verdict", to_string(d.integral_verdict)},
                   {"series_verdict", to_string(d.series_verdict)},
                   {"agree", d.agree}};
}

} // namespace detail

/// Validate, dispatch and assemble the report. Throws ValidationError or
/// Refusal; never writes files.
inline Report run(ExperimentConfig cfg)
{
    resolve_defaults(cfg);
    validate(cfg);
    const auto start = std::chrono::steady_clock::now();
    Report rep;
    rep.config = config_echo(cfg);
    rep.results = json::object();
    const auto& c = cfg.command;
    if (c == "conditions") detail::run_conditions(cfg, rep);
    else if (c == "correlation") detail::run_correlation(cfg, rep);
    else if (c == "simulate-point") detail::run_simulate(cfg, rep, false);
    else if (c == "simulate-circle") detail::run_simulate(cfg, rep, true);
    else if (c == "moments") detail::run_moments(cfg, rep);
    else if (c == "dimension") detail::run_dimension(cfg, rep);
    else if (c == "lemma21") detail::run_lemma21(cfg, rep);
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

} // namespace dvcover
