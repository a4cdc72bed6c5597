#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "dvcover/experiment.hpp"

using namespace dvcover;
namespace fs = std::filesystem;

namespace {

ExperimentConfig make(const json& j)
{
    ExperimentConfig cfg;
    apply_json(cfg, j);
    return cfg;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

class TempDir
{
public:
    TempDir()
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() / (std::string("dvcover_") + info->name() + "_" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

int run_cli(const std::string& args, const fs::path& out, const fs::path& err)
{
    const std::string cmd = std::string("\"") + DVCOVER_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small configs, one or more per command, used for the determinism matrix.
std::vector<json> config_matrix()
{
    return {
        {{"command", "conditions"}, {"model", "poisson"}, {"alpha", 2}, {"horizon", 10000}},
        {{"command", "conditions"}, {"model", "brownian"}, {"question", "typeII"}, {"horizon", 10000}},
        {{"command", "correlation"}, {"model", "poisson"}, {"reps", 5000}},
        {{"command", "correlation"}, {"model", "brownian"}, {"t", 0.01}, {"x", 0.05}, {"reps", 5000}},
        {{"command", "simulate-point"}, {"n", 30}, {"reps", 600}},
        {{"command", "simulate-point"}, {"n", 30}, {"reps", 600}, {"method", "timeline"}},
        {{"command", "simulate-point"}, {"model", "brownian"}, {"n", 10}, {"reps", 300}, {"dt", 0.01}},
        {{"command", "simulate-circle"}, {"n", 20}, {"reps", 400}, {"seq", "c_over_n,c=1.5"}},
        {{"command", "simulate-circle"}, {"model", "brownian"}, {"n", 10}, {"reps", 300}, {"dt", 0.01}},
        {{"command", "moments"}, {"n", 50}},
        {{"command", "moments"}, {"model", "brownian"}, {"n-list", "10,100,1000"}},
        {{"command", "dimension"}, {"alpha", 2}, {"n-list", "10,30,100"}, {"reps", 600}},
        {{"command", "dimension"}, {"question", "spacetime"}, {"n", 20}, {"reps", 300}},
        {{"command", "lemma21"}, {"seq", "c_over_n,c=0.5"}, {"horizon", 10000}},
    };
}

} // namespace

TEST(Config, UnknownKeyRejected)
{
    ExperimentConfig cfg;
    EXPECT_THROW(apply_json(cfg, json{{"colour", "red"}}), ValidationError);
    EXPECT_THROW(apply_json(cfg, json::array()), ValidationError);
    EXPECT_THROW(apply_json(cfg, json{{"reps", 1.5}}), ValidationError);
    EXPECT_THROW(apply_json(cfg, json{{"seed", -1}}), ValidationError);
    EXPECT_THROW(apply_json(cfg, json{{"model", 3}}), ValidationError);
}

TEST(Config, NumbersAndLists)
{
    const auto cfg = make({{"reps", "1e6"}, {"horizon", "1e6"}, {"n-list", "10,100"}, {"deltas", json::array({0.5, 0.25})},
                           {"alpha", "2"}});
    EXPECT_EQ(cfg.reps, 1000000);
    EXPECT_EQ(cfg.horizon, 1e6);
    EXPECT_EQ(cfg.n_list, (std::vector<std::int64_t>{10, 100}));
    EXPECT_EQ(cfg.deltas, (std::vector<double>{0.5, 0.25}));
    EXPECT_EQ(cfg.alpha, 2.0);
}

TEST(Config, ValidationErrors)
{
    const std::vector<json> bad{
        json::object(),
        {{"command", "nope"}},
        {{"command", "conditions"}, {"seq", "bogus"}},
        {{"command", "conditions"}, {"model", "lattice"}},
        {{"command", "conditions"}, {"horizon", 10}},
        {{"command", "conditions"}, {"horizon", 1000.5}},
        {{"command", "conditions"}, {"question", "typeIV"}},
        {{"command", "correlation"}, {"model", "static"}},
        {{"command", "correlation"}, {"ell", 0.7}},
        {{"command", "correlation"}, {"reps", 10}},
        {{"command", "simulate-point"}, {"method", "magic"}},
        {{"command", "simulate-point"}, {"n", 0}},
        {{"command", "simulate-circle"}, {"model", "brownian"}, {"dt", 0.1}},
        {{"command", "moments"}, {"question", "typeI"}},
        {{"command", "moments"}, {"n-list", "100,10"}},
        {{"command", "dimension"}, {"n-list", "10,100"}},
        {{"command", "dimension"}, {"alpha", 0}},
        {{"command", "dimension"}, {"question", "typeII"}},
        {{"command", "dimension"}, {"deltas", "0.25,0.5"}},
        {{"command", "lemma21"}, {"b", 2}},
        {{"command", "conditions"}, {"threads", 0}},
        {{"command", "conditions"}, {"margin", 1.5}},
    };
    for (const auto& j : bad) EXPECT_THROW(run(make(j)), ValidationError) << j.dump();
}

TEST(Config, RefusalsCarryReasons)
{
    try {
        run(make({{"command", "simulate-circle"}, {"n", 1000}, {"alpha", 2}, {"reps", 100}}));
        FAIL();
    } catch (const Refusal& r) {
        EXPECT_EQ(std::string(r.reason_name()), "budget_exceeded");
    }
    try {
        run(make({{"command", "dimension"}, {"model", "brownian"}, {"question", "spacetime"}, {"reps", 10}}));
        FAIL();
    } catch (const Refusal& r) {
        EXPECT_EQ(std::string(r.reason_name()), "precondition_failed");
    }
}

TEST(Report, SchemaAndEcho)
{
    const auto rep = run(make({{"command", "conditions"}, {"model", "poisson"}, {"alpha", 2}, {"horizon", "1e6"}}));
    const auto j = rep.to_json();
    EXPECT_EQ(j["schema"], "report_v1");
    EXPECT_EQ(j["provenance"]["artifact_version"], kArtifactVersion);
    EXPECT_TRUE(j["provenance"].contains("wall_time_s"));
    EXPECT_TRUE(j["warnings"].is_array());
    EXPECT_FALSE(j["results"].contains("wall_time_s"));

    // Every config key in effect is echoed, plus the conventions behind the numbers.
    for (const auto& key : config_keys()) {
        if (key == "out" || key == "csv") continue;
        EXPECT_TRUE(j["config"].contains(key)) << key;
    }
    for (const char* key : {"seq_cap", "rng_recipe", "chunk_size", "quad_rel_tol", "profile_margin", "theta_floor",
                            "theta_slope_tolerance", "box_snap"})
        EXPECT_TRUE(j["config"].contains(key)) << key;
    EXPECT_EQ(j["config"]["question"], "typeI");
}

TEST(Report, ConditionsExample)
{
    const auto rep = run(make({{"command", "conditions"}, {"model", "poisson"}, {"alpha", 2}, {"seq", "c_over_n,c=1"},
                               {"horizon", "1e6"}}));
    EXPECT_EQ(rep.results["verdict"]["result"], "exceptional_times_exist");
    EXPECT_NEAR(rep.results["hd"]["typeI_poisson"]["value"].get<double>(), 0.5, 1e-3);
    EXPECT_EQ(rep.results["hd"]["typeI_poisson"]["bound"], "exact");
}

TEST(Report, CorrelationExample)
{
    const auto rep = run(make({{"command", "correlation"}, {"model", "poisson"}, {"ell", 0.1}, {"alpha", 1}, {"t", 0.05},
                               {"reps", "1e6"}, {"seed", 1}}));
    EXPECT_NEAR(rep.results["analytic"].get<double>(), 0.864588, 1e-6);
    EXPECT_TRUE(rep.results["monte_carlo"]["within_4se"].get<bool>());
    EXPECT_EQ(rep.results["kind"], "point");
}

TEST(Report, SimulateAndMoments)
{
    const auto sim = run(make({{"command", "simulate-point"}, {"n", 3}, {"reps", 20000}, {"seed", 4}}));
    EXPECT_NEAR(sim.results["u_n"].get<double>(), 1.0 / 6.0, 1e-15);
    EXPECT_LT(std::abs(sim.results["z_mean_vs_u_n"].get<double>()), 4.0);

    const auto mom = run(make({{"command", "moments"}, {"seq", "explicit,values=0.5"}, {"n", 1}}));
    EXPECT_NEAR(mom.results["moment"]["EX2"].get<double>(), 0.391917, 1e-6);
    EXPECT_EQ(mom.csv.substr(0, 26), "n,EX,EX2,lower_bound,slope");

    const auto prof = run(make({{"command", "moments"}, {"alpha", 2}, {"n-list", "100,1000,10000"}}));
    EXPECT_EQ(prof.results["profile"]["verdict"], "bounded");
}

TEST(Report, DeterministicAcrossThreadCounts)
{
    for (const auto& base : config_matrix()) {
        std::string first;
        for (int th : {1, 4, 16}) {
            json j = base;
            j["threads"] = th;
            const auto dump = run(make(j)).results.dump();
            if (first.empty())
                first = dump;
            else
                EXPECT_EQ(dump, first) << base.dump() << " threads " << th;
        }
    }
}

TEST(Cli, ExitCodesAndFiles)
{
    TempDir tmp;
    const auto out = tmp.path() / "stdout.txt", err = tmp.path() / "stderr.txt";
    const auto report = tmp.path() / "report.json", csv = tmp.path() / "table.csv";

    EXPECT_EQ(run_cli("conditions --model poisson --alpha 2 --seq c_over_n,c=1 --horizon 1e6", out, err), 0);
    const auto j = json::parse(slurp(out));
    EXPECT_EQ(j["results"]["verdict"]["result"], "exceptional_times_exist");

    EXPECT_EQ(run_cli("moments --seq explicit,values=0.5 --n 1 --out \"" + report.string() + "\" --csv \"" + csv.string() + "\"",
                      out, err),
              0);
    EXPECT_TRUE(fs::exists(report));
    EXPECT_EQ(json::parse(slurp(report))["schema"], "report_v1");
    EXPECT_EQ(slurp(csv).substr(0, 10), "n,EX,EX2,l");
    fs::remove(report);
    fs::remove(csv);

    EXPECT_EQ(run_cli("conditions --seq bogus --out \"" + report.string() + "\" --csv \"" + csv.string() + "\"", out, err), 2);
    EXPECT_FALSE(fs::exists(report));
    EXPECT_FALSE(fs::exists(csv));
    const auto e2 = json::parse(slurp(err));
    EXPECT_EQ(e2["error"], "validation");
    EXPECT_EQ(e2["reason"], "invalid_config");

    EXPECT_EQ(run_cli("simulate-circle --n 1000 --alpha 2 --reps 100 --out \"" + report.string() + "\"", out, err), 3);
    EXPECT_FALSE(fs::exists(report));
    const auto e3 = json::parse(slurp(err));
    EXPECT_EQ(e3["error"], "refusal");
    EXPECT_EQ(e3["reason"], "budget_exceeded");

    EXPECT_EQ(run_cli("conditions --no-such-flag 1", out, err), 2);
    EXPECT_EQ(json::parse(slurp(err))["reason"], "bad_arguments");
}

TEST(Cli, ConfigFileWithOverride)
{
    TempDir tmp;
    const auto cfg = tmp.path() / "cfg.json", out = tmp.path() / "o.txt", err = tmp.path() / "e.txt";
    {
        std::ofstream os(cfg);
        os << R"({"command": "correlation", "model": "poisson", "ell": 0.1, "t": 0.05, "reps": 2000, "seed": 3})";
    }
    EXPECT_EQ(run_cli("--config \"" + cfg.string() + "\" --reps 3000", out, err), 0);
    const auto j = json::parse(slurp(out));
    EXPECT_EQ(j["config"]["reps"], 3000);
    EXPECT_EQ(j["config"]["seed"], 3);
    EXPECT_EQ(j["results"]["monte_carlo"]["reps"], 3000);

    {
        std::ofstream os(cfg);
        os << R"({"command": "correlation", "unknown_key": 1})";
    }
    EXPECT_EQ(run_cli("--config \"" + cfg.string() + "\"", out, err), 2);
    {
        std::ofstream os(cfg);
        os << "{not json";
    }
    EXPECT_EQ(run_cli("--config \"" + cfg.string() + "\"", out, err), 2);
}
