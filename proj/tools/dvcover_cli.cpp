#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "dvcover/experiment.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRefusal = 3;

void print_error(const std::string& kind, const std::string& reason, const std::string& message)
{
    dvcover::json j{{"schema", dvcover::kReportSchema}, {"error", kind}, {"reason", reason}, {"message", message}};
    std::cerr << j.dump(2) << '\n';
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << text;
    if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dynamical Dvoretzky covering experiments"};
    app.set_help_all_flag("--help-all");

    std::string command, config_path;
    app.add_option("command", command, "conditions | correlation | simulate-point | simulate-circle | moments | dimension | lemma21");
    app.add_option("--config", config_path, "JSON config file; flags given explicitly override it");

    // Every config key is taken as text and converted by the same code path
    // as config files, so "1e6" is accepted wherever an integer is.
    std::map<std::string, std::string> flags;
    for (const auto& key : dvcover::config_keys()) {
        if (key == "command") continue;
        app.add_option("--" + key, flags[key], "config key '" + key + "'");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("validation", "bad_arguments", e.what());
        return kExitValidation;
    }

    dvcover::ExperimentConfig cfg;
    dvcover::Report report;
    try {
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw dvcover::ValidationError("cannot read config file '" + config_path + "'");
            dvcover::json j;
            try {
                j = dvcover::json::parse(is);
            } catch (const dvcover::json::exception& e) {
                throw dvcover::ValidationError(std::string("config file is not valid JSON: ") + e.what());
            }
            dvcover::apply_json(cfg, j);
        }
        dvcover::json overlay = dvcover::json::object();
        if (!command.empty()) overlay["command"] = command;
        for (const auto& [key, value] : flags)
            if (app.count("--" + key) > 0) overlay[key] = value;
        dvcover::apply_json(cfg, overlay);
        report = dvcover::run(cfg);
    } catch (const dvcover::ValidationError& e) {
        print_error("validation", "invalid_config", e.what());
        return kExitValidation;
    } catch (const dvcover::Refusal& e) {
        print_error("refusal", e.reason_name(), e.what());
        return kExitRefusal;
    }

    const std::string text = report.to_json().dump(2) + "\n";
    try {
        if (cfg.out.empty()) std::cout << text;
        else write_file(cfg.out, text);
        if (!cfg.csv.empty()) write_file(cfg.csv, report.csv);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
    return 0;
}
