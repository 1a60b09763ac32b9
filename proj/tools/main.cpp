#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "fedkd/runner.hpp"

namespace {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const fedkd::ConfigError*>(&e)) return 2;
    if (dynamic_cast<const fedkd::DataError*>(&e)) return 3;
    return 4;
}

const char* category_for(const std::exception& e) {
    if (dynamic_cast<const fedkd::ConfigError*>(&e)) return "config";
    if (dynamic_cast<const fedkd::DataError*>(&e)) return "data";
    return "internal";
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        const std::string item = csv.substr(start, comma - start);
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Edge-learning simulator for frame-error prediction"};
    app.require_subcommand(1);

    std::string config_path, out_dir, methods_csv, profile, data_dir, schema_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;

    CLI::App* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    run->add_option("--config", config_path, "experiment config file")->required();
    run->add_option("--seed", seed, "override the master seed")->each([&](const std::string&) {
        seed_set = true;
    });
    run->add_option("--out", out_dir, "override the output directory");
    run->add_option("--methods", methods_csv, "comma-separated method list override");
    run->add_option("--threads", threads, "worker cap (does not change results)");
    run->add_option("--scenario-profile", profile, "override the profile (scr4|scr5|synthetic)");

    CLI::App* gen = app.add_subcommand("gen-scenario", "Generate and save a synthetic scenario");
    gen->add_option("--config", config_path, "config file with a scenario.generator block")
        ->required();
    gen->add_option("--out", out_dir, "directory for the saved scenario")->required();
    gen->add_option("--seed", seed, "generator seed")->each([&](const std::string&) {
        seed_set = true;
    });

    CLI::App* stats = app.add_subcommand("stats", "Print device and error-rate statistics");
    stats->add_option("--data", data_dir, "saved scenario dir, or a dir of node CSVs")
        ->required();
    stats->add_option("--schema", schema_path, "schema config (required for raw CSV dirs)");
    stats->add_option("--scenario-profile", profile, "scenario tag for raw CSV dirs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    }

    try {
        if (run->parsed()) {
            fedkd::runner::RunConfig config = fedkd::runner::parse_config_file(config_path);
            if (seed_set) config.seed = seed;
            if (!out_dir.empty()) config.out_dir = out_dir;
            if (!methods_csv.empty()) config.methods = split_list(methods_csv);
            if (threads > 0) {
                config.threads = threads;
                config.fed.threads = threads;
                config.kd.threads = threads;
            }
            if (!profile.empty()) config.profile = profile;
            const fedkd::runner::RunOutputs outputs = fedkd::runner::run_experiment(config);
            std::cout << "wrote " << outputs.files_written.size() << " files to "
                      << config.out_dir << "\n";
            for (const fedkd::metrics::MethodReport& report : outputs.reports) {
                std::cout << report.method << ": edge_accuracy="
                          << fedkd::metrics::edge_accuracy(report)
                          << " frame_accuracy=" << fedkd::metrics::frame_accuracy(report)
                          << "\n";
            }
        } else if (gen->parsed()) {
            fedkd::runner::RunConfig config = fedkd::runner::parse_config_file(config_path);
            if (seed_set) config.seed = seed;
            config.generator.validate();
            const fedkd::data::Scenario scenario =
                fedkd::data::generate_synthetic_scenario(config.generator, config.seed);
            fedkd::data::save_scenario(scenario, out_dir);
            const fedkd::data::ScenarioStats s = fedkd::data::dataset_stats(scenario);
            std::cout << "saved scenario: " << s.device_count << " devices, " << s.total_frames
                      << " frames, error rate " << s.aggregate_error_rate << "\n";
        } else if (stats->parsed()) {
            fedkd::data::Scenario scenario;
            if (std::filesystem::exists(std::filesystem::path(data_dir) / "index.json")) {
                scenario = fedkd::data::load_saved_scenario(data_dir);
            } else {
                if (schema_path.empty()) {
                    throw fedkd::ConfigError("raw CSV directory needs --schema");
                }
                fedkd::data::LoadOptions options;
                options.schema = fedkd::data::SchemaConfig::from_json_file(schema_path);
                if (!profile.empty()) options.scenario_tag = profile;
                scenario = fedkd::data::load_scenario(data_dir, options);
            }
            const fedkd::data::ScenarioStats s = fedkd::data::dataset_stats(scenario);
            std::cout << "devices: " << s.device_count << "\n";
            std::cout << "total_frames: " << s.total_frames << "\n";
            std::cout << "aggregate_error_rate: " << s.aggregate_error_rate << "\n";
            for (const std::string& warning : scenario.warnings) {
                std::cerr << "warning: " << warning << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << category_for(e) << ": " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
