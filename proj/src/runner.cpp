#include "fedkd/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "fedkd/ensemble.hpp"
#include "fedkd/evaluate.hpp"

namespace fs = std::filesystem;

namespace fedkd::runner {

namespace {

const std::vector<std::string> kCanonicalMethods = {
    "local", "fedavg", "dpfed", "kd_scr", "kd_smote", "tf_kd", "ensemble"};

void require_keys(const nlohmann::json& object, const std::set<std::string>& known,
                  const std::string& where) {
    for (const auto& [key, value] : object.items()) {
        if (!known.contains(key)) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read_if(const nlohmann::json& object, const char* key, T& out) {
    if (object.contains(key)) {
        try {
            out = object.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(std::string("bad value for '") + key + "'");
        }
    }
}

void parse_hyper(const nlohmann::json& hyper, RunConfig& config) {
    require_keys(hyper,
                 {"temperature", "alpha", "rounds", "client_fraction", "fed_local_epochs",
                  "batch_size", "local_epochs", "teacher_epochs", "student_epochs",
                  "finetune_epochs", "smote_k", "smote_mode", "kl_mode", "dp_clip_norm",
                  "dp_noise_std", "sgd_lr", "sgd_momentum", "adam_lr", "student_hidden",
                  "teacher_hidden", "weight_clients_by_samples", "student_trains_on_smote"},
                 "hyper");

    read_if(hyper, "temperature", config.kd.temperature);
    if (hyper.contains("alpha")) {
        config.kd.alpha = hyper.at("alpha").get<double>();
        config.alpha_explicit = true;
    }
    read_if(hyper, "rounds", config.fed.rounds);
    read_if(hyper, "client_fraction", config.fed.client_fraction);
    read_if(hyper, "fed_local_epochs", config.fed.local_epochs);
    if (hyper.contains("batch_size")) {
        const int batch = hyper.at("batch_size").get<int>();
        config.fed.batch_size = batch;
        config.kd.batch_size = batch;
    }
    read_if(hyper, "local_epochs", config.kd.local_epochs);
    read_if(hyper, "teacher_epochs", config.kd.teacher_epochs);
    read_if(hyper, "student_epochs", config.kd.student_epochs);
    read_if(hyper, "finetune_epochs", config.kd.finetune_epochs);
    read_if(hyper, "smote_k", config.kd.smote.k);
    if (hyper.contains("smote_mode")) {
        const std::string mode = hyper.at("smote_mode").get<std::string>();
        if (mode == "as-written") {
            config.kd.smote.extrapolate = true;
        } else if (mode == "standard") {
            config.kd.smote.extrapolate = false;
        } else {
            throw ConfigError("smote_mode must be 'as-written' or 'standard'");
        }
    }
    if (hyper.contains("kl_mode")) {
        const std::string mode = hyper.at("kl_mode").get<std::string>();
        if (mode == "teacher-ref") {
            config.kd.kl_mode = nn::KlMode::TeacherRef;
        } else if (mode == "as-written") {
            config.kd.kl_mode = nn::KlMode::AsWritten;
        } else {
            throw ConfigError("kl_mode must be 'teacher-ref' or 'as-written'");
        }
    }
    read_if(hyper, "dp_clip_norm", config.fed.dp_clip_norm);
    read_if(hyper, "dp_noise_std", config.fed.dp_noise_std);
    if (hyper.contains("sgd_lr")) {
        const double lr = hyper.at("sgd_lr").get<double>();
        config.fed.optimizer.learning_rate = lr;
        config.kd.student_optimizer.learning_rate = lr;
    }
    if (hyper.contains("sgd_momentum")) {
        const double momentum = hyper.at("sgd_momentum").get<double>();
        config.fed.optimizer.momentum = momentum;
        config.kd.student_optimizer.momentum = momentum;
    }
    read_if(hyper, "adam_lr", config.kd.teacher_optimizer.learning_rate);
    if (hyper.contains("student_hidden")) {
        const auto hidden = hyper.at("student_hidden").get<std::vector<std::size_t>>();
        config.kd.student_hidden = hidden;
        config.fed.hidden_layers = hidden;
    }
    read_if(hyper, "teacher_hidden", config.kd.teacher_hidden);
    read_if(hyper, "weight_clients_by_samples", config.fed.weight_by_sample_count);
    read_if(hyper, "student_trains_on_smote", config.kd.student_trains_on_smote);
}

void parse_scenario(const nlohmann::json& scenario, RunConfig& config) {
    require_keys(scenario, {"source", "path", "schema", "split", "generator"}, "scenario");
    read_if(scenario, "source", config.scenario_source);
    if (config.scenario_source != "synthetic" && config.scenario_source != "csv" &&
        config.scenario_source != "saved") {
        throw ConfigError("scenario source must be synthetic, csv or saved");
    }
    read_if(scenario, "path", config.scenario_path);
    read_if(scenario, "schema", config.schema_path);
    if (scenario.contains("split")) {
        const std::string split = scenario.at("split").get<std::string>();
        if (split == "chronological") {
            config.split = data::SplitMode::Chronological;
        } else if (split == "random") {
            config.split = data::SplitMode::SeededRandom;
        } else {
            throw ConfigError("split must be 'chronological' or 'random'");
        }
    }
    if (scenario.contains("generator")) {
        const nlohmann::json& gen = scenario.at("generator");
        require_keys(gen,
                     {"device_count", "frames_per_device", "feature_dim", "shift",
                      "error_rate_lo", "error_rate_hi", "label_sharpness"},
                     "scenario.generator");
        read_if(gen, "device_count", config.generator.device_count);
        read_if(gen, "frames_per_device", config.generator.frames_per_device);
        read_if(gen, "feature_dim", config.generator.feature_dim);
        read_if(gen, "shift", config.generator.shift);
        read_if(gen, "error_rate_lo", config.generator.error_rate_lo);
        read_if(gen, "error_rate_hi", config.generator.error_rate_hi);
        read_if(gen, "label_sharpness", config.generator.label_sharpness);
    }
}

}  // namespace

RunConfig parse_config(const nlohmann::json& parsed) {
    if (!parsed.is_object()) throw ConfigError("config must be a JSON object");
    require_keys(parsed,
                 {"profile", "scenario", "methods", "seed", "out", "threads",
                  "save_student_weights", "hyper"},
                 "config");

    RunConfig config;
    read_if(parsed, "profile", config.profile);
    if (config.profile != "scr4" && config.profile != "scr5" && config.profile != "synthetic") {
        throw ConfigError("profile must be scr4, scr5 or synthetic");
    }
    if (parsed.contains("scenario")) parse_scenario(parsed.at("scenario"), config);
    if (parsed.contains("methods")) {
        config.methods = parsed.at("methods").get<std::vector<std::string>>();
    }
    read_if(parsed, "seed", config.seed);
    read_if(parsed, "out", config.out_dir);
    read_if(parsed, "threads", config.threads);
    read_if(parsed, "save_student_weights", config.save_student_weights);

    // profile binds alpha and the scenario tag before explicit hyper overrides
    if (config.profile == "scr4") {
        config.kd.alpha = 0.4;
        config.generator.tag = "scr4";
    } else if (config.profile == "scr5") {
        config.kd.alpha = 0.5;
        config.generator.tag = "scr5";
    }
    if (parsed.contains("hyper")) parse_hyper(parsed.at("hyper"), config);

    config.kd.threads = config.threads;
    config.fed.threads = config.threads;
    return config;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json parsed;
    try {
        in >> parsed;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return parse_config(parsed);
}

void RunConfig::validate() const {
    if (methods.empty()) throw ConfigError("no methods requested");
    for (const std::string& method : methods) {
        if (std::find(kCanonicalMethods.begin(), kCanonicalMethods.end(), method) ==
            kCanonicalMethods.end()) {
            throw ConfigError("unknown method: " + method);
        }
    }
    if (scenario_source == "csv" && (scenario_path.empty() || schema_path.empty())) {
        throw ConfigError("csv scenario needs 'path' and 'schema'");
    }
    if (scenario_source == "saved" && scenario_path.empty()) {
        throw ConfigError("saved scenario needs 'path'");
    }
    if (scenario_source == "synthetic") generator.validate();
    if (threads < 1) throw ConfigError("threads must be >= 1");
    fed.validate();
    kd.validate();
}

std::vector<std::string> resolve_methods(const std::vector<std::string>& requested) {
    std::set<std::string> wanted(requested.begin(), requested.end());
    if (wanted.contains("ensemble")) {
        wanted.insert("local");
        wanted.insert("dpfed");
        wanted.insert("kd_smote");
    }
    std::vector<std::string> ordered;
    for (const std::string& method : kCanonicalMethods) {
        if (wanted.contains(method)) ordered.push_back(method);
    }
    return ordered;
}

data::Scenario build_scenario(const RunConfig& config) {
    if (config.scenario_source == "synthetic") {
        return data::generate_synthetic_scenario(config.generator, config.seed);
    }
    if (config.scenario_source == "saved") {
        return data::load_saved_scenario(config.scenario_path);
    }
    data::LoadOptions options;
    options.schema = data::SchemaConfig::from_json_file(config.schema_path);
    options.split = config.split;
    options.split_seed = config.seed;
    options.scenario_tag = config.profile == "synthetic" ? "scr4" : config.profile;
    return data::load_scenario(config.scenario_path, options);
}

nlohmann::ordered_json config_to_json(const RunConfig& config) {
    nlohmann::ordered_json out;
    out["version"] = kVersion;
    out["profile"] = config.profile;
    out["scenario"]["source"] = config.scenario_source;
    out["scenario"]["path"] = config.scenario_path;
    out["scenario"]["schema"] = config.schema_path;
    out["scenario"]["split"] =
        config.split == data::SplitMode::Chronological ? "chronological" : "random";
    out["scenario"]["generator"] = {{"device_count", config.generator.device_count},
                                    {"frames_per_device", config.generator.frames_per_device},
                                    {"feature_dim", config.generator.feature_dim},
                                    {"shift", config.generator.shift},
                                    {"error_rate_lo", config.generator.error_rate_lo},
                                    {"error_rate_hi", config.generator.error_rate_hi},
                                    {"label_sharpness", config.generator.label_sharpness},
                                    {"tag", config.generator.tag}};
    out["methods"] = resolve_methods(config.methods);
    out["seed"] = config.seed;
    out["hyper"] = {{"temperature", config.kd.temperature},
                    {"alpha", config.kd.alpha},
                    {"rounds", config.fed.rounds},
                    {"client_fraction", config.fed.client_fraction},
                    {"fed_local_epochs", config.fed.local_epochs},
                    {"batch_size", config.kd.batch_size},
                    {"local_epochs", config.kd.local_epochs},
                    {"teacher_epochs", config.kd.teacher_epochs},
                    {"student_epochs", config.kd.student_epochs},
                    {"finetune_epochs", config.kd.finetune_epochs},
                    {"smote_k", config.kd.smote.k},
                    {"smote_mode", config.kd.smote.extrapolate ? "as-written" : "standard"},
                    {"kl_mode",
                     config.kd.kl_mode == nn::KlMode::TeacherRef ? "teacher-ref" : "as-written"},
                    {"dp_clip_norm", config.fed.dp_clip_norm},
                    {"dp_noise_std", config.fed.dp_noise_std},
                    {"sgd_lr", config.kd.student_optimizer.learning_rate},
                    {"sgd_momentum", config.kd.student_optimizer.momentum},
                    {"adam_lr", config.kd.teacher_optimizer.learning_rate},
                    {"student_hidden", config.kd.student_hidden},
                    {"teacher_hidden", config.kd.teacher_hidden},
                    {"weight_clients_by_samples", config.fed.weight_by_sample_count},
                    {"student_trains_on_smote", config.kd.student_trains_on_smote},
                    {"normalization", "zscore-pooled-train"}};
    return out;
}

std::string config_fingerprint(const RunConfig& config) {
    return to_hex(fnv1a64(config_to_json(config).dump()));
}

namespace {

void write_text_file(const fs::path& path, const std::string& content,
                     std::vector<std::string>& files) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
    if (!out) throw DataError("failed writing " + path.string());
    files.push_back(path.string());
}

std::string telemetry_to_jsonl(const std::vector<fed::RoundTelemetry>& rounds) {
    std::string out;
    for (const fed::RoundTelemetry& round : rounds) {
        nlohmann::ordered_json line;
        line["round"] = round.round;
        line["clients"] = round.client_ids;
        line["global_train_loss"] = round.global_train_loss;
        out += line.dump();
        out += '\n';
    }
    return out;
}

nlohmann::ordered_json audit_to_json(const distill::DataFlowAudit& audit) {
    nlohmann::ordered_json out;
    out["cloud_real_rows"] = audit.cloud_real_rows;
    out["cloud_synthetic_rows"] = audit.cloud_synthetic_rows;
    out["events"] = audit.events;
    return out;
}

}  // namespace

RunOutputs run_experiment(const RunConfig& config) {
    config.validate();
    const std::vector<std::string> methods = resolve_methods(config.methods);

    const bool needs_kd = std::any_of(methods.begin(), methods.end(), [](const std::string& m) {
        return m == "kd_scr" || m == "kd_smote" || m == "tf_kd";
    });
    if (needs_kd && config.profile == "synthetic" && !config.alpha_explicit) {
        throw ConfigError("synthetic profile requires an explicit hyper.alpha for kd methods");
    }

    const data::Scenario scenario = build_scenario(config);
    const std::string fingerprint = config_fingerprint(config);

    fs::create_directories(config.out_dir);
    fs::create_directories(fs::path(config.out_dir) / "weights");
    RunOutputs outputs;

    std::map<std::string, metrics::MethodReport> by_method;
    std::optional<nn::ModelWeights> smote_teacher;  // shared by kd_smote and tf_kd

    auto save_model = [&](const std::string& name, const nn::ModelWeights& model) {
        const fs::path path = fs::path(config.out_dir) / "weights" / (name + ".bin");
        nn::save_weights(model, path.string());
        outputs.files_written.push_back(path.string());
    };
    auto save_students = [&](const std::string& method,
                             const std::vector<nn::ModelWeights>& students) {
        if (!config.save_student_weights) return;
        for (std::size_t d = 0; d < students.size(); ++d) {
            save_model("student_" + method + "_" + scenario.devices[d].device_id, students[d]);
        }
    };

    for (const std::string& method : methods) {
        metrics::MethodReport report;
        if (method == "local") {
            report.method = "local";
            report.devices.resize(scenario.devices.size());
            std::vector<nn::ModelWeights> students(scenario.devices.size());
            parallel_for(scenario.devices.size(), config.threads, [&](std::size_t d) {
                students[d] = distill::train_local(scenario.devices[d], config.kd, config.seed);
                report.devices[d] = evaluate_device(students[d], scenario.devices[d]);
            });
            save_students("local", students);
        } else if (method == "fedavg" || method == "dpfed") {
            fed::FedConfig fed_config = config.fed;
            fed_config.privacy = method == "dpfed" ? fed::Privacy::Dp : fed::Privacy::None;
            fed::FedResult result = fed::run_federated(scenario, fed_config, config.seed, method);
            report = std::move(result.report);
            write_text_file(fs::path(config.out_dir) / ("telemetry_" + method + ".jsonl"),
                            telemetry_to_jsonl(result.rounds), outputs.files_written);
            save_model("global_" + method, result.global);
        } else if (method == "kd_scr" || method == "kd_smote" || method == "tf_kd") {
            const distill::KdVariant variant = method == "kd_scr" ? distill::KdVariant::KdScr
                                               : method == "kd_smote"
                                                   ? distill::KdVariant::KdSmote
                                                   : distill::KdVariant::TfKd;
            const nn::ModelWeights* cached =
                variant != distill::KdVariant::KdScr && smote_teacher.has_value()
                    ? &*smote_teacher
                    : nullptr;
            distill::KdOutcome outcome =
                distill::run_kd_pipeline(scenario, variant, config.kd, config.seed, cached);
            if (variant != distill::KdVariant::KdScr && !smote_teacher.has_value()) {
                smote_teacher = outcome.teacher;
            }
            report = std::move(outcome.report);
            write_text_file(fs::path(config.out_dir) / ("audit_" + method + ".json"),
                            audit_to_json(outcome.audit).dump(2) + "\n", outputs.files_written);
            save_model(method == "kd_scr" ? "teacher_real" : "teacher_smote", outcome.teacher);
            save_students(method, outcome.students);
        } else if (method == "ensemble") {
            report = ensemble::run_ensemble(by_method.at("local"), by_method.at("dpfed"),
                                            by_method.at("kd_smote"));
        }
        report.config_fingerprint = fingerprint;
        report.seed = config.seed;
        by_method[method] = report;

        write_text_file(fs::path(config.out_dir) / ("report_" + method + ".json"),
                        metrics::report_to_json(report).dump(2) + "\n", outputs.files_written);
        outputs.reports.push_back(std::move(report));
    }

    write_text_file(fs::path(config.out_dir) / "reports.csv",
                    metrics::reports_to_csv(outputs.reports), outputs.files_written);
    write_text_file(fs::path(config.out_dir) / "summary.json",
                    metrics::summary_to_json(outputs.reports).dump(2) + "\n",
                    outputs.files_written);
    if (by_method.contains("local") && outputs.reports.size() > 1) {
        write_text_file(
            fs::path(config.out_dir) / "deltas.json",
            metrics::delta_tables_to_json(outputs.reports, by_method.at("local")).dump(2) + "\n",
            outputs.files_written);
    }
    write_text_file(fs::path(config.out_dir) / "groups.json",
                    metrics::groups_to_json(
                        metrics::error_rate_groups(scenario, outputs.reports, {}))
                            .dump(2) +
                        "\n",
                    outputs.files_written);

    const data::ScenarioStats stats = data::dataset_stats(scenario);
    nlohmann::ordered_json manifest;
    manifest["version"] = kVersion;
    manifest["seed"] = config.seed;
    manifest["config_fingerprint"] = fingerprint;
    manifest["config"] = config_to_json(config);
    manifest["scenario"] = {{"tag", scenario.tag},
                            {"devices", stats.device_count},
                            {"total_frames", stats.total_frames},
                            {"aggregate_error_rate", stats.aggregate_error_rate},
                            {"feature_names", scenario.feature_names},
                            {"warnings", scenario.warnings}};
    manifest["methods"] = methods;
    write_text_file(fs::path(config.out_dir) / "manifest.json", manifest.dump(2) + "\n",
                    outputs.files_written);

    return outputs;
}

}  // namespace fedkd::runner
