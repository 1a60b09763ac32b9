#include "fedkd/data/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "data_internal.hpp"
#include "fedkd/rng.hpp"

namespace fs = std::filesystem;

namespace fedkd::data {

namespace detail {

std::string format_double(double value) {
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, result.ptr);
}

namespace {

constexpr double kConstantFeatureStd = 1e-12;

void drop_columns(Matrix& m, const std::vector<bool>& keep, std::size_t kept_count) {
    if (m.rows == 0) {
        m.cols = kept_count;
        return;
    }
    Matrix out(m.rows, kept_count);
    for (std::size_t r = 0; r < m.rows; ++r) {
        std::size_t dst = 0;
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (keep[c]) out(r, dst++) = m(r, c);
        }
    }
    m = std::move(out);
}

}  // namespace

Scenario finalize_scenario(std::string tag, std::vector<std::string> feature_names,
                           std::vector<RawDevice> devices, SplitMode split,
                           std::uint64_t split_seed, std::vector<std::string> warnings) {
    if (devices.empty()) throw DataError("scenario has no devices");

    Scenario scenario;
    scenario.tag = std::move(tag);
    scenario.warnings = std::move(warnings);

    for (RawDevice& raw : devices) {
        const std::size_t n = raw.x.rows;
        const std::size_t n_train = (n + 1) / 2;  // odd counts round toward train

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (split == SplitMode::SeededRandom) {
            RngStream rng = derive_stream(split_seed, raw.id, 0, "split");
            rng.shuffle(order);
            std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
            std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        }

        DeviceDataset device;
        device.device_id = raw.id;
        device.scenario_tag = scenario.tag;
        device.train.x = Matrix(n_train, raw.x.cols);
        device.train.y.resize(n_train);
        device.test.x = Matrix(n - n_train, raw.x.cols);
        device.test.y.resize(n - n_train);
        for (std::size_t i = 0; i < n; ++i) {
            SplitData& part = i < n_train ? device.train : device.test;
            const std::size_t local = i < n_train ? i : i - n_train;
            std::copy(raw.x.row(order[i]).begin(), raw.x.row(order[i]).end(),
                      part.x.row(local).begin());
            part.y[local] = raw.y[order[i]];
        }
        const double errors = static_cast<double>(
            std::count(raw.y.begin(), raw.y.end(), 1));
        device.frame_error_rate = errors / static_cast<double>(n);
        scenario.devices.push_back(std::move(device));
    }

    // z-score fit on pooled train rows only
    const std::size_t dim = feature_names.size();
    std::size_t pooled_rows = 0;
    std::vector<double> mean(dim, 0.0), var(dim, 0.0);
    for (const DeviceDataset& device : scenario.devices) {
        pooled_rows += device.train.x.rows;
        for (std::size_t r = 0; r < device.train.x.rows; ++r) {
            for (std::size_t c = 0; c < dim; ++c) mean[c] += device.train.x(r, c);
        }
    }
    for (double& m : mean) m /= static_cast<double>(pooled_rows);
    for (const DeviceDataset& device : scenario.devices) {
        for (std::size_t r = 0; r < device.train.x.rows; ++r) {
            for (std::size_t c = 0; c < dim; ++c) {
                const double d = device.train.x(r, c) - mean[c];
                var[c] += d * d;
            }
        }
    }
    for (double& v : var) v = std::sqrt(v / static_cast<double>(pooled_rows));

    std::vector<bool> keep(dim, true);
    std::size_t kept = 0;
    for (std::size_t c = 0; c < dim; ++c) {
        if (var[c] < kConstantFeatureStd) {
            keep[c] = false;
            scenario.warnings.push_back("dropped constant feature: " + feature_names[c]);
        } else {
            ++kept;
        }
    }
    if (kept == 0) throw DataError("all features are constant");

    for (std::size_t c = 0; c < dim; ++c) {
        if (!keep[c]) continue;
        scenario.feature_names.push_back(feature_names[c]);
        scenario.normalization.mean.push_back(mean[c]);
        scenario.normalization.stddev.push_back(var[c]);
    }
    for (DeviceDataset& device : scenario.devices) {
        drop_columns(device.train.x, keep, kept);
        drop_columns(device.test.x, keep, kept);
        for (Matrix* m : {&device.train.x, &device.test.x}) {
            for (std::size_t r = 0; r < m->rows; ++r) {
                for (std::size_t c = 0; c < kept; ++c) {
                    (*m)(r, c) = ((*m)(r, c) - scenario.normalization.mean[c]) /
                                 scenario.normalization.stddev[c];
                }
            }
        }
    }
    return scenario;
}

}  // namespace detail

ScenarioStats dataset_stats(const Scenario& scenario) {
    if (scenario.devices.empty()) throw DataError("stats: scenario has no devices");
    ScenarioStats stats;
    stats.device_count = scenario.devices.size();
    std::size_t errors = 0;
    for (const DeviceDataset& device : scenario.devices) {
        const std::size_t frames = device.train.y.size() + device.test.y.size();
        stats.total_frames += frames;
        errors += static_cast<std::size_t>(
            std::count(device.train.y.begin(), device.train.y.end(), 1) +
            std::count(device.test.y.begin(), device.test.y.end(), 1));
        stats.per_device_error_rate.emplace_back(device.device_id, device.frame_error_rate);
    }
    stats.aggregate_error_rate =
        static_cast<double>(errors) / static_cast<double>(stats.total_frames);
    return stats;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream stream(line);
    while (std::getline(stream, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t start = 0;
        while (start < cell.size() && cell[start] == ' ') ++start;
        cells.push_back(cell.substr(start));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& cell, const std::string& context) {
    double value = 0.0;
    const auto result = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (result.ec != std::errc{} || result.ptr != cell.data() + cell.size()) {
        throw DataError("cannot parse number '" + cell + "' in " + context);
    }
    return value;
}

int parse_label(const std::string& cell, const std::string& context) {
    const double value = parse_double(cell, context);
    if (value == 0.0) return 0;
    if (value == 1.0) return 1;
    throw DataError("non-binary label '" + cell + "' in " + context);
}

}  // namespace

SchemaConfig SchemaConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema config: " + path);
    nlohmann::json parsed;
    try {
        in >> parsed;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("schema config " + path + ": " + e.what());
    }
    if (!parsed.contains("columns") || !parsed["columns"].is_object()) {
        throw ConfigError("schema config needs a {\"columns\": {name: role}} object");
    }
    SchemaConfig schema;
    for (const auto& [name, role] : parsed["columns"].items()) {
        const std::string r = role.get<std::string>();
        if (r != "feature" && r != "label" && r != "ignore" && r != "onehot") {
            throw ConfigError("schema column '" + name + "' has unknown role '" + r + "'");
        }
        schema.columns[name] = r;
    }
    return schema;
}

Scenario load_scenario(const std::string& root_path, const LoadOptions& options) {
    std::size_t label_columns = 0;
    for (const auto& [name, role] : options.schema.columns) {
        if (role == "label") ++label_columns;
    }
    if (label_columns != 1) {
        throw SchemaError("schema must mark exactly one label column, found " +
                          std::to_string(label_columns));
    }

    if (!fs::is_directory(root_path)) throw DataError("not a directory: " + root_path);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root_path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no node csv files in " + root_path);

    std::vector<std::string> feature_names;  // canonical order: first file's header
    std::vector<std::string> onehot_names;
    std::string label_name;
    std::vector<std::string> warnings;

    struct ParsedFile {
        std::string id;
        std::vector<std::vector<double>> numeric;
        std::vector<std::vector<double>> categorical;  // raw onehot column values
        Labels labels;
    };
    std::vector<ParsedFile> parsed_files;
    bool columns_known = false;

    for (const fs::path& file : files) {
        std::ifstream in(file);
        if (!in) throw DataError("cannot open " + file.string());
        std::string line;
        if (!std::getline(in, line) || line.empty()) {
            warnings.push_back("skipped empty node file: " + file.filename().string());
            continue;
        }
        const std::vector<std::string> header = split_csv_line(line);

        if (!columns_known) {
            for (const std::string& column : header) {
                const auto it = options.schema.columns.find(column);
                if (it == options.schema.columns.end()) continue;
                if (it->second == "feature") feature_names.push_back(column);
                if (it->second == "onehot") onehot_names.push_back(column);
                if (it->second == "label") label_name = column;
            }
            if (feature_names.empty() && onehot_names.empty()) {
                throw SchemaError(file.string() + ": no schema feature column present");
            }
            columns_known = true;
        }

        auto column_position = [&](const std::string& name) {
            const auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) {
                throw SchemaError(file.string() + ": missing column " + name);
            }
            return static_cast<std::size_t>(it - header.begin());
        };
        std::vector<std::size_t> feature_pos, onehot_pos;
        for (const std::string& name : feature_names) feature_pos.push_back(column_position(name));
        for (const std::string& name : onehot_names) onehot_pos.push_back(column_position(name));
        const std::size_t label_pos = column_position(label_name);

        ParsedFile parsed;
        parsed.id = file.stem().string();
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line == "\r") continue;
            const std::vector<std::string> cells = split_csv_line(line);
            const std::string context = file.filename().string() + ":" +
                                        std::to_string(line_no);
            if (cells.size() != header.size()) {
                throw DataError("row width mismatch in " + context);
            }
            std::vector<double> numeric(feature_names.size());
            for (std::size_t i = 0; i < feature_names.size(); ++i) {
                numeric[i] = parse_double(cells[feature_pos[i]], context);
            }
            std::vector<double> categorical(onehot_names.size());
            for (std::size_t i = 0; i < onehot_names.size(); ++i) {
                categorical[i] = parse_double(cells[onehot_pos[i]], context);
            }
            parsed.numeric.push_back(std::move(numeric));
            parsed.categorical.push_back(std::move(categorical));
            parsed.labels.push_back(parse_label(cells[label_pos], context));
        }

        if (parsed.labels.size() < 2) {
            warnings.push_back("skipped node file with fewer than 2 frames: " +
                               file.filename().string());
            continue;
        }
        parsed_files.push_back(std::move(parsed));
    }

    // onehot vocabulary: distinct values per column across every node file
    std::vector<std::vector<double>> vocabularies(onehot_names.size());
    for (std::size_t c = 0; c < onehot_names.size(); ++c) {
        std::set<double> distinct;
        for (const ParsedFile& parsed : parsed_files) {
            for (const auto& row : parsed.categorical) distinct.insert(row[c]);
        }
        vocabularies[c].assign(distinct.begin(), distinct.end());
    }

    std::vector<std::string> all_names = feature_names;
    for (std::size_t c = 0; c < onehot_names.size(); ++c) {
        for (double value : vocabularies[c]) {
            all_names.push_back(onehot_names[c] + "=" + detail::format_double(value));
        }
    }

    std::vector<detail::RawDevice> devices;
    for (ParsedFile& parsed : parsed_files) {
        detail::RawDevice device;
        device.id = std::move(parsed.id);
        device.x = Matrix(parsed.labels.size(), all_names.size());
        for (std::size_t r = 0; r < parsed.labels.size(); ++r) {
            std::size_t dst = 0;
            for (double v : parsed.numeric[r]) device.x(r, dst++) = v;
            for (std::size_t c = 0; c < onehot_names.size(); ++c) {
                for (double value : vocabularies[c]) {
                    device.x(r, dst++) = parsed.categorical[r][c] == value ? 1.0 : 0.0;
                }
            }
        }
        device.y = std::move(parsed.labels);
        devices.push_back(std::move(device));
    }

    return detail::finalize_scenario(options.scenario_tag, std::move(all_names),
                                     std::move(devices), options.split, options.split_seed,
                                     std::move(warnings));
}

void write_frames_csv(const std::string& path, const std::vector<std::string>& feature_names,
                      const Matrix& x, const Labels& y, const std::vector<std::string>* split,
                      bool synthetic) {
    if (x.rows != y.size()) throw ShapeError("write_frames_csv: row/label mismatch");
    if (split && split->size() != x.rows) throw ShapeError("write_frames_csv: split size");
    std::ofstream out(path, std::ios::binary);  // binary keeps \n on every platform
    if (!out) throw DataError("cannot open for writing: " + path);
    for (std::size_t c = 0; c < feature_names.size(); ++c) {
        out << feature_names[c] << ',';
    }
    out << "label";
    if (split) out << ",split";
    if (synthetic) out << ",synthetic";
    out << '\n';
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t c = 0; c < x.cols; ++c) {
            out << detail::format_double(x(r, c)) << ',';
        }
        out << y[r];
        if (split) out << ',' << (*split)[r];
        if (synthetic) out << ",1";
        out << '\n';
    }
    if (!out) throw DataError("failed writing " + path);
}

void save_scenario(const Scenario& scenario, const std::string& dir) {
    fs::create_directories(dir);
    nlohmann::ordered_json index;
    index["tag"] = scenario.tag;
    index["feature_names"] = scenario.feature_names;
    index["normalization"]["mean"] = scenario.normalization.mean;
    index["normalization"]["stddev"] = scenario.normalization.stddev;
    index["normalized"] = true;
    nlohmann::ordered_json device_list = nlohmann::ordered_json::array();
    for (std::size_t d = 0; d < scenario.devices.size(); ++d) {
        const DeviceDataset& device = scenario.devices[d];
        char name[32];
        std::snprintf(name, sizeof(name), "device_%04zu.csv", d);
        nlohmann::ordered_json entry;
        entry["id"] = device.device_id;
        entry["file"] = name;
        entry["train_rows"] = device.train.y.size();
        entry["test_rows"] = device.test.y.size();
        device_list.push_back(entry);

        const std::size_t total = device.train.y.size() + device.test.y.size();
        Matrix x(total, scenario.feature_dim());
        Labels y(total);
        std::vector<std::string> split(total);
        for (std::size_t r = 0; r < device.train.y.size(); ++r) {
            std::copy(device.train.x.row(r).begin(), device.train.x.row(r).end(), x.row(r).begin());
            y[r] = device.train.y[r];
            split[r] = "train";
        }
        for (std::size_t r = 0; r < device.test.y.size(); ++r) {
            const std::size_t dst = device.train.y.size() + r;
            std::copy(device.test.x.row(r).begin(), device.test.x.row(r).end(),
                      x.row(dst).begin());
            y[dst] = device.test.y[r];
            split[dst] = "test";
        }
        write_frames_csv((fs::path(dir) / name).string(), scenario.feature_names, x, y, &split,
                         false);
    }
    index["devices"] = device_list;
    std::ofstream out(fs::path(dir) / "index.json", std::ios::binary);
    if (!out) throw DataError("cannot write scenario index in " + dir);
    out << index.dump(2) << '\n';
}

Scenario load_saved_scenario(const std::string& dir) {
    const fs::path index_path = fs::path(dir) / "index.json";
    std::ifstream in(index_path);
    if (!in) throw DataError("missing scenario index: " + index_path.string());
    nlohmann::json index;
    try {
        in >> index;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad scenario index: " + std::string(e.what()));
    }

    Scenario scenario;
    scenario.tag = index.at("tag").get<std::string>();
    scenario.feature_names = index.at("feature_names").get<std::vector<std::string>>();
    scenario.normalization.mean =
        index.at("normalization").at("mean").get<std::vector<double>>();
    scenario.normalization.stddev =
        index.at("normalization").at("stddev").get<std::vector<double>>();

    for (const auto& entry : index.at("devices")) {
        const std::string file = entry.at("file").get<std::string>();
        std::ifstream csv(fs::path(dir) / file);
        if (!csv) throw DataError("missing device file: " + file);

        DeviceDataset device;
        device.device_id = entry.at("id").get<std::string>();
        device.scenario_tag = scenario.tag;
        const std::size_t train_rows = entry.at("train_rows").get<std::size_t>();
        const std::size_t test_rows = entry.at("test_rows").get<std::size_t>();
        device.train.x = Matrix(train_rows, scenario.feature_dim());
        device.train.y.resize(train_rows);
        device.test.x = Matrix(test_rows, scenario.feature_dim());
        device.test.y.resize(test_rows);

        std::string line;
        if (!std::getline(csv, line)) throw DataError("empty device file: " + file);
        std::size_t next_train = 0, next_test = 0, line_no = 1;
        while (std::getline(csv, line)) {
            ++line_no;
            if (line.empty()) continue;
            const std::vector<std::string> cells = split_csv_line(line);
            const std::string context = file + ":" + std::to_string(line_no);
            if (cells.size() != scenario.feature_dim() + 2) {
                throw DataError("row width mismatch in " + context);
            }
            const bool is_train = cells.back() == "train";
            SplitData& part = is_train ? device.train : device.test;
            const std::size_t row = is_train ? next_train++ : next_test++;
            if (row >= part.y.size()) throw DataError("too many rows in " + context);
            for (std::size_t c = 0; c < scenario.feature_dim(); ++c) {
                part.x(row, c) = parse_double(cells[c], context);
            }
            part.y[row] = parse_label(cells[scenario.feature_dim()], context);
        }
        if (next_train != train_rows || next_test != test_rows) {
            throw DataError("row count mismatch in " + file);
        }
        std::size_t errors = 0;
        for (int v : device.train.y) errors += static_cast<std::size_t>(v);
        for (int v : device.test.y) errors += static_cast<std::size_t>(v);
        device.frame_error_rate =
            static_cast<double>(errors) / static_cast<double>(train_rows + test_rows);
        scenario.devices.push_back(std::move(device));
    }
    if (scenario.devices.empty()) throw DataError("scenario index lists no devices");
    return scenario;
}

}  // namespace fedkd::data
