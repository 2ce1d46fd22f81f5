#include "dfp/pipeline.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "dfp/diagnostics.hpp"
#include "dfp/error.hpp"
#include "json.hpp"
#include "parallel.hpp"

namespace dfp {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string_view version() { return DFP_VERSION; }

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------

ExtractionPolicy PipelineConfig::policy() const { return {include_ip, exclude, always_include}; }

MetricsOptions PipelineConfig::metrics_options() const {
    MetricsOptions m;
    m.plan = {block_size, blocks, seed};
    m.repetitions = repetitions;
    m.distinct_cap_fraction = distinct_cap;
    m.keep_repetitions = keep_repetitions;
    m.threads = threads;
    return m;
}

SplitSpec PipelineConfig::split_spec() const { return {train_fraction, seed}; }

TreeParams PipelineConfig::tree_params() const { return {min_leaf, confidence, prune}; }

fs::path PipelineConfig::run_directory() const { return include_ip ? output / "include-ip" : output; }

void PipelineConfig::validate() const {
    if (label_map.empty()) throw ValidationError("no label map configured");
    if (!fs::is_regular_file(label_map)) throw ValidationError("label map not found: " + label_map.string());
    if (schema && !fs::is_regular_file(*schema)) throw ValidationError("schema file not found: " + schema->string());
    if (captures.empty() && field_tables.empty()) throw ValidationError("no captures or field tables configured");
    for (const auto* list : {&captures, &field_tables}) {
        for (const auto& p : *list) {
            if (!fs::is_regular_file(p)) throw ValidationError("input not found: " + p.string());
        }
    }
    if (output.empty()) throw ValidationError("no output directory configured");
    metrics_options().validate();
    if (!(lambda >= 0.0 && lambda < 1.0)) throw ValidationError("lambda must lie in [0, 1), got " + format_number(lambda));
    split_spec().validate();
    tree_params().validate();
}

namespace {

const std::set<std::string, std::less<>> kConfigKeys = {
    "captures",  "field_tables",   "delimiter", "label_map",     "schema",          "include_ip",
    "exclude",   "always_include", "block_size", "blocks",       "repetitions",     "distinct_cap",
    "high_cardinality_bypass", "keep_repetitions", "lambda",     "train_fraction",  "level",
    "min_leaf",  "confidence",     "prune",     "output",        "seed",            "threads"};

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::string delimiter_name(char d) { return d == '\t' ? "\\t" : std::string(1, d); }

}  // namespace

PipelineConfig config_from_json(std::string_view text, const fs::path& base) {
    PipelineConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw ValidationError("config must be a JSON object");
        for (const auto& [key, _] : j.items()) {
            if (!kConfigKeys.contains(key)) throw ValidationError("unknown config key '" + key + "'");
        }
        auto paths = [&](const char* key) {
            std::vector<fs::path> out;
            for (const auto& p : j.at(key)) out.push_back(resolve(base, p.get<std::string>()));
            return out;
        };
        if (j.contains("captures")) c.captures = paths("captures");
        if (j.contains("field_tables")) c.field_tables = paths("field_tables");
        if (j.contains("delimiter")) {
            const auto d = j.at("delimiter").get<std::string>();
            if (d == "\\t" || d == "tab") {
                c.delimiter = '\t';
            } else if (d.size() == 1) {
                c.delimiter = d[0];
            } else {
                throw ValidationError("delimiter must be a single character");
            }
        }
        if (j.contains("label_map")) c.label_map = resolve(base, j.at("label_map").get<std::string>());
        if (j.contains("schema") && !j.at("schema").is_null()) c.schema = resolve(base, j.at("schema").get<std::string>());
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("include_ip", c.include_ip);
        get("exclude", c.exclude);
        get("always_include", c.always_include);
        get("block_size", c.block_size);
        get("blocks", c.blocks);
        get("repetitions", c.repetitions);
        get("distinct_cap", c.distinct_cap);
        get("high_cardinality_bypass", c.high_cardinality_bypass);
        get("keep_repetitions", c.keep_repetitions);
        get("lambda", c.lambda);
        get("train_fraction", c.train_fraction);
        if (j.contains("level")) c.level = parse_level(j.at("level").get<std::string>());
        get("min_leaf", c.min_leaf);
        get("confidence", c.confidence);
        get("prune", c.prune);
        if (j.contains("output")) c.output = resolve(base, j.at("output").get<std::string>());
        get("seed", c.seed);
        get("threads", c.threads);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid config: ") + e.what());
    }
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ValidationError("config file not found: " + path.string());
    return config_from_json(read_text_file(path), path.parent_path());
}

std::string config_to_json(const PipelineConfig& c) {
    auto strings = [](const std::vector<fs::path>& paths) {
        std::vector<std::string> out;
        for (const auto& p : paths) out.push_back(p.string());
        return out;
    };
    json j;
    j["captures"] = strings(c.captures);
    j["field_tables"] = strings(c.field_tables);
    j["delimiter"] = delimiter_name(c.delimiter);
    j["label_map"] = c.label_map.string();
    j["schema"] = c.schema ? json(c.schema->string()) : json(nullptr);
    j["include_ip"] = c.include_ip;
    j["exclude"] = c.exclude;
    j["always_include"] = c.always_include;
    j["block_size"] = c.block_size;
    j["blocks"] = c.blocks;
    j["repetitions"] = c.repetitions;
    j["distinct_cap"] = c.distinct_cap;
    j["high_cardinality_bypass"] = c.high_cardinality_bypass;
    j["keep_repetitions"] = c.keep_repetitions;
    j["lambda"] = c.lambda;
    j["train_fraction"] = c.train_fraction;
    j["level"] = to_string(c.level);
    j["min_leaf"] = c.min_leaf;
    j["confidence"] = c.confidence;
    j["prune"] = c.prune;
    j["output"] = c.output.string();
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    return j.dump(2) + "\n";
}

void apply_environment(PipelineConfig& config) {
    const char* env = std::getenv("DFP_SEED");
    if (!env) return;
    const std::string_view text(env);
    std::uint64_t seed = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (text.empty() || ec != std::errc() || end != text.data() + text.size()) {
        throw ValidationError("DFP_SEED must be an unsigned integer, got '" + std::string(text) + "'");
    }
    config.seed = seed;
}

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::extract: return "extract";
        case Stage::score: return "score";
        case Stage::select: return "select";
        case Stage::train: return "train";
        case Stage::evaluate: return "evaluate";
    }
    return "extract";
}

fs::path stage_directory(const PipelineConfig& config, Stage stage) {
    return config.run_directory() / std::string(to_string(stage));
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kStageConfig = "config.json";
constexpr const char* kMetricsJson = "metrics.json";
constexpr const char* kMetricsTsv = "metrics.tsv";
constexpr const char* kSelected = "selected.txt";
constexpr const char* kModel = "model.json";

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

/// Identity of everything a stage's outputs depend on.
std::string stage_key(const PipelineConfig& c, Stage stage) {
    json j;
    j["version"] = version();
    std::vector<std::string> inputs;
    for (const auto* list : {&c.captures, &c.field_tables}) {
        for (const auto& p : *list) {
            std::error_code ec;
            const auto size = fs::file_size(p, ec);
            const auto mtime = fs::last_write_time(p, ec).time_since_epoch().count();
            inputs.push_back(p.string() + "|" + std::to_string(size) + "|" + std::to_string(mtime));
        }
    }
    j["inputs"] = inputs;
    j["label_map"] = hex(fnv1a(read_text_file(c.label_map)));
    j["schema"] = c.schema ? hex(fnv1a(read_text_file(*c.schema))) : "default";
    j["delimiter"] = delimiter_name(c.delimiter);
    j["include_ip"] = c.include_ip;
    j["exclude"] = c.exclude;
    j["always_include"] = c.always_include;
    if (stage >= Stage::score) {
        j["block_size"] = c.block_size;
        j["blocks"] = c.blocks;
        j["repetitions"] = c.repetitions;
        j["distinct_cap"] = c.distinct_cap;
        j["keep_repetitions"] = c.keep_repetitions;
        j["seed"] = c.seed;
    }
    if (stage >= Stage::select) {
        j["lambda"] = c.lambda;
        j["high_cardinality_bypass"] = c.high_cardinality_bypass;
    }
    if (stage >= Stage::train) {
        j["train_fraction"] = c.train_fraction;
        j["level"] = to_string(c.level);
        j["min_leaf"] = c.min_leaf;
        j["confidence"] = c.confidence;
        j["prune"] = c.prune;
    }
    return hex(fnv1a(j.dump()));
}

fs::path begin_stage(const PipelineConfig& c, Stage stage) {
    const auto dir = stage_directory(c, stage);
    fs::create_directories(dir);
    fs::remove(dir / kStageConfig);
    return dir;
}

void finish_stage(const PipelineConfig& c, Stage stage) {
    json j;
    j["tool"] = "dfp";
    j["tool_version"] = version();
    j["stage"] = to_string(stage);
    j["stage_key"] = stage_key(c, stage);
    j["config"] = json::parse(config_to_json(c));
    write_text_file(stage_directory(c, stage) / kStageConfig, j.dump(2) + "\n");
}

bool stage_is_current(const PipelineConfig& c, Stage stage, std::initializer_list<const char*> outputs) {
    const auto dir = stage_directory(c, stage);
    if (!fs::is_regular_file(dir / kStageConfig)) return false;
    for (const char* f : outputs) {
        if (!fs::is_regular_file(dir / f)) return false;
    }
    try {
        const auto j = nlohmann::json::parse(read_text_file(dir / kStageConfig));
        return j.at("stage_key").get<std::string>() == stage_key(c, stage);
    } catch (const std::exception&) {
        return false;
    }
}

void require_stage(const PipelineConfig& c, Stage stage) {
    if (!fs::is_regular_file(stage_directory(c, stage) / kStageConfig)) {
        throw ValidationError("no " + std::string(to_string(stage)) + " output in " + c.run_directory().string() +
                              "; run 'dfp " + std::string(to_string(stage)) + "' first");
    }
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

std::string percent(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
    return buf;
}

LabeledDataset load_extracted(const PipelineConfig& c) {
    require_stage(c, Stage::extract);
    return load_matrix(MatrixFiles::in(stage_directory(c, Stage::extract)));
}

}  // namespace

ExtractResult cmd_extract(const PipelineConfig& c) {
    c.validate();
    const auto label_map = load_label_map(c.label_map);
    const FeatureSchema base = c.schema ? load_schema(*c.schema) : default_schema();
    const FeatureExtractor extractor(base, c.policy());
    const auto dir = begin_stage(c, Stage::extract);

    ExtractResult result;
    LabeledDataset dataset;
    dataset.schema = extractor.schema();
    dataset.dictionaries.resize(dataset.schema.size());
    std::vector<std::string> order = label_map.device_names();

    struct Part {
        LabeledDataset rows;
        DecodeStats stats;
        std::uint64_t dropped = 0;
    };
    std::vector<Part> parts(c.captures.size());
    detail::parallel_for(parts.size(), c.threads, [&](std::size_t i) {
        auto decoded = decode_capture(c.captures[i]);
        parts[i].stats = decoded.stats;
        auto filtered = label_and_filter(std::move(decoded.records), label_map);
        parts[i].dropped = filtered.dropped;
        parts[i].rows = build_dataset(filtered.packets, extractor, order);
        info(c.captures[i].string() + ": " + std::to_string(decoded.stats.frames) + " frames, " +
             std::to_string(filtered.packets.size()) + " from monitored devices");
    });
    for (auto& part : parts) {
        result.decode += part.stats;
        result.dropped += part.dropped;
        for (auto& row : part.rows.rows) dataset.rows.push_back(std::move(row));
    }
    for (const auto& table : c.field_tables) {
        auto imported = import_field_table(table, dataset.schema, {c.delimiter, &label_map});
        info(table.string() + ": " + std::to_string(imported.size()) + " rows");
        for (auto& row : imported.rows) dataset.rows.push_back(std::move(row));
    }
    if (dataset.rows.empty()) {
        throw DataError("no packets matched any device in the label map (" + std::to_string(result.dropped) +
                        " packets from other sources, " + std::to_string(result.decode.frames) + " frames read)");
    }
    for (const auto& row : dataset.rows) {
        if (std::find(order.begin(), order.end(), row.device) == order.end()) order.push_back(row.device);
        ++result.per_device[row.device];
    }
    for (const auto& d : order) {
        if (result.per_device.contains(d)) dataset.devices.push_back(d);
    }
    dataset = nominalize_dataset(std::move(dataset));
    result.rows = dataset.size();
    result.files = MatrixFiles::in(dir);
    save_matrix(dataset, result.files);

    const auto genres = dataset.genres();
    std::ostringstream counts;
    counts << "device\tgenre\tpackets\n";
    for (const auto& d : dataset.devices) {
        counts << d << '\t' << genres.at(d) << '\t' << result.per_device[d] << '\n';
        info("  " + d + ": " + std::to_string(result.per_device[d]) + " packets");
    }
    write_text_file(dir / "counts.tsv", counts.str());
    info("extract: " + std::to_string(result.rows) + " instances from " + std::to_string(dataset.devices.size()) +
         " devices");
    finish_stage(c, Stage::extract);
    return result;
}

MetricReport cmd_score(const PipelineConfig& c) {
    c.validate();
    const auto dataset = load_extracted(c);
    const auto dir = begin_stage(c, Stage::score);
    info("score: " + std::to_string(c.repetitions) + " repetitions over " + std::to_string(dataset.schema.size()) +
         " features");
    auto report = evaluate_features(dataset, c.metrics_options());
    write_text_file(dir / kMetricsJson, metric_report_to_json(report));
    write_text_file(dir / kMetricsTsv, metric_report_to_tsv(report));

    std::vector<std::size_t> order(report.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return report.u_mean[a] > report.u_mean[b]; });
    info("top features by mean suitability:");
    for (std::size_t i = 0; i < std::min<std::size_t>(20, order.size()); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", report.u_mean[order[i]]);
        info("  " + std::string(buf) + "  " + report.features[order[i]]);
    }
    finish_stage(c, Stage::score);
    return report;
}

SelectResult cmd_select(const PipelineConfig& c) {
    c.validate();
    require_stage(c, Stage::score);
    auto report = metric_report_from_json(read_text_file(stage_directory(c, Stage::score) / kMetricsJson));
    const auto dir = begin_stage(c, Stage::select);
    SelectResult result;
    result.features = select_features(report, c.lambda, {c.high_cardinality_bypass, c.always_include});
    result.list = dir / kSelected;
    std::string list;
    for (const auto& f : result.features) list += f + "\n";
    write_text_file(result.list, list);
    write_text_file(dir / kMetricsJson, metric_report_to_json(report));
    write_text_file(dir / kMetricsTsv, metric_report_to_tsv(report));
    const auto bypassed = std::count(report.auto_included.begin(), report.auto_included.end(), true);
    info("select: " + std::to_string(result.features.size()) + " of " + std::to_string(report.size()) +
         " features at lambda " + format_number(c.lambda) + " (" + std::to_string(bypassed) +
         " high-cardinality)");
    finish_stage(c, Stage::select);
    return result;
}

TrainResult cmd_train(const PipelineConfig& c) {
    c.validate();
    require_stage(c, Stage::select);
    const auto features = read_lines(stage_directory(c, Stage::select) / kSelected);
    if (features.empty()) {
        throw ValidationError("no features selected at lambda " + format_number(c.lambda) + "; lower the threshold");
    }
    const auto dataset = select_columns(load_extracted(c), features);
    const auto dir = begin_stage(c, Stage::train);
    const auto split = split_dataset(dataset, c.split_spec());
    info("train: " + std::to_string(split.train.size()) + " training / " + std::to_string(split.validation.size()) +
         " validation instances, " + std::to_string(features.size()) + " features");
    auto model = train_tree(split.train, c.level, c.tree_params());
    model.metadata = {c.seed, c.lambda, c.include_ip, c.train_fraction, std::string(version())};

    TrainResult result;
    result.model = dir / kModel;
    result.train_rows = split.train.size();
    result.validation_rows = split.validation.size();
    result.leaves = model.leaf_count();
    result.depth = model.depth();
    save_model(model, result.model);
    json s;
    s["instances"] = dataset.size();
    s["train_rows"] = result.train_rows;
    s["validation_rows"] = result.validation_rows;
    s["train_fraction"] = c.train_fraction;
    s["seed"] = c.seed;
    write_text_file(dir / "split.json", s.dump(2) + "\n");
    info("train: tree with " + std::to_string(result.leaves) + " leaves, depth " + std::to_string(result.depth));
    finish_stage(c, Stage::train);
    return result;
}

EvaluateResult cmd_evaluate(const PipelineConfig& c, std::span<const Level> levels) {
    c.validate();
    require_stage(c, Stage::train);
    const auto model = load_model(stage_directory(c, Stage::train) / kModel);
    const auto dataset = load_extracted(c);
    const auto dir = begin_stage(c, Stage::evaluate);
    const auto validation = split_dataset(dataset, c.split_spec()).validation;
    const auto genres = dataset.genres();

    EvaluateResult result;
    for (auto level : levels) {
        auto report = evaluate(model, validation, level, genres);
        const auto sub = dir / std::string(to_string(level));
        fs::create_directories(sub);
        write_text_file(sub / "report.json", report.to_json());
        write_text_file(sub / "confusion.csv", report.confusion_csv());
        write_text_file(sub / "per_class.csv", report.per_class_csv());
        info("evaluate: " + std::string(to_string(level)) + "-level accuracy " + percent(report.accuracy) + " (" +
             std::to_string(report.correct) + "/" + std::to_string(report.total) + ")");
        result.directories.push_back(sub);
        result.reports.push_back(std::move(report));
    }
    if (model.level == Level::device) {
        const EvaluationReport* device = nullptr;
        const EvaluationReport* genre = nullptr;
        for (const auto& r : result.reports) (r.level == Level::device ? device : genre) = &r;
        if (device && genre && genre->accuracy + 1e-12 < device->accuracy) {
            throw Error("genre-level accuracy fell below device-level accuracy on the same predictions");
        }
    }
    finish_stage(c, Stage::evaluate);
    return result;
}

namespace {

template <class F>
auto run_stage(Stage stage, F&& body) {
    const std::string prefix = "stage '" + std::string(to_string(stage)) + "': ";
    try {
        return body();
    } catch (const ValidationError& e) {
        throw ValidationError(prefix + e.what());
    } catch (const DataError& e) {
        throw DataError(prefix + e.what());
    } catch (const Error& e) {
        throw Error(prefix + e.what());
    } catch (const fs::filesystem_error& e) {
        throw DataError(prefix + e.what());
    }
}

}  // namespace

PipelineResult cmd_pipeline(const PipelineConfig& c) {
    c.validate();
    PipelineResult result;
    auto step = [&](Stage stage, std::initializer_list<const char*> outputs, auto&& body) {
        if (stage_is_current(c, stage, outputs)) {
            info(std::string(to_string(stage)) + ": up to date, reusing " + stage_directory(c, stage).string());
            result.reused.push_back(stage);
            return;
        }
        run_stage(stage, body);
    };
    step(Stage::extract, {"matrix.tsv", "schema.json", "dictionaries.json"}, [&] { cmd_extract(c); });
    step(Stage::score, {kMetricsJson, kMetricsTsv}, [&] { cmd_score(c); });
    step(Stage::select, {kSelected, kMetricsJson}, [&] { cmd_select(c); });
    step(Stage::train, {kModel}, [&] { cmd_train(c); });
    std::vector<Level> levels;
    if (c.level == Level::device) levels.push_back(Level::device);
    levels.push_back(Level::genre);
    result.evaluation = run_stage(Stage::evaluate, [&] { return cmd_evaluate(c, levels); });
    return result;
}

}  // namespace dfp
