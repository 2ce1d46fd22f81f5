// dfp: device fingerprinting from packet headers.
//
//   dfp extract  --label-map devices.json --capture a.pcap --out run/
//   dfp score    --out run/ --repetitions 2000
//   dfp select   --out run/ --lambda 0.0
//   dfp train    --out run/ --train-fraction 0.7
//   dfp evaluate --out run/ --level genre
//   dfp pipeline --config run.json
//
// Exit status: 0 success, 1 invalid configuration or arguments, 2 data error.

#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dfp/diagnostics.hpp"
#include "dfp/error.hpp"
#include "dfp/pipeline.hpp"
#include "json.hpp"

namespace {

struct Overrides {
    std::string config;
    std::string label_map;
    std::string schema;
    std::vector<std::string> captures;
    std::vector<std::string> field_tables;
    std::string out;
    std::optional<double> lambda;
    bool include_ip = false;
    std::optional<std::size_t> block_size;
    std::optional<std::size_t> blocks;
    std::optional<std::size_t> repetitions;
    std::optional<std::uint64_t> seed;
    std::optional<double> train_fraction;
    std::optional<std::string> level;
    std::optional<std::size_t> threads;
    bool keep_repetitions = false;
    bool to_stdout = false;
    bool quiet = false;
};

void add_common(CLI::App& cmd, Overrides& o) {
    cmd.add_option("-c,--config", o.config, "JSON config file");
    cmd.add_option("--label-map", o.label_map, "device label map (JSON)");
    cmd.add_option("--schema", o.schema, "feature schema (JSON); default: built-in 218 fields");
    cmd.add_option("--capture", o.captures, "pcap file (repeatable)");
    cmd.add_option("--field-table", o.field_tables, "tab-separated field table (repeatable)");
    cmd.add_option("-o,--out", o.out, "output directory");
    cmd.add_option("--lambda", o.lambda, "suitability threshold in [0, 1)");
    cmd.add_flag("--include-ip", o.include_ip, "keep the source IPv4 address as a feature");
    cmd.add_option("--block-size", o.block_size, "packets per block (k)");
    cmd.add_option("--blocks", o.blocks, "blocks per device (b)");
    cmd.add_option("--repetitions", o.repetitions, "metric repetitions (R)");
    cmd.add_option("--seed", o.seed, "master seed (overrides DFP_SEED)");
    cmd.add_option("--train-fraction", o.train_fraction, "training share of the split");
    cmd.add_option("--level", o.level, "device or genre")->check(CLI::IsMember({"device", "genre"}));
    cmd.add_option("--threads", o.threads, "worker threads, 0 = all cores");
    cmd.add_flag("--keep-repetitions", o.keep_repetitions, "store per-repetition suitability in metrics.json");
    cmd.add_flag("--stdout", o.to_stdout, "also write the stage's machine output to standard output");
    cmd.add_flag("-q,--quiet", o.quiet, "only warnings and errors on standard error");
}

dfp::PipelineConfig resolve(const Overrides& o) {
    dfp::PipelineConfig c = o.config.empty() ? dfp::PipelineConfig{} : dfp::load_config(o.config);
    dfp::apply_environment(c);
    if (!o.label_map.empty()) c.label_map = o.label_map;
    if (!o.schema.empty()) c.schema = o.schema;
    for (const auto& p : o.captures) c.captures.emplace_back(p);
    for (const auto& p : o.field_tables) c.field_tables.emplace_back(p);
    if (!o.out.empty()) c.output = o.out;
    if (o.lambda) c.lambda = *o.lambda;
    if (o.include_ip) c.include_ip = true;
    if (o.block_size) c.block_size = *o.block_size;
    if (o.blocks) c.blocks = *o.blocks;
    if (o.repetitions) c.repetitions = *o.repetitions;
    if (o.seed) c.seed = *o.seed;
    if (o.train_fraction) c.train_fraction = *o.train_fraction;
    if (o.level) c.level = dfp::parse_level(*o.level);
    if (o.threads) c.threads = *o.threads;
    if (o.keep_repetitions) c.keep_repetitions = true;
    c.validate();
    return c;
}

std::string reports_json(const dfp::EvaluateResult& r) {
    nlohmann::ordered_json j;
    for (const auto& report : r.reports) j[std::string(dfp::to_string(report.level))] = nlohmann::ordered_json::parse(report.to_json());
    return j.dump(2) + "\n";
}

std::vector<dfp::Level> evaluation_levels(const Overrides& o, const dfp::PipelineConfig& c) {
    if (o.level) return {c.level};
    const auto model = dfp::load_model(dfp::stage_directory(c, dfp::Stage::train) / "model.json");
    if (model.level == dfp::Level::genre) return {dfp::Level::genre};
    return {dfp::Level::device, dfp::Level::genre};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Passive IoT device fingerprinting from packet-header features"};
    app.set_version_flag("--version", std::string(dfp::version()));
    app.require_subcommand(1);
    Overrides o;
    auto* extract = app.add_subcommand("extract", "decode captures into a labeled feature matrix");
    auto* score = app.add_subcommand("score", "compute variability, stability and suitability per feature");
    auto* select = app.add_subcommand("select", "keep features whose mean suitability exceeds lambda");
    auto* train = app.add_subcommand("train", "split the matrix and train a decision tree on the selected features");
    auto* evaluate = app.add_subcommand("evaluate", "score the trained tree on the validation split");
    auto* pipeline = app.add_subcommand("pipeline", "run every stage, reusing up-to-date stage outputs");
    for (auto* cmd : {extract, score, select, train, evaluate, pipeline}) add_common(*cmd, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    if (o.quiet) {
        dfp::set_diagnostic_sink([](dfp::Severity s, std::string_view msg) {
            if (s == dfp::Severity::warning) std::cerr << "warning: " << msg << '\n';
        });
    }

    try {
        const auto c = resolve(o);
        std::string out;
        if (*extract) {
            const auto r = dfp::cmd_extract(c);
            out = dfp::read_text_file(r.files.matrix.parent_path() / "counts.tsv");
        } else if (*score) {
            out = dfp::metric_report_to_tsv(dfp::cmd_score(c));
        } else if (*select) {
            out = dfp::read_text_file(dfp::cmd_select(c).list);
        } else if (*train) {
            out = dfp::read_text_file(dfp::cmd_train(c).model);
        } else if (*evaluate) {
            const auto levels = evaluation_levels(o, c);
            out = reports_json(dfp::cmd_evaluate(c, levels));
        } else if (*pipeline) {
            out = reports_json(dfp::cmd_pipeline(c).evaluation);
        }
        if (o.to_stdout) std::cout << out << std::flush;
        return 0;
    } catch (const dfp::ValidationError& e) {
        std::cerr << "dfp: error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "dfp: error: " << e.what() << '\n';
        return 2;
    }
}
