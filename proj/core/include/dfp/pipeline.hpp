#pragma once

// End-to-end stages (extract, score, select, train, evaluate) driven by one
// resolved configuration. Every stage writes into its own directory under
// the run directory, together with config.json (resolved config + tool
// version).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dfp/classifier.hpp"
#include "dfp/extraction.hpp"
#include "dfp/metrics.hpp"

namespace dfp {

std::string_view version();

struct PipelineConfig {
    std::vector<std::filesystem::path> captures;
    std::vector<std::filesystem::path> field_tables;
    char delimiter = '\t';
    std::filesystem::path label_map;
    std::optional<std::filesystem::path> schema;

    bool include_ip = false;
    std::vector<std::string> exclude;
    std::vector<std::string> always_include;

    std::size_t block_size = 10;
    std::size_t blocks = 10;
    std::size_t repetitions = 2000;
    double distinct_cap = 0.9;
    bool high_cardinality_bypass = true;
    bool keep_repetitions = false;
    double lambda = 0.0;

    double train_fraction = 0.7;
    Level level = Level::device;
    std::size_t min_leaf = 2;
    double confidence = 0.25;
    bool prune = true;

    std::filesystem::path output = "dfp-out";
    std::uint64_t seed = 1;
    std::size_t threads = 0;

    /// Throws ValidationError on the first invalid setting. Checks that the
    /// label map and every input file exist.
    void validate() const;

    ExtractionPolicy policy() const;
    MetricsOptions metrics_options() const;
    SplitSpec split_spec() const;
    TreeParams tree_params() const;

    /// include_ip runs go to their own subdirectory.
    std::filesystem::path run_directory() const;
};

/// Parses a JSON config. Relative paths are taken relative to `base`.
/// Unknown keys are rejected.
PipelineConfig config_from_json(std::string_view text, const std::filesystem::path& base = {});
PipelineConfig load_config(const std::filesystem::path& path);
/// Fully resolved config as JSON, every default spelled out.
std::string config_to_json(const PipelineConfig& config);

/// Applies DFP_SEED from the environment, if set.
void apply_environment(PipelineConfig& config);

enum class Stage { extract, score, select, train, evaluate };
std::string_view to_string(Stage stage);
std::filesystem::path stage_directory(const PipelineConfig& config, Stage stage);

struct ExtractResult {
    MatrixFiles files;
    std::size_t rows = 0;
    std::map<std::string, std::uint64_t> per_device;
    DecodeStats decode;
    std::uint64_t dropped = 0;
};

struct SelectResult {
    std::vector<std::string> features;
    std::filesystem::path list;
};

struct TrainResult {
    std::filesystem::path model;
    std::size_t train_rows = 0;
    std::size_t validation_rows = 0;
    std::size_t leaves = 0;
    std::size_t depth = 0;
};

struct EvaluateResult {
    std::vector<EvaluationReport> reports;
    std::vector<std::filesystem::path> directories;
};

ExtractResult cmd_extract(const PipelineConfig& config);
MetricReport cmd_score(const PipelineConfig& config);
SelectResult cmd_select(const PipelineConfig& config);
TrainResult cmd_train(const PipelineConfig& config);
/// Scores the trained model on the validation part at the given levels.
EvaluateResult cmd_evaluate(const PipelineConfig& config, std::span<const Level> levels);

struct PipelineResult {
    EvaluateResult evaluation;
    /// Stages whose cached outputs were reused.
    std::vector<Stage> reused;
};

/// All stages in order. A stage is skipped when its directory holds outputs
/// produced from the same inputs and settings. Failures are rethrown with
/// the stage name prepended.
PipelineResult cmd_pipeline(const PipelineConfig& config);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace dfp
