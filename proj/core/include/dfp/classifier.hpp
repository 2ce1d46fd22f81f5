#pragma once

// Train/validation split, a C4.5-style decision tree with pessimistic
// pruning, model serialization and evaluation.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dfp/model.hpp"

namespace dfp {

enum class Level { device, genre };

std::string_view to_string(Level level);
Level parse_level(std::string_view text);

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DatasetSplit {
    LabeledDataset train;
    LabeledDataset validation;
    /// Source row indices, each in original dataset order.
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> validation_rows;
};

/// round(train_fraction * n) rows for training, chosen by a seeded shuffle.
/// Throws ValidationError if either part would be empty.
DatasetSplit split_dataset(const LabeledDataset& dataset, const SplitSpec& spec);

/// Copy of `dataset` restricted to the named columns, in the given order.
LabeledDataset select_columns(const LabeledDataset& dataset, std::span<const std::string> names);

struct TreeParams {
    /// Minimum instances in at least two branches of a split.
    std::size_t min_leaf = 2;
    /// Confidence factor of the pessimistic error estimate.
    double confidence = 0.25;
    bool prune = true;

    void validate() const;
};

enum class SplitKind { leaf, threshold, presence, nominal };

std::string_view to_string(SplitKind kind);

struct TreeNode {
    SplitKind kind = SplitKind::leaf;
    std::size_t feature = 0;
    /// threshold: value <= threshold -> children[0], otherwise children[1].
    /// presence: present -> children[0], absent -> children[1].
    double threshold = 0.0;
    /// nominal: code codes[i] -> children[i].
    std::vector<std::int32_t> codes;
    std::vector<std::size_t> children;
    /// Child for absent values, when absent values were seen in training.
    std::optional<std::size_t> absent_child;
    /// Child for anything else unroutable: the branch with most training rows.
    std::size_t default_child = 0;
    std::size_t label = 0;
    std::vector<double> class_counts;

    bool is_leaf() const { return kind == SplitKind::leaf; }
};

struct ModelMetadata {
    std::uint64_t seed = 0;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    bool include_ip = false;
    double train_fraction = 0.7;
    std::string tool_version;
};

struct Prediction {
    std::size_t label = 0;
    /// Share of the reached leaf's training rows that carry the label.
    double confidence = 0.0;
};

class DecisionTreeModel {
public:
    Level level = Level::device;
    std::vector<std::string> classes;
    FeatureSchema schema;
    /// Per schema column; empty for numeric columns.
    std::vector<NominalDictionary> dictionaries;
    TreeParams params;
    ModelMetadata metadata;
    std::vector<TreeNode> nodes;  ///< nodes[0] is the root

    /// Values must follow `schema` and this model's nominal codes.
    Prediction predict(std::span<const FeatureValue> values) const;
    /// Predictions for every row of a dataset whose columns are matched by
    /// name and whose nominal codes are translated through the dictionaries.
    std::vector<Prediction> predict(const LabeledDataset& dataset) const;

    std::size_t leaf_count() const;
    std::size_t depth() const;
};

struct SplitCandidate {
    std::size_t feature = 0;
    SplitKind kind = SplitKind::leaf;
    double threshold = 0.0;
    std::vector<std::int32_t> codes;
    double gain = 0.0;
    double gain_ratio = 0.0;
};

/// Class labels for every row at the given level, as indices into `classes`.
std::vector<std::size_t> class_labels(const LabeledDataset& dataset, Level level, std::vector<std::string>& classes);

/// The split the tree would choose for `rows` of a nominalized dataset, or
/// nullopt when no split is admissible.
std::optional<SplitCandidate> find_best_split(const LabeledDataset& dataset, std::span<const std::size_t> rows,
                                              std::span<const std::size_t> labels, std::size_t class_count,
                                              const TreeParams& params);

/// Expected extra errors above `errors` among `n` instances at confidence
/// factor cf (upper confidence bound of the binomial error rate).
double pessimistic_extra_errors(double n, double errors, double cf);

/// Requires a nominalized dataset with at least one column and one row.
DecisionTreeModel train_tree(const LabeledDataset& train, Level level, const TreeParams& params = {});

inline constexpr std::string_view kModelFormat = "dfp-tree";
inline constexpr int kModelVersion = 1;

std::string serialize_model(const DecisionTreeModel& model);
DecisionTreeModel deserialize_model(std::string_view text);
void save_model(const DecisionTreeModel& model, const std::filesystem::path& path);
DecisionTreeModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct ClassMetrics {
    std::string label;
    std::size_t support = 0;
    std::size_t predicted = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvaluationReport {
    Level level = Level::device;
    std::vector<std::string> classes;
    /// confusion[actual][predicted]
    std::vector<std::vector<std::size_t>> confusion;
    std::size_t total = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<ClassMetrics> per_class;

    std::string to_json() const;
    std::string confusion_csv() const;
    std::string per_class_csv() const;
};

/// Scores predictions against the rows' labels at `level`. A device-level
/// model is scored at genre level by mapping both sides through `genres`
/// (the validation rows' own genres when empty).
EvaluationReport evaluate(const DecisionTreeModel& model, const LabeledDataset& validation, Level level,
                          const GenreMap& genres = {});

/// Report from parallel lists of actual and predicted class names.
EvaluationReport score_predictions(Level level, std::vector<std::string> classes,
                                   std::span<const std::string> actual, std::span<const std::string> predicted);

}  // namespace dfp
