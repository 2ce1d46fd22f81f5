#pragma once

// Character-level metric-entropy and the variability / stability /
// suitability feature scores computed over blocks of packets per device.

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dfp/model.hpp"
#include "dfp/random.hpp"

namespace dfp {

/// Character histogram of a concatenation of rendered feature values.
class FeatureString {
public:
    FeatureString() = default;
    explicit FeatureString(std::string_view chars) { append(chars); }

    void append(std::string_view chars);
    void append(const FeatureString& other);
    void append(const FeatureValue& value);

    std::uint64_t length() const { return length_; }
    std::size_t distinct() const;
    std::uint64_t count(unsigned char ch) const { return counts_[ch]; }
    const std::array<std::uint64_t, 256>& counts() const { return counts_; }

private:
    std::array<std::uint64_t, 256> counts_{};
    std::uint64_t length_ = 0;
};

/// Shannon entropy (bits) of the character distribution divided by the
/// string length. 0 for an empty string or a single repeated character;
/// always below 1.
double metric_entropy(const FeatureString& s);
double metric_entropy(std::string_view chars);
/// Same quantity from raw counts, summed in the order given.
double metric_entropy(std::span<const std::uint64_t> counts, std::uint64_t length);

/// Row indices of one block.
using Block = std::vector<std::size_t>;

struct BlockSampling {
    std::vector<Block> blocks;
    /// Fewer than plan.blocks blocks could be formed.
    bool short_of_plan = false;
};

/// Up to plan.blocks disjoint blocks of exactly plan.block_size rows, drawn
/// without replacement from `rows`. Returns no blocks when rows.size() <
/// block_size.
BlockSampling make_blocks(std::span<const std::size_t> rows, const BlockPlan& plan, Rng& rng);

/// v[j]: metric-entropy of feature j concatenated over one block per device.
std::vector<double> variability_vector(const LabeledDataset& dataset, std::span<const Block> one_block_per_device);
/// sd[j] = 1 - metric-entropy of feature j over all of one device's blocks.
std::vector<double> device_stability_vector(const LabeledDataset& dataset, std::span<const Block> device_blocks);
/// Per-feature mean of the device stability vectors.
std::vector<double> stability_vector(std::span<const std::vector<double>> device_vectors);
/// Elementwise v * s.
std::vector<double> suitability_vector(std::span<const double> v, std::span<const double> s);

struct MetricsOptions {
    BlockPlan plan;
    std::size_t repetitions = 2000;
    /// A feature whose distinct-value count reaches this fraction of the
    /// packets sampled in the final repetition bypasses the threshold.
    double distinct_cap_fraction = 0.9;
    bool keep_repetitions = false;
    std::size_t threads = 0;

    void validate() const;
};

/// Blocks used by one repetition, per eligible device (dataset device order).
struct RepetitionDraw {
    std::vector<std::string> devices;
    std::vector<std::vector<Block>> blocks;
    /// Index into blocks[d] of the block each device contributes to v.
    std::vector<std::size_t> variability_block;
};

/// Deterministic draw for repetition `repetition` under options.plan.seed.
RepetitionDraw draw_repetition(const LabeledDataset& dataset, const MetricsOptions& options, std::size_t repetition);

struct MetricReport {
    std::vector<std::string> features;
    std::vector<bool> always_include;
    /// From the final repetition: u == v * s elementwise.
    std::vector<double> v;
    std::vector<double> s;
    std::vector<double> u;
    std::vector<std::vector<double>> sd;
    std::vector<std::string> sd_devices;
    /// Mean of u over all repetitions, the score used for selection.
    std::vector<double> u_mean;
    std::vector<std::size_t> distinct_count;
    std::vector<bool> auto_included;
    std::vector<bool> selected;
    double lambda = std::numeric_limits<double>::quiet_NaN();

    std::size_t repetitions = 0;
    std::size_t sampled_packets = 0;
    std::uint64_t seed = 0;
    std::size_t block_size = 0;
    std::size_t blocks = 0;
    std::vector<std::string> devices;
    std::vector<std::string> excluded_devices;
    std::vector<std::vector<double>> u_per_repetition;

    std::size_t size() const { return features.size(); }
};

/// Runs `repetitions` independent draws and averages u. Requires at least two
/// devices with block_size packets each; devices with fewer are listed in
/// excluded_devices.
MetricReport evaluate_features(const LabeledDataset& dataset, const MetricsOptions& options);

struct SelectionPolicy {
    bool high_cardinality_bypass = true;
    std::vector<std::string> always_include;
};

/// Features with u_mean > lambda, plus always-included and (per policy)
/// high-cardinality features, in report order. Also records the verdicts in
/// report.selected / report.lambda. lambda must lie in [0, 1).
std::vector<std::string> select_features(MetricReport& report, double lambda, const SelectionPolicy& policy = {});

std::string metric_report_to_tsv(const MetricReport& report);
std::string metric_report_to_json(const MetricReport& report);
MetricReport metric_report_from_json(std::string_view text);

}  // namespace dfp
