#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dfp/ingest.hpp"
#include "dfp/model.hpp"

namespace dfp {

/// Which columns leave the extraction stage.
struct ExtractionPolicy {
    /// Append the packet's source IPv4 as a trailing nominal column "ip.src".
    bool include_ip = false;
    std::vector<std::string> extra_excluded;
    std::vector<std::string> always_include;
};

/// Base schema minus exclusions and identity fields, with always_include
/// flags applied and "ip.src" appended when include_ip is set. Throws
/// ValidationError for an always_include name that is not in the result.
FeatureSchema effective_schema(const FeatureSchema& base, const ExtractionPolicy& policy);

/// Projects decoded packets onto a fixed output schema.
class FeatureExtractor {
public:
    FeatureExtractor(const FeatureSchema& base, const ExtractionPolicy& policy);

    const FeatureSchema& schema() const { return schema_; }
    FeatureVector operator()(const PacketRecord& record) const;

private:
    FeatureSchema schema_;
};

FeatureVector extract_features(const PacketRecord& record, const FeatureSchema& schema, const ExtractionPolicy& policy);

/// Feature rows for labeled packets, in packet order. `device_order` fixes
/// the dataset's device presentation order; devices missing from it are
/// appended by first appearance. Nominal cells stay uncoded.
LabeledDataset build_dataset(const std::vector<LabeledPacket>& packets, const FeatureExtractor& extractor,
                             const std::vector<std::string>& device_order = {});

/// Replaces every text cell by a dense per-column code, assigned in
/// first-occurrence order scanning rows top to bottom. Existing dictionary
/// entries and already-coded cells are kept, so the pass is idempotent.
LabeledDataset nominalize_dataset(LabeledDataset dataset);

/// Character string a value contributes to metric-entropy strings: base-10
/// digits for numbers and nominal codes, "N" for Absent. Throws Error for an
/// uncoded nominal value.
std::string character_rendering(const FeatureValue& value);

inline constexpr char kAbsentSymbol = 'N';

/// {"<column>": ["first string", "second string", ...], ...} for every
/// non-empty dictionary.
std::string dictionaries_to_json(const LabeledDataset& dataset);
/// Seeds dataset.dictionaries from JSON written by dictionaries_to_json.
void load_dictionaries(LabeledDataset& dataset, std::string_view json_text);

/// Matrix + schema + dictionaries, as written by the extract stage.
struct MatrixFiles {
    std::filesystem::path matrix;
    std::filesystem::path schema;
    std::filesystem::path dictionaries;
    /// Device presentation order, one name per line.
    std::filesystem::path devices;

    static MatrixFiles in(const std::filesystem::path& directory);
};

void save_matrix(const LabeledDataset& dataset, const MatrixFiles& files);
/// Loads and nominalizes a matrix with the dictionaries it was saved with.
LabeledDataset load_matrix(const MatrixFiles& files);

}  // namespace dfp
