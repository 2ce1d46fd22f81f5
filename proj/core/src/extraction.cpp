#include "dfp/extraction.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dfp/error.hpp"
#include "json.hpp"

namespace dfp {

FeatureSchema effective_schema(const FeatureSchema& base, const ExtractionPolicy& policy) {
    auto listed = [](const std::vector<std::string>& names, std::string_view name) {
        return std::find(names.begin(), names.end(), name) != names.end();
    };
    auto is_identity = [](std::string_view name) {
        return std::find(kIdentityFields.begin(), kIdentityFields.end(), name) != kIdentityFields.end();
    };

    std::vector<FeatureDef> defs;
    for (const auto& f : base.features()) {
        if (is_identity(f.name) || listed(policy.extra_excluded, f.name)) continue;
        FeatureDef def = f;
        def.always_include = f.always_include || listed(policy.always_include, f.name);
        defs.push_back(std::move(def));
    }
    if (policy.include_ip) {
        defs.push_back({"ip.src", Layer::network, FeatureKind::nominal, listed(policy.always_include, "ip.src")});
    }
    FeatureSchema schema(std::move(defs));
    for (const auto& name : policy.always_include) {
        if (!schema.contains(name)) {
            throw ValidationError("always_include feature '" + name + "' is not in the extracted schema");
        }
    }
    return schema;
}

FeatureExtractor::FeatureExtractor(const FeatureSchema& base, const ExtractionPolicy& policy)
    : schema_(effective_schema(base, policy)) {}

FeatureVector FeatureExtractor::operator()(const PacketRecord& record) const {
    FeatureVector out(schema_.size());
    for (std::size_t j = 0; j < schema_.size(); ++j) {
        const FeatureDef& def = schema_[j];
        const FeatureValue& raw = record.field(def.name);
        if (raw.is_absent()) continue;
        if (def.kind == FeatureKind::nominal && raw.is_numeric()) {
            out[j] = FeatureValue::text(format_number(raw.number()));
        } else if (def.kind == FeatureKind::numeric && raw.is_nominal() && !raw.is_coded()) {
            // A numeric column fed text keeps it as a nominal value unless it
            // parses; codes are then used as the numeric value downstream.
            auto number = parse_number(raw.nominal().text);
            out[j] = number ? FeatureValue::numeric(*number) : raw;
        } else {
            out[j] = raw;
        }
    }
    return out;
}

FeatureVector extract_features(const PacketRecord& record, const FeatureSchema& schema, const ExtractionPolicy& policy) {
    return FeatureExtractor(schema, policy)(record);
}

LabeledDataset build_dataset(const std::vector<LabeledPacket>& packets, const FeatureExtractor& extractor,
                             const std::vector<std::string>& device_order) {
    LabeledDataset ds;
    ds.schema = extractor.schema();
    ds.dictionaries.resize(ds.schema.size());
    ds.rows.reserve(packets.size());
    for (const auto& p : packets) ds.rows.push_back({extractor(p.record), p.device, p.genre});

    for (const auto& name : device_order) {
        const bool present = std::any_of(ds.rows.begin(), ds.rows.end(), [&](const LabeledRow& r) { return r.device == name; });
        if (present && std::find(ds.devices.begin(), ds.devices.end(), name) == ds.devices.end()) {
            ds.devices.push_back(name);
        }
    }
    for (const auto& row : ds.rows) {
        if (std::find(ds.devices.begin(), ds.devices.end(), row.device) == ds.devices.end()) {
            ds.devices.push_back(row.device);
        }
    }
    return ds;
}

LabeledDataset nominalize_dataset(LabeledDataset dataset) {
    dataset.dictionaries.resize(dataset.schema.size());
    for (auto& row : dataset.rows) {
        for (std::size_t j = 0; j < row.values.size() && j < dataset.dictionaries.size(); ++j) {
            FeatureValue& v = row.values[j];
            if (!v.is_nominal() || v.is_coded()) continue;
            Nominal& n = v.nominal();
            n.code = dataset.dictionaries[j].code_for(n.text);
            // The dictionary retains the original string.
            n.text.clear();
            n.text.shrink_to_fit();
        }
    }
    return dataset;
}

std::string character_rendering(const FeatureValue& value) {
    if (value.is_absent()) return std::string(1, kAbsentSymbol);
    if (value.is_numeric()) return format_number(value.number());
    if (!value.is_coded()) throw Error("character rendering of an uncoded nominal value");
    return std::to_string(value.nominal().code);
}

std::string dictionaries_to_json(const LabeledDataset& dataset) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (std::size_t j = 0; j < dataset.dictionaries.size() && j < dataset.schema.size(); ++j) {
        const auto& d = dataset.dictionaries[j];
        if (d.empty()) continue;
        out[dataset.schema[j].name] = std::vector<std::string>(d.entries().begin(), d.entries().end());
    }
    return out.dump(2);
}

void load_dictionaries(LabeledDataset& dataset, std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text.begin(), json_text.end());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("dictionaries: ") + e.what());
    }
    dataset.dictionaries.assign(dataset.schema.size(), {});
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        auto j = dataset.schema.index_of(it.key());
        if (!j) throw DataError("dictionaries: unknown column '" + it.key() + "'");
        for (const auto& s : it.value()) dataset.dictionaries[*j].code_for(s.get<std::string>());
    }
}

MatrixFiles MatrixFiles::in(const std::filesystem::path& directory) {
    return {directory / "matrix.tsv", directory / "schema.json", directory / "dictionaries.json",
            directory / "devices.txt"};
}

void save_matrix(const LabeledDataset& dataset, const MatrixFiles& files) {
    export_field_table(dataset, files.matrix);
    save_schema(dataset.schema, files.schema);
    std::ofstream out(files.dictionaries, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + files.dictionaries.string());
    out << dictionaries_to_json(dataset) << '\n';
    std::ofstream dev(files.devices, std::ios::binary | std::ios::trunc);
    if (!dev) throw DataError("cannot write " + files.devices.string());
    for (const auto& d : dataset.devices) dev << escape_cell(d) << '\n';
}

LabeledDataset load_matrix(const MatrixFiles& files) {
    const FeatureSchema schema = load_schema(files.schema);
    LabeledDataset ds = import_field_table(files.matrix, schema);
    if (std::filesystem::exists(files.dictionaries)) {
        std::ifstream in(files.dictionaries, std::ios::binary);
        std::stringstream buffer;
        buffer << in.rdbuf();
        load_dictionaries(ds, buffer.str());
    }
    if (std::filesystem::exists(files.devices)) {
        // Saved order first; anything the file does not list keeps its place after.
        std::ifstream in(files.devices, std::ios::binary);
        std::vector<std::string> order;
        for (std::string line; std::getline(in, line);) {
            const auto name = unescape_cell(line);
            if (std::find(ds.devices.begin(), ds.devices.end(), name) != ds.devices.end()) order.push_back(name);
        }
        for (const auto& d : ds.devices) {
            if (std::find(order.begin(), order.end(), d) == order.end()) order.push_back(d);
        }
        ds.devices = std::move(order);
    }
    return nominalize_dataset(std::move(ds));
}

}  // namespace dfp
