#include "dfp/model.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dfp/diagnostics.hpp"
#include "dfp/error.hpp"
#include "json.hpp"

namespace dfp {

using nlohmann::json;

std::string_view to_string(Layer layer) {
    switch (layer) {
        case Layer::network: return "network";
        case Layer::transport: return "transport";
        case Layer::application: return "application";
    }
    return "network";
}

std::string_view to_string(FeatureKind kind) {
    return kind == FeatureKind::numeric ? "numeric" : "nominal";
}

Layer parse_layer(std::string_view text) {
    if (text == "network") return Layer::network;
    if (text == "transport") return Layer::transport;
    if (text == "application") return Layer::application;
    throw ValidationError("unknown layer '" + std::string(text) + "'");
}

FeatureKind parse_kind(std::string_view text) {
    if (text == "numeric") return FeatureKind::numeric;
    if (text == "nominal") return FeatureKind::nominal;
    throw ValidationError("unknown feature kind '" + std::string(text) + "'");
}

FeatureSchema::FeatureSchema(std::vector<FeatureDef> features) : features_(std::move(features)) {
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i].name.empty()) {
            throw ValidationError("schema entry " + std::to_string(i) + " has an empty name");
        }
        if (!index_.emplace(features_[i].name, i).second) {
            throw ValidationError("duplicate feature name '" + features_[i].name + "' in schema");
        }
    }
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
    if (auto it = index_.find(name); it != index_.end()) return it->second;
    return std::nullopt;
}

std::size_t FeatureSchema::count(Layer layer) const {
    return static_cast<std::size_t>(
        std::count_if(features_.begin(), features_.end(), [layer](const FeatureDef& f) { return f.layer == layer; }));
}

std::vector<std::string> FeatureSchema::names() const {
    std::vector<std::string> out;
    out.reserve(features_.size());
    for (const auto& f : features_) out.push_back(f.name);
    return out;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

json parse_json(std::string_view text, std::string_view what) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

std::string schema_to_json(const FeatureSchema& schema) {
    json out = json::array();
    for (const auto& f : schema.features()) {
        out.push_back({{"name", f.name},
                       {"layer", to_string(f.layer)},
                       {"kind", to_string(f.kind)},
                       {"always_include", f.always_include}});
    }
    return out.dump(2);
}

FeatureSchema schema_from_json(std::string_view text) {
    const json doc = parse_json(text, "schema");
    if (!doc.is_array()) throw ValidationError("schema: expected a JSON array");
    std::vector<FeatureDef> defs;
    defs.reserve(doc.size());
    try {
        for (const auto& item : doc) {
            FeatureDef def;
            def.name = item.at("name").get<std::string>();
            def.layer = parse_layer(item.at("layer").get<std::string>());
            def.kind = parse_kind(item.value("kind", std::string("numeric")));
            def.always_include = item.value("always_include", false);
            defs.push_back(std::move(def));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("schema: ") + e.what());
    }
    return FeatureSchema(std::move(defs));
}

FeatureSchema load_schema(const std::filesystem::path& path) { return schema_from_json(read_file(path)); }

void save_schema(const FeatureSchema& schema, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << schema_to_json(schema) << '\n';
}

// ---------------------------------------------------------------------------

std::string format_mac(const MacAddress& mac) {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2], mac[3], mac[4], mac[5]);
    return buf;
}

std::optional<MacAddress> parse_mac(std::string_view text) {
    if (text.size() != 17) return std::nullopt;
    MacAddress mac{};
    for (std::size_t i = 0; i < 6; ++i) {
        const auto part = text.substr(i * 3, 2);
        if (i < 5 && text[i * 3 + 2] != ':' && text[i * 3 + 2] != '-') return std::nullopt;
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value, 16);
        if (ec != std::errc{} || ptr != part.data() + part.size()) return std::nullopt;
        mac[i] = static_cast<std::uint8_t>(value);
    }
    return mac;
}

std::string format_ipv4(std::uint32_t address) {
    return std::to_string(address >> 24) + '.' + std::to_string((address >> 16) & 0xff) + '.' +
           std::to_string((address >> 8) & 0xff) + '.' + std::to_string(address & 0xff);
}

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
    std::uint32_t out = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
        unsigned value = 0;
        auto [next, ec] = std::from_chars(p, end, value);
        if (ec != std::errc{} || next == p || next - p > 3 || value > 255) return std::nullopt;
        out = (out << 8) | value;
        p = next;
    }
    if (p != end) return std::nullopt;
    return out;
}

double seconds_between(const Timestamp& from, const Timestamp& to) {
    return static_cast<double>(to.seconds - from.seconds) +
           (static_cast<double>(to.nanos) - static_cast<double>(from.nanos)) * 1e-9;
}

std::string format_number(double value) {
    if (value == 0) return "0";  // folds -0
    char buf[400];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
    if (ec != std::errc{}) return std::to_string(value);
    return std::string(buf, end);
}

std::optional<double> parse_number(std::string_view text) {
    if (text.empty()) return std::nullopt;
    bool negative = false;
    std::string_view body = text;
    if (body.front() == '-') {
        negative = true;
        body.remove_prefix(1);
    }
    if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
        body.remove_prefix(2);
        unsigned long long v = 0;
        auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v, 16);
        if (ec != std::errc{} || ptr != body.data() + body.size()) return std::nullopt;
        return negative ? -static_cast<double>(v) : static_cast<double>(v);
    }
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

const FeatureValue& PacketRecord::field(std::string_view name) const {
    static const FeatureValue absent;
    if (auto it = fields.find(name); it != fields.end()) return it->second;
    return absent;
}

// ---------------------------------------------------------------------------

LabelMap::LabelMap(std::vector<DeviceEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.name.empty()) throw ValidationError("label map entry " + std::to_string(i) + " has no device name");
        if (auto mac = parse_mac(e.key)) {
            if (!by_mac_.emplace(*mac, i).second) throw ValidationError("duplicate label map key " + e.key);
        } else if (auto ip = parse_ipv4(e.key)) {
            if (!by_ip_.emplace(*ip, i).second) throw ValidationError("duplicate label map key " + e.key);
        } else {
            throw ValidationError("label map key '" + e.key + "' is neither a MAC nor an IPv4 address");
        }
    }
}

const DeviceEntry* LabelMap::match_source(const PacketRecord& record) const {
    if (auto it = by_mac_.find(record.src_mac); it != by_mac_.end()) return &entries_[it->second];
    if (record.src_ip) {
        if (auto it = by_ip_.find(*record.src_ip); it != by_ip_.end()) return &entries_[it->second];
    }
    return nullptr;
}

std::vector<std::string> LabelMap::device_names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) {
        if (std::find(out.begin(), out.end(), e.name) == out.end()) out.push_back(e.name);
    }
    return out;
}

LabelMap label_map_from_json(std::string_view text) {
    const json doc = parse_json(text, "label map");
    std::vector<DeviceEntry> entries;
    try {
        for (const auto& item : doc.at("devices")) {
            entries.push_back({item.at("key").get<std::string>(), item.at("name").get<std::string>(),
                               item.at("manufacturer").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("label map: ") + e.what());
    }
    return LabelMap(std::move(entries));
}

LabelMap load_label_map(const std::filesystem::path& path) { return label_map_from_json(read_file(path)); }

std::string label_map_to_json(const LabelMap& map) {
    json devices = json::array();
    for (const auto& e : map.entries()) {
        devices.push_back({{"key", e.key}, {"name", e.name}, {"manufacturer", e.manufacturer}});
    }
    return json{{"devices", devices}}.dump(2);
}

GenreMap build_genre_map(const LabelMap& label_map) {
    if (label_map.empty()) throw ValidationError("label map is empty");

    std::map<std::string, std::string, std::less<>> manufacturer_of;
    std::map<std::string, std::set<std::string>, std::less<>> devices_of;
    for (const auto& e : label_map.entries()) {
        auto [it, inserted] = manufacturer_of.emplace(e.name, e.manufacturer);
        if (!inserted && it->second != e.manufacturer) {
            throw ValidationError("device '" + e.name + "' is listed under manufacturers '" + it->second +
                                  "' and '" + e.manufacturer + "'");
        }
        devices_of[e.manufacturer].insert(e.name);
    }

    GenreMap genres;
    for (const auto& [device, manufacturer] : manufacturer_of) {
        genres.emplace(device, devices_of[manufacturer].size() >= 2 ? manufacturer : device);
    }
    return genres;
}

// ---------------------------------------------------------------------------

std::int32_t NominalDictionary::code_for(std::string_view text) {
    if (auto it = index_.find(text); it != index_.end()) return it->second;
    const auto code = static_cast<std::int32_t>(entries_.size());
    entries_.emplace_back(text);
    index_.emplace(std::string(text), code);
    return code;
}

std::optional<std::int32_t> NominalDictionary::find(std::string_view text) const {
    if (auto it = index_.find(text); it != index_.end()) return it->second;
    return std::nullopt;
}

const std::string& NominalDictionary::text(std::int32_t code) const {
    if (code < 0 || static_cast<std::size_t>(code) >= entries_.size()) {
        throw Error("nominal code " + std::to_string(code) + " out of range");
    }
    return entries_[static_cast<std::size_t>(code)];
}

void LabeledDataset::validate() const {
    if (!dictionaries.empty() && dictionaries.size() != schema.size()) {
        throw DataError("dataset has " + std::to_string(dictionaries.size()) + " dictionaries for " +
                        std::to_string(schema.size()) + " columns");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].values.size() != schema.size()) {
            throw DataError("row " + std::to_string(r) + " has " + std::to_string(rows[r].values.size()) +
                            " values, schema has " + std::to_string(schema.size()));
        }
    }
}

GenreMap LabeledDataset::genres() const {
    GenreMap out;
    for (const auto& row : rows) out.emplace(row.device, row.genre);
    return out;
}

void BlockPlan::validate() const {
    if (block_size < 1) throw ValidationError("block size must be at least 1");
    if (blocks < 1) throw ValidationError("blocks per device must be at least 1");
}

namespace {

DiagnosticSink& sink() {
    static DiagnosticSink current = [](Severity severity, std::string_view message) {
        std::fprintf(stderr, "%s%.*s\n", severity == Severity::warning ? "warning: " : "",
                     static_cast<int>(message.size()), message.data());
    };
    return current;
}

}  // namespace

void set_diagnostic_sink(DiagnosticSink s) { sink() = std::move(s); }

void info(std::string_view message) {
    if (auto& s = sink()) s(Severity::info, message);
}

void warn(std::string_view message) {
    if (auto& s = sink()) s(Severity::warning, message);
}

}  // namespace dfp
