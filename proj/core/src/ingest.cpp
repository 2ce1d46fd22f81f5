#include "dfp/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dfp/diagnostics.hpp"
#include "dfp/error.hpp"
#include "dfp/pcap.hpp"
#include "parallel.hpp"

namespace dfp {

DecodedCapture decode_capture(const std::filesystem::path& path) {
    PcapReader reader(path);
    PacketDecoder decoder;
    DecodedCapture out;
    while (auto frame = reader.next()) {
        if (auto record = decoder.decode(frame->data, frame->timestamp)) out.records.push_back(std::move(*record));
    }
    out.stats = decoder.stats();
    return out;
}

std::vector<DecodedCapture> decode_captures(std::span<const std::filesystem::path> paths, std::size_t threads) {
    std::vector<DecodedCapture> out(paths.size());
    detail::parallel_for(paths.size(), threads, [&](std::size_t i) { out[i] = decode_capture(paths[i]); });
    return out;
}

FilterResult label_and_filter(std::vector<PacketRecord> records, const LabelMap& label_map) {
    const GenreMap genres = build_genre_map(label_map);
    FilterResult out;
    for (auto& record : records) {
        const DeviceEntry* entry = label_map.match_source(record);
        if (!entry) {
            ++out.dropped;
            continue;
        }
        ++out.per_device[entry->name];
        out.packets.push_back({std::move(record), entry->name, genres.find(entry->name)->second});
    }
    if (out.packets.empty()) {
        warn("no packet originated from a device in the label map (" + std::to_string(out.dropped) + " dropped)");
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string escape_cell(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        switch (ch) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case ',': out += "\\,"; break;
            case ';': out += "\\;"; break;
            default: out.push_back(ch);
        }
    }
    return out;
}

std::string unescape_cell(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '\\' || i + 1 == text.size()) {
            out.push_back(text[i]);
            continue;
        }
        const char next = text[++i];
        switch (next) {
            case 't': out.push_back('\t'); break;
            case 'n': out.push_back('\n'); break;
            case 'r': out.push_back('\r'); break;
            default: out.push_back(next);
        }
    }
    return out;
}

namespace {

/// Splits on delimiters not preceded by an escaping backslash.
std::vector<std::string_view> split_cells(std::string_view line, char delimiter) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\') {
            ++i;
        } else if (line[i] == delimiter) {
            cells.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    cells.push_back(line.substr(start));
    return cells;
}

/// A numeric cell; tshark writes repeated fields as "a,b", of which the
/// first occurrence is used.
std::optional<double> numeric_cell(std::string_view cell) {
    if (auto v = parse_number(cell)) return v;
    const auto comma = cell.find(',');
    if (comma != std::string_view::npos) return parse_number(cell.substr(0, comma));
    return std::nullopt;
}

}  // namespace

LabeledDataset import_field_table(const std::filesystem::path& path, const FeatureSchema& schema,
                                  const FieldTableOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open field table " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty field table");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_cells(line, options.delimiter);

    enum class Role { feature, device, genre, eth_src, ip_src };
    struct Column {
        Role role;
        std::size_t feature = 0;
    };
    std::vector<Column> columns;
    std::vector<std::string> unknown;
    std::set<std::string, std::less<>> seen;
    for (auto name_view : header) {
        const std::string name = unescape_cell(name_view);
        if (!seen.insert(name).second) throw ValidationError(path.string() + ": duplicate column '" + name + "'");
        if (auto idx = schema.index_of(name)) {
            columns.push_back({Role::feature, *idx});
        } else if (name == kDeviceColumn) {
            columns.push_back({Role::device});
        } else if (name == kGenreColumn) {
            columns.push_back({Role::genre});
        } else if (name == kEthSrcColumn) {
            columns.push_back({Role::eth_src});
        } else if (name == "ip.src" && options.label_map) {
            columns.push_back({Role::ip_src});
        } else {
            unknown.push_back(name);
        }
    }
    if (!unknown.empty()) {
        std::string list;
        for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
        throw ValidationError(path.string() + ": unknown column(s): " + list);
    }
    const bool has_device = seen.contains(kDeviceColumn);
    const bool has_genre = seen.contains(kGenreColumn);
    if (!has_device && !options.label_map) {
        throw ValidationError(path.string() + ": no 'device' column and no label map to derive labels");
    }
    const auto ip_src_feature = schema.index_of("ip.src");

    GenreMap genres;
    if (options.label_map) genres = build_genre_map(*options.label_map);

    LabeledDataset ds;
    ds.schema = schema;
    ds.dictionaries.resize(schema.size());
    std::uint64_t dropped = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_cells(line, options.delimiter);
        if (cells.size() != columns.size()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(columns.size()) + " fields, found " + std::to_string(cells.size()));
        }
        LabeledRow row;
        row.values.resize(schema.size());
        PacketRecord identity;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const std::string cell = unescape_cell(cells[c]);
            switch (columns[c].role) {
                case Role::device: row.device = cell; break;
                case Role::genre: row.genre = cell; break;
                case Role::eth_src:
                    if (auto mac = parse_mac(cell)) identity.src_mac = *mac;
                    break;
                case Role::ip_src: identity.src_ip = parse_ipv4(cell); break;
                case Role::feature: {
                    const auto j = columns[c].feature;
                    if (ip_src_feature && j == *ip_src_feature) identity.src_ip = parse_ipv4(cell);
                    if (cell.empty()) break;
                    if (schema[j].kind == FeatureKind::nominal) {
                        row.values[j] = FeatureValue::text(cell);
                    } else if (auto v = numeric_cell(cell)) {
                        row.values[j] = FeatureValue::numeric(*v);
                    } else {
                        throw DataError(path.string() + ":" + std::to_string(line_no) + ": column '" +
                                        schema[j].name + "' expects a number, found '" + cell + "'");
                    }
                    break;
                }
            }
        }
        if (!has_device) {
            const DeviceEntry* entry = options.label_map->match_source(identity);
            if (!entry) {
                ++dropped;
                continue;
            }
            row.device = entry->name;
        }
        if (row.device.empty()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty device label");
        }
        if (!has_genre || row.genre.empty()) {
            auto it = genres.find(row.device);
            row.genre = it != genres.end() ? it->second : row.device;
        }
        ds.rows.push_back(std::move(row));
    }
    if (dropped > 0) info(path.string() + ": " + std::to_string(dropped) + " rows from unlisted sources dropped");

    if (options.label_map) {
        for (const auto& name : options.label_map->device_names()) ds.devices.push_back(name);
    }
    for (const auto& row : ds.rows) {
        if (std::find(ds.devices.begin(), ds.devices.end(), row.device) == ds.devices.end()) {
            ds.devices.push_back(row.device);
        }
    }
    // Devices that never appear in the rows are not part of the dataset.
    std::set<std::string, std::less<>> present;
    for (const auto& row : ds.rows) present.insert(row.device);
    std::erase_if(ds.devices, [&](const std::string& d) { return !present.contains(d); });
    return ds;
}

void export_field_table(const LabeledDataset& dataset, const std::filesystem::path& path, char delimiter) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& f : dataset.schema.features()) out << escape_cell(f.name) << delimiter;
    out << kDeviceColumn << delimiter << kGenreColumn << '\n';
    for (const auto& row : dataset.rows) {
        for (std::size_t j = 0; j < row.values.size(); ++j) {
            const auto& v = row.values[j];
            if (v.is_numeric()) {
                out << format_number(v.number());
            } else if (v.is_nominal()) {
                const auto& n = v.nominal();
                const bool use_dictionary = n.text.empty() && n.code >= 0 && j < dataset.dictionaries.size();
                out << escape_cell(use_dictionary ? dataset.dictionaries[j].text(n.code) : n.text);
            }
            out << delimiter;
        }
        out << escape_cell(row.device) << delimiter << escape_cell(row.genre) << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace dfp
