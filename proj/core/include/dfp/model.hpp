#pragma once

// Shared domain vocabulary: feature schema, feature values, decoded packets,
// device labels and labeled datasets.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dfp {

enum class Layer { network, transport, application };
enum class FeatureKind { numeric, nominal };

std::string_view to_string(Layer layer);
std::string_view to_string(FeatureKind kind);
Layer parse_layer(std::string_view text);
FeatureKind parse_kind(std::string_view text);

struct FeatureDef {
    std::string name;
    Layer layer = Layer::network;
    FeatureKind kind = FeatureKind::numeric;
    bool always_include = false;

    bool operator==(const FeatureDef&) const = default;
};

/// Ordered, name-unique list of header fields. Column order of every feature
/// matrix, metric report and model follows the schema order.
class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<FeatureDef> features);

    std::size_t size() const { return features_.size(); }
    bool empty() const { return features_.empty(); }
    const FeatureDef& operator[](std::size_t i) const { return features_[i]; }
    std::span<const FeatureDef> features() const { return features_; }

    std::optional<std::size_t> index_of(std::string_view name) const;
    bool contains(std::string_view name) const { return index_of(name).has_value(); }
    std::size_t count(Layer layer) const;
    std::vector<std::string> names() const;

    bool operator==(const FeatureSchema& other) const { return features_ == other.features_; }

private:
    std::vector<FeatureDef> features_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// The shipped 218-field schema (33 network, 64 transport, 121 application).
/// Source and destination address and the IPv4 header checksum are not part
/// of it.
const FeatureSchema& default_schema();

/// Fields a decoded packet may carry that are outside the default schema.
inline constexpr std::array<std::string_view, 3> kIdentityFields{"ip.src", "ip.dst", "ip.checksum"};

std::string schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(std::string_view text);
FeatureSchema load_schema(const std::filesystem::path& path);
void save_schema(const FeatureSchema& schema, const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct Absent {
    bool operator==(const Absent&) const = default;
};

/// String-valued field. `code` is -1 until the owning dataset is nominalized.
struct Nominal {
    static constexpr std::int32_t kUnassigned = -1;

    std::int32_t code = kUnassigned;
    std::string text;

    bool operator==(const Nominal&) const = default;
};

/// Value of one header field in one packet. Absent means the field's protocol
/// does not occur in the packet; it is never the same as numeric zero.
class FeatureValue {
public:
    FeatureValue() = default;

    static FeatureValue absent() { return {}; }
    static FeatureValue numeric(double value) { return FeatureValue(value); }
    static FeatureValue text(std::string value) { return FeatureValue(Nominal{Nominal::kUnassigned, std::move(value)}); }
    static FeatureValue nominal(std::int32_t code, std::string value = {}) {
        return FeatureValue(Nominal{code, std::move(value)});
    }

    bool is_absent() const { return std::holds_alternative<Absent>(value_); }
    bool is_numeric() const { return std::holds_alternative<double>(value_); }
    bool is_nominal() const { return std::holds_alternative<Nominal>(value_); }
    bool is_coded() const { return is_nominal() && nominal().code != Nominal::kUnassigned; }

    double number() const { return std::get<double>(value_); }
    const Nominal& nominal() const { return std::get<Nominal>(value_); }
    Nominal& nominal() { return std::get<Nominal>(value_); }

    bool operator==(const FeatureValue&) const = default;

private:
    explicit FeatureValue(double value) : value_(value) {}
    explicit FeatureValue(Nominal value) : value_(std::move(value)) {}

    std::variant<Absent, double, Nominal> value_;
};

using FeatureVector = std::vector<FeatureValue>;

// ---------------------------------------------------------------------------

using MacAddress = std::array<std::uint8_t, 6>;

std::string format_mac(const MacAddress& mac);
std::optional<MacAddress> parse_mac(std::string_view text);
/// IPv4 addresses are held in host byte order.
std::string format_ipv4(std::uint32_t address);
std::optional<std::uint32_t> parse_ipv4(std::string_view text);

struct Timestamp {
    std::int64_t seconds = 0;
    std::uint32_t nanos = 0;

    double to_seconds() const { return static_cast<double>(seconds) + nanos * 1e-9; }
    auto operator<=>(const Timestamp&) const = default;
};

/// Seconds from `from` to `to`, computed on the integer parts first.
double seconds_between(const Timestamp& from, const Timestamp& to);

/// Shortest round-trip decimal in positional notation ("64", "0.25", "-3").
std::string format_number(double value);
/// Decimal, or hexadecimal with a 0x prefix. nullopt if the text is not a
/// complete number.
std::optional<double> parse_number(std::string_view text);

struct PacketRecord {
    Timestamp timestamp;
    MacAddress src_mac{};
    MacAddress dst_mac{};
    std::optional<std::uint32_t> src_ip;
    std::optional<std::uint32_t> dst_ip;
    std::map<std::string, FeatureValue, std::less<>> fields;

    /// Absent when the field was not decoded.
    const FeatureValue& field(std::string_view name) const;
};

// ---------------------------------------------------------------------------

struct DeviceEntry {
    std::string key;  ///< MAC address, or dotted IPv4 as a fallback identity
    std::string name;
    std::string manufacturer;
};

/// Device identities to monitor. Entry order is the device order used for
/// presentation and for cross-device concatenation.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(std::vector<DeviceEntry> entries);

    std::span<const DeviceEntry> entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    /// Source identity lookup: MAC first, then IPv4.
    const DeviceEntry* match_source(const PacketRecord& record) const;
    /// Distinct device names in first-appearance order.
    std::vector<std::string> device_names() const;

private:
    std::vector<DeviceEntry> entries_;
    std::map<MacAddress, std::size_t> by_mac_;
    std::map<std::uint32_t, std::size_t> by_ip_;
};

LabelMap label_map_from_json(std::string_view text);
LabelMap load_label_map(const std::filesystem::path& path);
std::string label_map_to_json(const LabelMap& map);

/// Device name -> genre. A manufacturer with two or more devices becomes the
/// genre of all of them; a manufacturer with a single device lends the device
/// its own name.
using GenreMap = std::map<std::string, std::string, std::less<>>;
GenreMap build_genre_map(const LabelMap& label_map);

// ---------------------------------------------------------------------------

/// First-occurrence string -> dense code table for one nominal column.
class NominalDictionary {
public:
    std::int32_t code_for(std::string_view text);
    std::optional<std::int32_t> find(std::string_view text) const;
    const std::string& text(std::int32_t code) const;
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::span<const std::string> entries() const { return entries_; }

    bool operator==(const NominalDictionary& other) const { return entries_ == other.entries_; }

private:
    std::vector<std::string> entries_;
    std::map<std::string, std::int32_t, std::less<>> index_;
};

struct LabeledRow {
    FeatureVector values;
    std::string device;
    std::string genre;
};

struct LabeledDataset {
    FeatureSchema schema;
    std::vector<LabeledRow> rows;
    /// One per schema column; empty for numeric columns.
    std::vector<NominalDictionary> dictionaries;
    /// Device presentation order (label-map order when known).
    std::vector<std::string> devices;

    std::size_t size() const { return rows.size(); }
    /// Throws DataError if a row's arity differs from the schema.
    void validate() const;
    /// Genre for each device as observed in the rows.
    GenreMap genres() const;
};

/// Packets per block `block_size` (k) and blocks per device `blocks` (b).
struct BlockPlan {
    std::size_t block_size = 10;
    std::size_t blocks = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

}  // namespace dfp
