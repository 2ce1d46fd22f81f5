#pragma once

// Capture ingestion: pcap files and delimited field tables (tshark
// `-T fields` style) into labeled, device-originated packets.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dfp/decode.hpp"
#include "dfp/model.hpp"

namespace dfp {

struct PcapFile {
    std::filesystem::path path;
};

struct FieldTable {
    std::filesystem::path path;
    char delimiter = '\t';
};

using CaptureSource = std::variant<PcapFile, FieldTable>;

struct DecodedCapture {
    std::vector<PacketRecord> records;
    DecodeStats stats;
};

/// Reads and decodes one pcap file sequentially.
DecodedCapture decode_capture(const std::filesystem::path& path);

/// Decodes several files concurrently (one decoder per file). Results are
/// returned in input order, so concatenating them is deterministic.
std::vector<DecodedCapture> decode_captures(std::span<const std::filesystem::path> paths, std::size_t threads = 0);

struct LabeledPacket {
    PacketRecord record;
    std::string device;
    std::string genre;
};

struct FilterResult {
    std::vector<LabeledPacket> packets;
    std::uint64_t dropped = 0;
    /// Packets kept per device name.
    std::map<std::string, std::uint64_t> per_device;
};

/// Keeps packets whose source identity (MAC, else IPv4) is in the label map
/// and attaches device name and genre. Everything else is counted in
/// `dropped`. Emits a warning when nothing matches.
FilterResult label_and_filter(std::vector<PacketRecord> records, const LabelMap& label_map);

/// Columns accepted in a field table besides schema features.
inline constexpr std::string_view kDeviceColumn = "device";
inline constexpr std::string_view kGenreColumn = "genre";
inline constexpr std::string_view kEthSrcColumn = "eth.src";

struct FieldTableOptions {
    char delimiter = '\t';
    /// Used when the table has no `device` column: rows are labeled by their
    /// eth.src / ip.src cells, and unmatched rows are dropped. Also supplies
    /// genres when the table has no `genre` column.
    const LabelMap* label_map = nullptr;
};

/// Imports a delimited table whose first row names the columns. Empty cells
/// are Absent; numeric cells accept decimals and 0x-prefixed hex; nominal
/// cells stay as text pending nominalization. Schema columns missing from the
/// table are Absent in every row.
LabeledDataset import_field_table(const std::filesystem::path& path, const FeatureSchema& schema,
                                  const FieldTableOptions& options = {});

/// Writes schema columns followed by `device` and `genre`. Nominal cells are
/// written as their original strings.
void export_field_table(const LabeledDataset& dataset, const std::filesystem::path& path, char delimiter = '\t');

/// Backslash escaping for \t \n \r and \\ in table cells.
std::string escape_cell(std::string_view text);
std::string unescape_cell(std::string_view text);

}  // namespace dfp
