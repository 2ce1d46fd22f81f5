#pragma once

// Classic libpcap capture files: reading (both byte orders, micro- and
// nanosecond timestamps) and a small writer used to build fixtures.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dfp/model.hpp"

namespace dfp {

inline constexpr std::uint32_t kLinkTypeEthernet = 1;

struct PcapHeader {
    bool swapped = false;     ///< file byte order differs from little-endian host layout
    bool nanosecond = false;  ///< 0xa1b23c4d family
    std::uint16_t version_major = 2;
    std::uint16_t version_minor = 4;
    std::uint32_t snaplen = 65535;
    std::uint32_t link_type = kLinkTypeEthernet;
};

struct Frame {
    Timestamp timestamp;
    std::uint32_t original_length = 0;
    std::uint64_t file_offset = 0;  ///< offset of the record header
    std::vector<std::uint8_t> data;
};

class PcapReader {
public:
    /// Throws ValidationError if the file cannot be opened and DataError
    /// ("unrecognized capture format") on a bad magic number.
    explicit PcapReader(const std::filesystem::path& path);
    explicit PcapReader(std::unique_ptr<std::istream> stream);

    const PcapHeader& header() const { return header_; }

    /// Next record in file order, or nullopt at a clean end of file. A record
    /// cut short throws DataError naming the byte offset.
    std::optional<Frame> next();

private:
    void read_header();

    std::unique_ptr<std::istream> in_;
    PcapHeader header_;
    std::uint64_t offset_ = 0;
};

std::vector<Frame> read_pcap(const std::filesystem::path& path);

class PcapWriter {
public:
    struct Options {
        bool big_endian = false;
        bool nanosecond = false;
        std::uint32_t snaplen = 65535;
        std::uint32_t link_type = kLinkTypeEthernet;
    };

    explicit PcapWriter(const std::filesystem::path& path) : PcapWriter(path, Options{}) {}
    PcapWriter(const std::filesystem::path& path, Options options);

    void write(const Timestamp& timestamp, std::span<const std::uint8_t> frame);

private:
    void put32(std::uint32_t value);
    void put16(std::uint16_t value);

    std::ofstream out_;
    Options options_;
};

}  // namespace dfp
