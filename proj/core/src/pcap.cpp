#include "dfp/pcap.hpp"

#include <array>
#include <sstream>

#include "dfp/error.hpp"

namespace dfp {
namespace {

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
constexpr std::uint32_t kMaxRecord = 256u << 20;

std::uint32_t load32(const std::uint8_t* p, bool big_endian) {
    if (big_endian) {
        return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
    }
    return (std::uint32_t{p[3]} << 24) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[1]} << 8) | p[0];
}

std::uint16_t load16(const std::uint8_t* p, bool big_endian) {
    return big_endian ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : static_cast<std::uint16_t>((p[1] << 8) | p[0]);
}

std::size_t read_some(std::istream& in, std::uint8_t* dst, std::size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount());
}

}  // namespace

PcapReader::PcapReader(const std::filesystem::path& path) {
    auto file = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*file) throw ValidationError("cannot open capture " + path.string());
    in_ = std::move(file);
    read_header();
}

PcapReader::PcapReader(std::unique_ptr<std::istream> stream) : in_(std::move(stream)) { read_header(); }

void PcapReader::read_header() {
    std::array<std::uint8_t, 24> raw{};
    const auto got = read_some(*in_, raw.data(), raw.size());
    if (got < 4) throw DataError("unrecognized capture format");

    // The magic is written in the writer's native order; try both.
    const std::uint32_t le = load32(raw.data(), false);
    const std::uint32_t be = load32(raw.data(), true);
    bool big_endian = false;
    if (le == kMagicMicro || le == kMagicNano) {
        header_.nanosecond = le == kMagicNano;
    } else if (be == kMagicMicro || be == kMagicNano) {
        big_endian = true;
        header_.nanosecond = be == kMagicNano;
    } else {
        throw DataError("unrecognized capture format");
    }
    if (got < raw.size()) throw DataError("truncated pcap global header at byte offset " + std::to_string(got));

    header_.swapped = big_endian;
    header_.version_major = load16(raw.data() + 4, big_endian);
    header_.version_minor = load16(raw.data() + 6, big_endian);
    header_.snaplen = load32(raw.data() + 16, big_endian);
    header_.link_type = load32(raw.data() + 20, big_endian) & 0x0fffffff;
    if (header_.link_type != kLinkTypeEthernet) {
        throw DataError("unsupported link type " + std::to_string(header_.link_type) + " (Ethernet required)");
    }
    offset_ = raw.size();
}

std::optional<Frame> PcapReader::next() {
    std::array<std::uint8_t, 16> rec{};
    const auto got = read_some(*in_, rec.data(), rec.size());
    if (got == 0) return std::nullopt;
    if (got < rec.size()) {
        throw DataError("truncated pcap record header at byte offset " + std::to_string(offset_));
    }
    const bool be = header_.swapped;
    Frame frame;
    frame.file_offset = offset_;
    frame.timestamp.seconds = load32(rec.data(), be);
    const std::uint32_t frac = load32(rec.data() + 4, be);
    frame.timestamp.nanos = header_.nanosecond ? frac : frac * 1000u;
    const std::uint32_t incl = load32(rec.data() + 8, be);
    frame.original_length = load32(rec.data() + 12, be);
    if (incl > kMaxRecord) {
        throw DataError("implausible record length " + std::to_string(incl) + " at byte offset " +
                        std::to_string(offset_));
    }
    frame.data.resize(incl);
    if (read_some(*in_, frame.data.data(), incl) < incl) {
        throw DataError("truncated pcap record at byte offset " + std::to_string(offset_));
    }
    offset_ += rec.size() + incl;
    return frame;
}

std::vector<Frame> read_pcap(const std::filesystem::path& path) {
    PcapReader reader(path);
    std::vector<Frame> frames;
    while (auto frame = reader.next()) frames.push_back(std::move(*frame));
    return frames;
}

PcapWriter::PcapWriter(const std::filesystem::path& path, Options options)
    : out_(path, std::ios::binary | std::ios::trunc), options_(options) {
    if (!out_) throw DataError("cannot write capture " + path.string());
    put32(options_.nanosecond ? kMagicNano : kMagicMicro);
    put16(2);
    put16(4);
    put32(0);
    put32(0);
    put32(options_.snaplen);
    put32(options_.link_type);
}

void PcapWriter::write(const Timestamp& timestamp, std::span<const std::uint8_t> frame) {
    put32(static_cast<std::uint32_t>(timestamp.seconds));
    put32(options_.nanosecond ? timestamp.nanos : timestamp.nanos / 1000u);
    put32(static_cast<std::uint32_t>(frame.size()));
    put32(static_cast<std::uint32_t>(frame.size()));
    out_.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
    if (!out_) throw DataError("capture write failed");
}

void PcapWriter::put32(std::uint32_t v) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) {
        const int shift = options_.big_endian ? 24 - 8 * i : 8 * i;
        b[static_cast<std::size_t>(i)] = static_cast<char>((v >> shift) & 0xff);
    }
    out_.write(b.data(), 4);
}

void PcapWriter::put16(std::uint16_t v) {
    std::array<char, 2> b{};
    b[0] = static_cast<char>(options_.big_endian ? v >> 8 : v & 0xff);
    b[1] = static_cast<char>(options_.big_endian ? v & 0xff : v >> 8);
    out_.write(b.data(), 2);
}

}  // namespace dfp
