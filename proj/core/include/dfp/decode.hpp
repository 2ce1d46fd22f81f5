#pragma once

// Per-packet header decoding: Ethernet -> IPv4 -> ICMP | TCP | UDP ->
// DNS | DHCP | HTTP | TLS. Fields are named after tshark's display filters.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>

#include "dfp/model.hpp"

namespace dfp {

struct DecodeStats {
    std::uint64_t frames = 0;
    std::uint64_t decoded = 0;
    std::uint64_t skipped_non_ipv4 = 0;
    std::uint64_t skipped_malformed = 0;
    /// Application payloads that looked like a known protocol but failed to
    /// parse. The packet is kept with its lower-layer fields.
    std::uint64_t malformed_application = 0;

    DecodeStats& operator+=(const DecodeStats& other);
};

/// Decodes the frames of one capture in order. Stateful: TCP/UDP stream
/// indices, sequence-number bases, window scaling, handshake timing for
/// tcp.analysis.ack_rtt, and HTTP request/response counters are tracked per
/// conversation. Never throws on packet content.
class PacketDecoder {
public:
    PacketDecoder();
    ~PacketDecoder();
    PacketDecoder(PacketDecoder&&) noexcept;
    PacketDecoder& operator=(PacketDecoder&&) noexcept;

    /// nullopt means the frame was skipped (non-IPv4 or malformed); the
    /// reason is counted in stats().
    std::optional<PacketRecord> decode(std::span<const std::uint8_t> frame, const Timestamp& timestamp);

    const DecodeStats& stats() const { return stats_; }

private:
    struct State;
    std::unique_ptr<State> state_;
    DecodeStats stats_;
};

/// One-shot decode with a fresh decoder (no cross-packet state).
std::optional<PacketRecord> decode_packet(std::span<const std::uint8_t> frame, const Timestamp& timestamp);

}  // namespace dfp
