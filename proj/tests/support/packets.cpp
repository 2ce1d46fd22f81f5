#include "packets.hpp"

#include <fstream>
#include <random>

#include "dfp/pcap.hpp"

namespace fixture {

dfp::MacAddress mac(std::uint8_t last, std::uint8_t group) { return {0x02, 0x00, 0x00, 0x00, group, last}; }

void put16(Bytes& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

void put32(Bytes& b, std::uint32_t v) {
    put16(b, static_cast<std::uint16_t>(v >> 16));
    put16(b, static_cast<std::uint16_t>(v));
}

Bytes text(std::string_view s) { return Bytes(s.begin(), s.end()); }

namespace {

std::uint32_t sum16(const Bytes& b, std::uint32_t acc = 0) {
    for (std::size_t i = 0; i + 1 < b.size(); i += 2) acc += (std::uint32_t{b[i]} << 8) | b[i + 1];
    if (b.size() % 2) acc += std::uint32_t{b.back()} << 8;
    return acc;
}

std::uint16_t finish(std::uint32_t acc) {
    while (acc >> 16) acc = (acc & 0xffff) + (acc >> 16);
    return static_cast<std::uint16_t>(~acc);
}

std::uint32_t pseudo(std::uint32_t src, std::uint32_t dst, std::uint8_t proto, std::size_t len) {
    return (src >> 16) + (src & 0xffff) + (dst >> 16) + (dst & 0xffff) + proto + static_cast<std::uint32_t>(len);
}

void set16(Bytes& b, std::size_t at, std::uint16_t v) {
    b[at] = static_cast<std::uint8_t>(v >> 8);
    b[at + 1] = static_cast<std::uint8_t>(v);
}

}  // namespace

Bytes ethernet(const dfp::MacAddress& dst, const dfp::MacAddress& src, std::uint16_t type, const Bytes& payload) {
    Bytes b(dst.begin(), dst.end());
    b.insert(b.end(), src.begin(), src.end());
    put16(b, type);
    b.insert(b.end(), payload.begin(), payload.end());
    return b;
}

Bytes ipv4(std::uint32_t src, std::uint32_t dst, std::uint8_t proto, const Bytes& payload, const IpOptions& o) {
    Bytes opts = o.options;
    while (opts.size() % 4) opts.push_back(0);
    const std::size_t ihl = 20 + opts.size();
    Bytes b;
    b.push_back(static_cast<std::uint8_t>(0x40 | (ihl / 4)));
    b.push_back(o.tos);
    put16(b, static_cast<std::uint16_t>(ihl + payload.size()));
    put16(b, o.id);
    put16(b, static_cast<std::uint16_t>((o.dont_fragment ? 0x4000 : 0) | (o.more_fragments ? 0x2000 : 0) |
                                        (o.fragment_offset & 0x1fff)));
    b.push_back(o.ttl);
    b.push_back(proto);
    put16(b, 0);
    put32(b, src);
    put32(b, dst);
    b.insert(b.end(), opts.begin(), opts.end());
    set16(b, 10, finish(sum16(b)));
    b.insert(b.end(), payload.begin(), payload.end());
    return b;
}

Bytes tcp(std::uint32_t src, std::uint32_t dst, const TcpSegment& s) {
    Bytes opts = s.options;
    while (opts.size() % 4) opts.push_back(1);
    const std::size_t hdr = 20 + opts.size();
    Bytes b;
    put16(b, s.sport);
    put16(b, s.dport);
    put32(b, s.seq);
    put32(b, s.ack);
    b.push_back(static_cast<std::uint8_t>((hdr / 4) << 4));
    b.push_back(s.flags);
    put16(b, s.window);
    put16(b, 0);
    put16(b, 0);
    b.insert(b.end(), opts.begin(), opts.end());
    b.insert(b.end(), s.payload.begin(), s.payload.end());
    set16(b, 16, finish(sum16(b, pseudo(src, dst, 6, b.size()))));
    return b;
}

Bytes udp(std::uint32_t src, std::uint32_t dst, std::uint16_t sport, std::uint16_t dport, const Bytes& payload) {
    Bytes b;
    put16(b, sport);
    put16(b, dport);
    put16(b, static_cast<std::uint16_t>(8 + payload.size()));
    put16(b, 0);
    b.insert(b.end(), payload.begin(), payload.end());
    std::uint16_t c = finish(sum16(b, pseudo(src, dst, 17, b.size())));
    set16(b, 6, c == 0 ? 0xffff : c);
    return b;
}

Bytes icmp_echo(std::uint8_t type, std::uint16_t ident, std::uint16_t seq, const Bytes& data) {
    Bytes b{type, 0, 0, 0};
    put16(b, ident);
    put16(b, seq);
    b.insert(b.end(), data.begin(), data.end());
    set16(b, 2, finish(sum16(b)));
    return b;
}

Bytes dns_query(std::uint16_t id, std::string_view name, std::uint16_t qtype) {
    Bytes b;
    put16(b, id);
    put16(b, 0x0100);
    put16(b, 1);
    put16(b, 0);
    put16(b, 0);
    put16(b, 0);
    std::size_t start = 0;
    while (start <= name.size() && !name.empty()) {
        auto dot = name.find('.', start);
        if (dot == std::string_view::npos) dot = name.size();
        b.push_back(static_cast<std::uint8_t>(dot - start));
        b.insert(b.end(), name.begin() + static_cast<std::ptrdiff_t>(start), name.begin() + static_cast<std::ptrdiff_t>(dot));
        start = dot + 1;
    }
    b.push_back(0);
    put16(b, qtype);
    put16(b, 1);
    return b;
}

Bytes dhcp_discover(std::uint32_t xid, const dfp::MacAddress& client, std::string_view hostname) {
    Bytes b{1, 1, 6, 0};
    put32(b, xid);
    put16(b, 0);
    put16(b, 0x8000);
    b.resize(b.size() + 16, 0);
    b.insert(b.end(), client.begin(), client.end());
    b.resize(b.size() + 10 + 64 + 128, 0);
    put32(b, 0x63825363);
    b.insert(b.end(), {53, 1, 1});
    b.push_back(12);
    b.push_back(static_cast<std::uint8_t>(hostname.size()));
    b.insert(b.end(), hostname.begin(), hostname.end());
    b.insert(b.end(), {55, 4, 1, 3, 6, 15});
    b.push_back(255);
    return b;
}

Bytes tls_client_hello(std::string_view server_name) {
    Bytes ext;
    // server_name
    put16(ext, 0);
    put16(ext, static_cast<std::uint16_t>(server_name.size() + 5));
    put16(ext, static_cast<std::uint16_t>(server_name.size() + 3));
    ext.push_back(0);
    put16(ext, static_cast<std::uint16_t>(server_name.size()));
    ext.insert(ext.end(), server_name.begin(), server_name.end());
    // supported_groups: x25519, secp256r1
    put16(ext, 10);
    put16(ext, 6);
    put16(ext, 4);
    put16(ext, 29);
    put16(ext, 23);
    // ec_point_formats: uncompressed
    put16(ext, 11);
    put16(ext, 2);
    ext.insert(ext.end(), {1, 0});

    Bytes hello;
    put16(hello, 0x0303);
    put32(hello, 0x5f5e1000);
    hello.resize(hello.size() + 28, 0xab);
    hello.push_back(0);
    put16(hello, 4);
    put16(hello, 0xc02f);
    put16(hello, 0x009c);
    hello.insert(hello.end(), {1, 0});
    put16(hello, static_cast<std::uint16_t>(ext.size()));
    hello.insert(hello.end(), ext.begin(), ext.end());

    Bytes hs{1};
    hs.push_back(static_cast<std::uint8_t>(hello.size() >> 16));
    put16(hs, static_cast<std::uint16_t>(hello.size()));
    hs.insert(hs.end(), hello.begin(), hello.end());

    Bytes rec{22};
    put16(rec, 0x0301);
    put16(rec, static_cast<std::uint16_t>(hs.size()));
    rec.insert(rec.end(), hs.begin(), hs.end());
    return rec;
}

Bytes arp_request(const dfp::MacAddress& src, std::uint32_t sender, std::uint32_t target) {
    Bytes b;
    put16(b, 1);
    put16(b, 0x0800);
    b.push_back(6);
    b.push_back(4);
    put16(b, 1);
    b.insert(b.end(), src.begin(), src.end());
    put32(b, sender);
    b.resize(b.size() + 6, 0);
    put32(b, target);
    return ethernet({0xff, 0xff, 0xff, 0xff, 0xff, 0xff}, src, kArp, b);
}

Bytes tcp_frame(const Host& from, const Host& to, const TcpSegment& s, const IpOptions& o) {
    return ethernet(to.mac, from.mac, kIPv4, ipv4(from.ip, to.ip, 6, tcp(from.ip, to.ip, s), o));
}

Bytes udp_frame(const Host& from, const Host& to, std::uint16_t sport, std::uint16_t dport, const Bytes& payload,
                const IpOptions& o) {
    return ethernet(to.mac, from.mac, kIPv4, ipv4(from.ip, to.ip, 17, udp(from.ip, to.ip, sport, dport, payload), o));
}

void write_pcap(const std::filesystem::path& path, const std::vector<Bytes>& frames, std::int64_t start_seconds) {
    dfp::PcapWriter w(path);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::uint64_t micros = i * 1000;
        w.write({start_seconds + static_cast<std::int64_t>(micros / 1'000'000),
                 static_cast<std::uint32_t>((micros % 1'000'000) * 1000)},
                frames[i]);
    }
}

HomeNetwork write_home_network(const std::filesystem::path& dir, std::size_t packets_per_device, std::uint64_t seed) {
    const Host cam1{mac(1, 7), ip(10, 0, 0, 11)};
    const Host cam2{mac(2, 7), ip(10, 0, 0, 12)};
    const Host plug{mac(3, 7), ip(10, 0, 0, 13)};
    const Host gateway{mac(0xfe, 7), ip(10, 0, 0, 1)};
    std::mt19937_64 rng(seed);
    std::vector<Bytes> frames;
    for (std::size_t i = 0; i < packets_per_device; ++i) {
        const auto sport = static_cast<std::uint16_t>(40000 + rng() % 2000);
        TcpSegment a;
        a.sport = sport;
        a.dport = 80;
        a.flags = tcpflag::ack | tcpflag::psh;
        a.payload = text("GET /snapshot HTTP/1.1\r\nHost: cam\r\n\r\n");
        frames.push_back(tcp_frame(cam1, gateway, a));

        TcpSegment b;
        b.sport = sport;
        b.dport = 443;
        b.window = 8192;
        b.flags = tcpflag::ack;
        IpOptions ob;
        ob.ttl = 128;
        ob.id = static_cast<std::uint16_t>(rng());
        frames.push_back(tcp_frame(cam2, gateway, b, ob));

        IpOptions op;
        op.ttl = 255;
        op.dont_fragment = false;
        frames.push_back(udp_frame(plug, gateway, static_cast<std::uint16_t>(5000 + rng() % 100), 53,
                                   dns_query(static_cast<std::uint16_t>(rng()), i % 2 ? "time.zed.io" : "api.zed.io")));

        TcpSegment g;
        g.sport = 80;
        g.dport = sport;
        g.flags = tcpflag::ack;
        frames.push_back(tcp_frame(gateway, cam1, g));
    }
    HomeNetwork out{dir / "home.pcap", dir / "labels.json"};
    write_pcap(out.capture, frames);
    std::ofstream(out.label_map) << R"({"devices": [
  {"key": "02:00:00:00:07:01", "name": "Cam1", "manufacturer": "Acme"},
  {"key": "02:00:00:00:07:02", "name": "Cam2", "manufacturer": "Acme"},
  {"key": "02:00:00:00:07:03", "name": "Plug", "manufacturer": "Zed"}
]}
)";
    return out;
}

std::filesystem::path temp_dir(std::string_view name) {
    static std::mt19937_64 rng(std::random_device{}());
    auto dir = std::filesystem::temp_directory_path() /
               ("dfp-test-" + std::string(name) + "-" + std::to_string(rng() % 1'000'000'000));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixture
