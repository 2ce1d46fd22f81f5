#include "dfp/decode.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <string>

#include "byte_cursor.hpp"

namespace dfp {

DecodeStats& DecodeStats::operator+=(const DecodeStats& other) {
    frames += other.frames;
    decoded += other.decoded;
    skipped_non_ipv4 += other.skipped_non_ipv4;
    skipped_malformed += other.skipped_malformed;
    malformed_application += other.malformed_application;
    return *this;
}

namespace {

using detail::ByteCursor;
using detail::Truncated;
using FieldMap = std::map<std::string, FeatureValue, std::less<>>;
using Bytes = std::span<const std::uint8_t>;

struct Malformed : std::exception {};

constexpr std::uint16_t kEtherIPv4 = 0x0800;
constexpr std::uint16_t kEtherVlan = 0x8100;
constexpr std::uint16_t kEtherQinQ = 0x88a8;

void put(FieldMap& f, std::string_view name, double value) {
    f.insert_or_assign(std::string(name), FeatureValue::numeric(value));
}

void put_text(FieldMap& f, std::string_view name, std::string text) {
    if (!text.empty()) f.insert_or_assign(std::string(name), FeatureValue::text(std::move(text)));
}

/// Printable ASCII passes through; everything else becomes \xHH.
std::string printable(Bytes bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size());
    for (auto b : bytes) {
        if (b >= 0x20 && b < 0x7f) {
            out.push_back(static_cast<char>(b));
        } else {
            out += "\\x";
            out.push_back(kHex[b >> 4]);
            out.push_back(kHex[b & 0xf]);
        }
    }
    return out;
}

std::string printable(std::string_view text) {
    return printable(Bytes(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint32_t sum16(Bytes bytes, std::uint32_t acc = 0) {
    std::size_t i = 0;
    for (; i + 1 < bytes.size(); i += 2) acc += static_cast<std::uint32_t>((bytes[i] << 8) | bytes[i + 1]);
    if (i < bytes.size()) acc += static_cast<std::uint32_t>(bytes[i] << 8);
    return acc;
}

std::uint16_t fold(std::uint32_t acc) {
    while (acc >> 16) acc = (acc & 0xffff) + (acc >> 16);
    return static_cast<std::uint16_t>(acc);
}

/// Ones-complement sum including the IPv4 pseudo-header; 0xffff means valid.
std::uint16_t transport_sum(std::uint32_t src, std::uint32_t dst, std::uint8_t proto, Bytes segment) {
    std::uint32_t acc = (src >> 16) + (src & 0xffff) + (dst >> 16) + (dst & 0xffff) + proto +
                        static_cast<std::uint32_t>(segment.size());
    return fold(sum16(segment, acc));
}

std::string join(const std::vector<std::uint32_t>& values, char sep) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out.push_back(sep);
        out += std::to_string(values[i]);
    }
    return out;
}

bool is_grease(std::uint16_t v) { return (v & 0x0f0f) == 0x0a0a && (v >> 8) == (v & 0xff); }

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// ---------------------------------------------------------------------------
// Conversation state

struct Endpoint {
    std::uint32_t ip = 0;
    std::uint16_t port = 0;
    auto operator<=>(const Endpoint&) const = default;
};

struct FlowKey {
    Endpoint a;
    Endpoint b;
    auto operator<=>(const FlowKey&) const = default;
};

std::pair<FlowKey, int> canonical(Endpoint src, Endpoint dst) {
    if (src <= dst) return {{src, dst}, 0};
    return {{dst, src}, 1};
}

struct TcpDirection {
    std::optional<std::uint32_t> isn;
    std::optional<std::uint8_t> wscale;
    bool syn_seen = false;
    std::optional<std::uint32_t> pending_syn_seq;
    Timestamp pending_syn_time;
};

struct TcpStream {
    std::uint64_t index = 0;
    Timestamp first;
    Timestamp previous;
    std::array<TcpDirection, 2> dir;
    std::optional<Timestamp> syn_time;  // client SYN
    int client = -1;
    bool synack_seen = false;
    std::optional<double> initial_rtt;
    std::uint32_t requests = 0;
    std::uint32_t responses = 0;
};

struct UdpStream {
    std::uint64_t index = 0;
    Timestamp first;
    Timestamp previous;
};

struct TcpOptions {
    std::string layout;
    std::optional<std::uint8_t> wscale;
};

// ---------------------------------------------------------------------------
// Application layer

void parse_dns_name(ByteCursor& c, std::string& out, std::size_t& labels) {
    // Follows compression pointers with a hop limit; the cursor ends after the
    // name's in-place encoding.
    std::size_t pos = c.pos();
    std::optional<std::size_t> resume;
    int hops = 0;
    ByteCursor view(c.all());
    view.seek(pos);
    while (true) {
        const std::uint8_t len = view.u8();
        if (len == 0) break;
        if ((len & 0xc0) == 0xc0) {
            const std::size_t target = static_cast<std::size_t>(((len & 0x3f) << 8) | view.u8());
            if (!resume) resume = view.pos();
            if (++hops > 32) throw Malformed{};
            view.seek(target);
            continue;
        }
        if ((len & 0xc0) != 0) throw Malformed{};
        if (!out.empty()) out.push_back('.');
        out += printable(view.bytes(len));
        ++labels;
        if (out.size() > 1024) throw Malformed{};
    }
    c.seek(resume ? *resume : view.pos());
}

void parse_dns(Bytes message, std::string_view transport, std::optional<std::uint16_t> tcp_length, FieldMap& f) {
    ByteCursor c(message);
    const std::uint16_t id = c.u16();
    const std::uint16_t flags = c.u16();
    const std::uint16_t qd = c.u16();
    const std::uint16_t an = c.u16();
    const std::uint16_t ns = c.u16();
    const std::uint16_t ar = c.u16();

    put(f, "dns.id", id);
    put(f, "dns.flags", flags);
    put(f, "dns.flags.response", (flags >> 15) & 1);
    put(f, "dns.flags.opcode", (flags >> 11) & 0xf);
    put(f, "dns.flags.authoritative", (flags >> 10) & 1);
    put(f, "dns.flags.truncated", (flags >> 9) & 1);
    put(f, "dns.flags.recdesired", (flags >> 8) & 1);
    put(f, "dns.flags.recavail", (flags >> 7) & 1);
    put(f, "dns.flags.z", (flags >> 6) & 1);
    put(f, "dns.flags.authenticated", (flags >> 5) & 1);
    put(f, "dns.flags.checkdisable", (flags >> 4) & 1);
    put(f, "dns.flags.rcode", flags & 0xf);
    put(f, "dns.count.queries", qd);
    put(f, "dns.count.answers", an);
    put(f, "dns.count.auth_rr", ns);
    put(f, "dns.count.add_rr", ar);
    put_text(f, "dns.transport", std::string(transport));
    if (tcp_length) put(f, "dns.length", *tcp_length);

    for (std::uint16_t q = 0; q < qd; ++q) {
        std::string name;
        std::size_t labels = 0;
        parse_dns_name(c, name, labels);
        const std::uint16_t type = c.u16();
        const std::uint16_t klass = c.u16();
        if (q == 0) {
            put_text(f, "dns.qry.name", name.empty() ? "<Root>" : name);
            put(f, "dns.qry.name.len", static_cast<double>(name.size()));
            put(f, "dns.count.labels", static_cast<double>(labels));
            put(f, "dns.qry.type", type);
            put(f, "dns.qry.class", klass & 0x7fff);
            put(f, "dns.qry.qu", klass >> 15);
        }
    }

    // Resource records are best effort: a cut-off RR section keeps what was
    // read so far.
    try {
        const std::uint32_t total = std::uint32_t{an} + ns + ar;
        for (std::uint32_t r = 0; r < total && r < 512; ++r) {
            std::string name;
            std::size_t labels = 0;
            parse_dns_name(c, name, labels);
            const std::uint16_t type = c.u16();
            const std::uint16_t klass = c.u16();
            const std::uint32_t ttl = c.u32();
            const std::uint16_t rdlen = c.u16();
            c.skip(rdlen);
            if (r == 0 && an > 0) {
                put_text(f, "dns.resp.name", name.empty() ? "<Root>" : name);
                put(f, "dns.resp.type", type);
                put(f, "dns.resp.class", klass & 0x7fff);
                put(f, "dns.resp.ttl", ttl);
                put(f, "dns.resp.len", rdlen);
            }
            if (type == 41) put(f, "dns.rr.udp_payload_size", klass);
        }
    } catch (const Truncated&) {
    } catch (const Malformed&) {
    }
}

void parse_dhcp(Bytes payload, FieldMap& f) {
    ByteCursor c(payload);
    const std::uint8_t op = c.u8();
    const std::uint8_t htype = c.u8();
    const std::uint8_t hlen = c.u8();
    const std::uint8_t hops = c.u8();
    const std::uint32_t xid = c.u32();
    const std::uint16_t secs = c.u16();
    const std::uint16_t flags = c.u16();
    c.skip(16 + 16);  // ciaddr..giaddr, chaddr
    const auto sname = c.bytes(64);
    const auto file = c.bytes(128);

    put(f, "dhcp.type", op);
    put(f, "dhcp.hw.type", htype);
    put(f, "dhcp.hw.len", hlen);
    put(f, "dhcp.hops", hops);
    put(f, "dhcp.id", xid);
    put(f, "dhcp.secs", secs);
    put(f, "dhcp.flags.bc", flags >> 15);
    put(f, "dhcp.flags.reserved", flags & 0x7fff);
    auto cstr_len = [](Bytes b) {
        return static_cast<double>(std::find(b.begin(), b.end(), std::uint8_t{0}) - b.begin());
    };
    put(f, "dhcp.server_name.len", cstr_len(sname));
    put(f, "dhcp.file.len", cstr_len(file));

    if (c.remaining() < 4) return;
    const std::uint32_t cookie = c.u32();
    put(f, "dhcp.cookie", cookie);
    if (cookie != 0x63825363) return;

    std::vector<std::uint32_t> types;
    std::size_t padding = 0;
    bool end = false;
    try {
        while (!c.at_end()) {
            const std::uint8_t code = c.u8();
            if (code == 0) {
                ++padding;
                continue;
            }
            if (code == 255) {
                end = true;
                break;
            }
            const std::uint8_t len = c.u8();
            ByteCursor v(c.bytes(len));
            types.push_back(code);
            switch (code) {
                case 12: put_text(f, "dhcp.option.hostname", printable(v.all())); break;
                case 15: put_text(f, "dhcp.option.domain_name", printable(v.all())); break;
                case 26: put(f, "dhcp.option.interface_mtu", v.u16()); break;
                case 51: put(f, "dhcp.option.ip_address_lease_time", v.u32()); break;
                case 53: put(f, "dhcp.option.dhcp", v.u8()); break;
                case 55: {
                    std::vector<std::uint32_t> req(v.all().begin(), v.all().end());
                    put_text(f, "dhcp.option.request_list", join(req, ','));
                    put(f, "dhcp.option.request_list.len", len);
                    break;
                }
                case 57: put(f, "dhcp.option.max_msg_size", v.u16()); break;
                case 58: put(f, "dhcp.option.renewal_time", v.u32()); break;
                case 59: put(f, "dhcp.option.rebinding_time", v.u32()); break;
                case 60: put_text(f, "dhcp.option.vendor_class_id", printable(v.all())); break;
                case 61:
                    put(f, "dhcp.option.client_id.type", v.u8());
                    put(f, "dhcp.option.client_id.len", len);
                    break;
                case 77: put_text(f, "dhcp.option.user_class", printable(v.all())); break;
                case 81: put(f, "dhcp.option.fqdn.flags", v.u8()); break;
                default: break;
            }
        }
    } catch (const Truncated&) {
        // option area cut short; keep the options read so far
    }
    put(f, "dhcp.option.count", static_cast<double>(types.size()));
    put_text(f, "dhcp.option.types", join(types, ','));
    put(f, "dhcp.option.end", end ? 1 : 0);
    put(f, "dhcp.option.padding_len", static_cast<double>(padding));
}

constexpr std::array<std::string_view, 13> kHttpMethods{"GET",     "POST",   "HEAD",     "PUT",       "DELETE",
                                                        "OPTIONS", "CONNECT", "TRACE",   "PATCH",     "NOTIFY",
                                                        "M-SEARCH", "SUBSCRIBE", "UNSUBSCRIBE"};

bool is_http_port(std::uint16_t port) { return port == 80 || port == 8080 || port == 8008; }

bool looks_like_http(std::string_view text) {
    if (text.starts_with("HTTP/")) return true;
    for (auto m : kHttpMethods) {
        if (text.size() > m.size() && text.starts_with(m) && text[m.size()] == ' ') return true;
    }
    return false;
}

void parse_http(std::string_view text, TcpStream& stream, FieldMap& f) {
    auto header_end = text.find("\r\n\r\n");
    std::size_t head_len = header_end == std::string_view::npos ? text.size() : header_end + 4;
    std::string_view head = text.substr(0, head_len);
    std::string_view body = header_end == std::string_view::npos ? std::string_view{} : text.substr(head_len);

    auto next_line = [&head]() {
        auto eol = head.find('\n');
        std::string_view line = head.substr(0, eol);
        head.remove_prefix(eol == std::string_view::npos ? head.size() : eol + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        return line;
    };

    const std::string_view start = next_line();
    const auto sp1 = start.find(' ');
    if (sp1 == std::string_view::npos) throw Malformed{};
    const auto sp2 = start.find(' ', sp1 + 1);

    if (start.starts_with("HTTP/")) {
        ++stream.responses;
        put(f, "http.response", 1);
        put(f, "http.response_number", stream.responses);
        put_text(f, "http.response.version", printable(start.substr(0, sp1)));
        const auto code_text = start.substr(sp1 + 1, sp2 == std::string_view::npos ? std::string_view::npos : sp2 - sp1 - 1);
        unsigned code = 0;
        auto [ptr, ec] = std::from_chars(code_text.data(), code_text.data() + code_text.size(), code);
        if (ec == std::errc{}) put(f, "http.response.code", code);
        if (sp2 != std::string_view::npos) put_text(f, "http.response.phrase", printable(start.substr(sp2 + 1)));
    } else {
        ++stream.requests;
        put(f, "http.request", 1);
        put(f, "http.request_number", stream.requests);
        put_text(f, "http.request.method", printable(start.substr(0, sp1)));
        const auto uri = start.substr(sp1 + 1, sp2 == std::string_view::npos ? std::string_view::npos : sp2 - sp1 - 1);
        put_text(f, "http.request.uri", printable(uri));
        put(f, "http.request.uri.len", static_cast<double>(uri.size()));
        if (sp2 != std::string_view::npos) put_text(f, "http.request.version", printable(start.substr(sp2 + 1)));
    }

    static const std::map<std::string, std::string_view, std::less<>> kTextHeaders{
        {"host", "http.host"},
        {"user-agent", "http.user_agent"},
        {"accept", "http.accept"},
        {"accept-encoding", "http.accept_encoding"},
        {"accept-language", "http.accept_language"},
        {"connection", "http.connection"},
        {"content-type", "http.content_type"},
        {"server", "http.server"},
        {"cache-control", "http.cache_control"},
        {"transfer-encoding", "http.transfer_encoding"},
        {"location", "http.location"},
        {"upgrade", "http.upgrade"},
        {"soapaction", "http.soapaction"},
        {"referer", "http.referer"},
    };

    std::size_t count = 0;
    bool chunked = false;
    while (!head.empty()) {
        const std::string_view line = next_line();
        if (line.empty()) break;
        ++count;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        const std::string name = lower(trim(line.substr(0, colon)));
        const std::string_view value = trim(line.substr(colon + 1));
        if (auto it = kTextHeaders.find(name); it != kTextHeaders.end()) {
            put_text(f, it->second, printable(value));
            if (name == "transfer-encoding" && lower(value).find("chunked") != std::string::npos) chunked = true;
        } else if (name == "content-length") {
            unsigned long long n = 0;
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
            if (ec == std::errc{}) put(f, "http.content_length_header", static_cast<double>(n));
        } else if (name == "cookie") {
            put(f, "http.cookie.len", static_cast<double>(value.size()));
        }
    }
    put(f, "http.header.count", static_cast<double>(count));
    put(f, "http.header.len", static_cast<double>(head_len));
    put(f, "http.chunked", chunked ? 1 : 0);
    if (chunked && !body.empty()) {
        const auto stop = body.find_first_of(";\r\n");
        const auto size_text = trim(body.substr(0, stop));
        unsigned long long size = 0;
        auto [ptr, ec] = std::from_chars(size_text.data(), size_text.data() + size_text.size(), size, 16);
        if (ec == std::errc{} && ptr == size_text.data() + size_text.size()) {
            put(f, "http.chunk_size", static_cast<double>(size));
        }
    }
}

bool looks_like_tls(Bytes payload) {
    return payload.size() >= 3 && payload[0] >= 20 && payload[0] <= 23 && payload[1] == 3 && payload[2] <= 4;
}

void parse_tls_hello(ByteCursor& h, std::uint8_t type, FieldMap& f) {
    const std::uint16_t version = h.u16();
    put(f, "tls.handshake.version", version);
    put(f, "tls.handshake.random_time", h.u32());
    h.skip(28);
    const std::uint8_t sid_len = h.u8();
    put(f, "tls.handshake.session_id_length", sid_len);
    h.skip(sid_len);

    std::vector<std::uint32_t> ciphers;
    if (type == 1) {
        const std::uint16_t cs_len = h.u16();
        put(f, "tls.handshake.cipher_suites_length", cs_len);
        ByteCursor cs(h.bytes(cs_len));
        std::size_t offered = 0;
        while (cs.remaining() >= 2) {
            const std::uint16_t suite = cs.u16();
            ++offered;
            if (!is_grease(suite)) ciphers.push_back(suite);
        }
        put(f, "tls.handshake.cipher_suites_count", static_cast<double>(offered));
        if (!ciphers.empty()) put(f, "tls.handshake.ciphersuite", ciphers.front());
        const std::uint8_t comp_len = h.u8();
        put(f, "tls.handshake.comp_methods_length", comp_len);
        auto comp = h.bytes(comp_len);
        if (!comp.empty()) put(f, "tls.handshake.comp_method", comp[0]);
    } else {
        const std::uint16_t suite = h.u16();
        ciphers.push_back(suite);
        put(f, "tls.handshake.ciphersuite", suite);
        put(f, "tls.handshake.comp_method", h.u8());
    }

    std::vector<std::uint32_t> ext_types;
    std::vector<std::uint32_t> groups;
    std::vector<std::uint32_t> point_formats;
    if (h.remaining() >= 2) {
        const std::uint16_t ext_len = h.u16();
        put(f, "tls.handshake.extensions_length", ext_len);
        ByteCursor ext(h.bytes(std::min<std::size_t>(ext_len, h.remaining())));
        std::size_t count = 0;
        while (ext.remaining() >= 4) {
            const std::uint16_t etype = ext.u16();
            const std::uint16_t elen = ext.u16();
            ByteCursor e(ext.bytes(elen));
            ++count;
            if (!is_grease(etype)) ext_types.push_back(etype);
            switch (etype) {
                case 0:
                    if (type == 1 && e.remaining() >= 5) {
                        e.u16();
                        e.u8();
                        const std::uint16_t nlen = e.u16();
                        put_text(f, "tls.handshake.extensions_server_name", printable(e.bytes(nlen)));
                        put(f, "tls.handshake.extensions_server_name_len", nlen);
                    }
                    break;
                case 10: {
                    const std::uint16_t glen = e.u16();
                    put(f, "tls.handshake.extensions_supported_groups_length", glen);
                    ByteCursor g(e.bytes(glen));
                    while (g.remaining() >= 2) {
                        const std::uint16_t grp = g.u16();
                        if (!is_grease(grp)) groups.push_back(grp);
                    }
                    break;
                }
                case 11: {
                    const std::uint8_t plen = e.u8();
                    put(f, "tls.handshake.extensions_ec_point_formats_length", plen);
                    for (auto b : e.bytes(plen)) point_formats.push_back(b);
                    break;
                }
                case 13: put(f, "tls.handshake.sig_hash_alg_len", e.u16()); break;
                case 16: {
                    e.u16();
                    const std::uint8_t alen = e.u8();
                    put_text(f, "tls.handshake.extensions_alpn_str", printable(e.bytes(alen)));
                    break;
                }
                case 43: {
                    std::uint16_t best = 0;
                    if (type == 1) {
                        const std::uint8_t vlen = e.u8();
                        ByteCursor vs(e.bytes(vlen));
                        while (vs.remaining() >= 2) {
                            const std::uint16_t v = vs.u16();
                            if (!is_grease(v)) best = std::max(best, v);
                        }
                    } else {
                        best = e.u16();
                    }
                    if (best) put(f, "tls.handshake.extensions.supported_version", best);
                    break;
                }
                default: break;
            }
        }
        put(f, "tls.handshake.extension.count", static_cast<double>(count));
        put_text(f, "tls.handshake.extension.types", join(ext_types, ','));
    }

    // JA3 for ClientHello, JA3S for ServerHello.
    std::string ja3 = std::to_string(version) + ',' + join(ciphers, '-') + ',' + join(ext_types, '-');
    if (type == 1) ja3 += ',' + join(groups, '-') + ',' + join(point_formats, '-');
    put_text(f, "tls.handshake.ja3_full", ja3);
}

void parse_tls(Bytes payload, FieldMap& f) {
    ByteCursor c(payload);
    std::size_t records = 0;
    bool first = true;
    bool saw_handshake = false;
    bool saw_alert = false;
    bool saw_app = false;
    while (c.remaining() >= 5) {
        const std::uint8_t ctype = c.u8();
        const std::uint16_t version = c.u16();
        const std::uint16_t length = c.u16();
        if (ctype < 20 || ctype > 24 || (version >> 8) != 3) break;
        ++records;
        const auto body = c.rest().subspan(0, std::min<std::size_t>(length, c.remaining()));
        if (first) {
            put(f, "tls.record.content_type", ctype);
            put(f, "tls.record.version", version);
            put(f, "tls.record.length", length);
            first = false;
        }
        if (ctype == 20) put(f, "tls.change_cipher_spec", 1);
        if (ctype == 21 && !saw_alert && length == 2 && body.size() == 2) {
            saw_alert = true;
            put(f, "tls.alert_message.level", body[0]);
            put(f, "tls.alert_message.desc", body[1]);
        }
        if (ctype == 23 && !saw_app) {
            saw_app = true;
            put(f, "tls.app_data.length", length);
        }
        if (ctype == 22 && !saw_handshake) {
            saw_handshake = true;
            put(f, "tls.handshake", 1);
            // Encrypted handshake messages (Finished) parse as garbage; keep
            // the record-level fields if the hello walk fails.
            FieldMap hello;
            try {
                ByteCursor h(body);
                const std::uint8_t htype = h.u8();
                const std::uint32_t hlen = h.u24();
                hello.insert_or_assign("tls.handshake.type", FeatureValue::numeric(htype));
                hello.insert_or_assign("tls.handshake.length", FeatureValue::numeric(hlen));
                if (htype == 1 || htype == 2) {
                    ByteCursor msg(h.bytes(std::min<std::size_t>(hlen, h.remaining())));
                    parse_tls_hello(msg, htype, hello);
                }
            } catch (const Truncated&) {
            } catch (const Malformed&) {
            }
            for (auto& [k, v] : hello) f.insert_or_assign(k, std::move(v));
        }
        if (length > c.remaining()) break;
        c.skip(length);
    }
    if (records == 0) throw Malformed{};
    put(f, "tls.record.count", static_cast<double>(records));
}

}  // namespace

// ---------------------------------------------------------------------------

struct PacketDecoder::State {
    std::map<FlowKey, TcpStream> tcp;
    std::map<FlowKey, UdpStream> udp;
    DecodeStats* stats = nullptr;

    bool decode_ipv4(Bytes data, PacketRecord& rec);
    void decode_icmp(Bytes data, bool complete, FieldMap& f);
    void decode_tcp(Bytes seg, bool complete, PacketRecord& rec);
    void decode_udp(Bytes seg, bool complete, PacketRecord& rec);

    template <class Fn>
    void application(FieldMap& f, Fn&& parse) {
        FieldMap local;
        try {
            parse(local);
        } catch (const Truncated&) {
            ++stats->malformed_application;
            return;
        } catch (const Malformed&) {
            ++stats->malformed_application;
            return;
        }
        for (auto& [k, v] : local) f.insert_or_assign(k, std::move(v));
    }
};

PacketDecoder::PacketDecoder() : state_(std::make_unique<State>()) {}
PacketDecoder::~PacketDecoder() = default;
PacketDecoder::PacketDecoder(PacketDecoder&&) noexcept = default;
PacketDecoder& PacketDecoder::operator=(PacketDecoder&&) noexcept = default;

std::optional<PacketRecord> PacketDecoder::decode(std::span<const std::uint8_t> frame, const Timestamp& timestamp) {
    ++stats_.frames;
    state_->stats = &stats_;
    try {
        ByteCursor eth(frame);
        PacketRecord rec;
        rec.timestamp = timestamp;
        auto dst = eth.bytes(6);
        auto src = eth.bytes(6);
        std::copy(dst.begin(), dst.end(), rec.dst_mac.begin());
        std::copy(src.begin(), src.end(), rec.src_mac.begin());
        std::uint16_t type = eth.u16();
        for (int tags = 0; (type == kEtherVlan || type == kEtherQinQ) && tags < 2; ++tags) {
            eth.skip(2);
            type = eth.u16();
        }
        if (type != kEtherIPv4) {
            ++stats_.skipped_non_ipv4;
            return std::nullopt;
        }
        if (!state_->decode_ipv4(eth.rest(), rec)) {
            ++stats_.skipped_malformed;
            return std::nullopt;
        }
        ++stats_.decoded;
        return rec;
    } catch (const Truncated&) {
    } catch (const Malformed&) {
    }
    ++stats_.skipped_malformed;
    return std::nullopt;
}

bool PacketDecoder::State::decode_ipv4(Bytes data, PacketRecord& rec) {
    ByteCursor c(data);
    const std::uint8_t vihl = c.u8();
    const std::size_t ihl = static_cast<std::size_t>(vihl & 0x0f) * 4;
    if ((vihl >> 4) != 4 || ihl < 20) return false;
    const std::uint8_t tos = c.u8();
    const std::uint16_t total = c.u16();
    const std::uint16_t id = c.u16();
    const std::uint16_t frag = c.u16();
    const std::uint8_t ttl = c.u8();
    const std::uint8_t proto = c.u8();
    const std::uint16_t checksum = c.u16();
    const std::uint32_t src = c.u32();
    const std::uint32_t dst = c.u32();
    if (total < ihl || data.size() < ihl) return false;

    auto& f = rec.fields;
    rec.src_ip = src;
    rec.dst_ip = dst;
    put_text(f, "ip.src", format_ipv4(src));
    put_text(f, "ip.dst", format_ipv4(dst));
    put(f, "ip.checksum", checksum);

    put(f, "ip.version", 4);
    put(f, "ip.hdr_len", static_cast<double>(ihl));
    put(f, "ip.dsfield", tos);
    put(f, "ip.dsfield.dscp", tos >> 2);
    put(f, "ip.dsfield.ecn", tos & 3);
    put(f, "ip.len", total);
    put(f, "ip.id", id);
    const unsigned flags = frag >> 13;
    put(f, "ip.flags", flags);
    put(f, "ip.flags.rb", (flags >> 2) & 1);
    put(f, "ip.flags.df", (flags >> 1) & 1);
    put(f, "ip.flags.mf", flags & 1);
    const unsigned offset = (frag & 0x1fffu) * 8u;
    put(f, "ip.frag_offset", offset);
    put(f, "ip.ttl", ttl);
    put(f, "ip.proto", proto);
    put(f, "ip.checksum.status", fold(sum16(data.subspan(0, ihl))) == 0xffff ? 1 : 0);

    const auto options = data.subspan(20, ihl - 20);
    std::size_t count = 0;
    bool have_len = false;
    for (std::size_t i = 0; i < options.size();) {
        const std::uint8_t type = options[i];
        if (count++ == 0) {
            put(f, "ip.opt.type", type);
            put(f, "ip.opt.type.copy", type >> 7);
            put(f, "ip.opt.type.class", (type >> 5) & 3);
            put(f, "ip.opt.type.number", type & 0x1f);
        }
        if (type == 0) break;
        if (type == 1) {
            ++i;
            continue;
        }
        if (i + 1 >= options.size()) break;
        const std::uint8_t len = options[i + 1];
        if (len < 2 || i + len > options.size()) break;
        if (!have_len) {
            put(f, "ip.opt.len", len);
            have_len = true;
        }
        if (type == 148 && len == 4) put(f, "ip.opt.ra", (options[i + 2] << 8) | options[i + 3]);
        i += len;
    }
    put(f, "ip.opt.count", static_cast<double>(count));

    // Only the first fragment carries the transport header; no reassembly.
    if (offset != 0) return true;

    const std::size_t end = std::min<std::size_t>(total, data.size());
    const auto payload = data.subspan(ihl, end - ihl);
    const bool complete = data.size() >= total;
    switch (proto) {
        case 1: decode_icmp(payload, complete, f); break;
        case 6: decode_tcp(payload, complete, rec); break;
        case 17: decode_udp(payload, complete, rec); break;
        default: break;
    }
    return true;
}

void PacketDecoder::State::decode_icmp(Bytes data, bool complete, FieldMap& f) {
    ByteCursor c(data);
    const std::uint8_t type = c.u8();
    const std::uint8_t code = c.u8();
    const std::uint16_t checksum = c.u16();
    const auto rest = c.rest();
    if (rest.size() < 4) throw Malformed{};
    put(f, "icmp.type", type);
    put(f, "icmp.code", code);
    put(f, "icmp.checksum", checksum);
    put(f, "icmp.checksum.status", complete ? (fold(sum16(data)) == 0xffff ? 1 : 0) : 2);
    put(f, "icmp.data_len", static_cast<double>(rest.size() - 4));
    switch (type) {
        case 0: case 8: case 13: case 14: case 15: case 16: case 17: case 18:
            put(f, "icmp.ident", (rest[0] << 8) | rest[1]);
            put(f, "icmp.seq", (rest[2] << 8) | rest[3]);
            put(f, "icmp.seq_le", (rest[3] << 8) | rest[2]);
            break;
        case 3: case 11: case 12: {
            if (type == 3 && code == 4) put(f, "icmp.mtu", (rest[2] << 8) | rest[3]);
            const auto inner = rest.subspan(4);
            if (inner.size() >= 20 && (inner[0] >> 4) == 4) {
                put(f, "icmp.inner.ip.ttl", inner[8]);
                put(f, "icmp.inner.ip.proto", inner[9]);
            }
            break;
        }
        default: break;
    }
}

namespace {

TcpOptions walk_tcp_options(Bytes opts, FieldMap& f) {
    TcpOptions out;
    std::size_t count = 0;
    std::size_t nops = 0;
    bool eol = false;
    auto add = [&out](std::string_view tag) {
        if (!out.layout.empty()) out.layout.push_back(',');
        out.layout += tag;
    };
    for (std::size_t i = 0; i < opts.size();) {
        const std::uint8_t kind = opts[i];
        ++count;
        if (kind == 0) {
            eol = true;
            add("eol");
            break;
        }
        if (kind == 1) {
            ++nops;
            add("nop");
            ++i;
            continue;
        }
        if (i + 1 >= opts.size() || opts[i + 1] < 2 || i + opts[i + 1] > opts.size()) {
            add("?");
            break;
        }
        const std::uint8_t len = opts[i + 1];
        const auto v = opts.subspan(i + 2, len - 2);
        switch (kind) {
            case 2:
                add("mss");
                if (v.size() == 2) put(f, "tcp.options.mss_val", (v[0] << 8) | v[1]);
                break;
            case 3:
                add("ws");
                if (v.size() == 1) {
                    out.wscale = v[0];
                    put(f, "tcp.options.wscale.shift", v[0]);
                    put(f, "tcp.options.wscale.multiplier", 1u << std::min<unsigned>(v[0], 14));
                }
                break;
            case 4:
                add("sok");
                put(f, "tcp.options.sack_perm", 1);
                break;
            case 5:
                add("sack");
                put(f, "tcp.options.sack.count", static_cast<double>(v.size() / 8));
                break;
            case 8:
                add("ts");
                if (v.size() == 8) {
                    put(f, "tcp.options.timestamp.tsval",
                        (std::uint32_t{v[0]} << 24) | (std::uint32_t{v[1]} << 16) | (std::uint32_t{v[2]} << 8) | v[3]);
                    put(f, "tcp.options.timestamp.tsecr",
                        (std::uint32_t{v[4]} << 24) | (std::uint32_t{v[5]} << 16) | (std::uint32_t{v[6]} << 8) | v[7]);
                }
                break;
            case 34:
                add("tfo");
                put(f, "tcp.options.tfo", len);
                break;
            default: add("?" + std::to_string(kind)); break;
        }
        i += len;
    }
    put(f, "tcp.options.len", static_cast<double>(opts.size()));
    put(f, "tcp.options.count", static_cast<double>(count));
    put(f, "tcp.options.nop.count", static_cast<double>(nops));
    put(f, "tcp.options.eol", eol ? 1 : 0);
    put_text(f, "tcp.options.layout", out.layout);
    return out;
}

}  // namespace

void PacketDecoder::State::decode_tcp(Bytes seg, bool complete, PacketRecord& rec) {
    ByteCursor c(seg);
    const std::uint16_t sport = c.u16();
    const std::uint16_t dport = c.u16();
    const std::uint32_t seq = c.u32();
    const std::uint32_t ack = c.u32();
    const std::uint16_t off_flags = c.u16();
    const std::uint16_t window = c.u16();
    const std::uint16_t checksum = c.u16();
    const std::uint16_t urgent = c.u16();
    const std::size_t hdr = static_cast<std::size_t>(off_flags >> 12) * 4;
    if (hdr < 20 || seg.size() < hdr) throw Malformed{};
    const unsigned flags = off_flags & 0x0fff;
    const bool fin = flags & 0x01, syn = flags & 0x02, rst = flags & 0x04, psh = flags & 0x08;
    const bool has_ack = flags & 0x10, urg = flags & 0x20, ece = flags & 0x40, cwr = flags & 0x80;
    const bool ae = flags & 0x100;
    const auto payload = seg.subspan(hdr);
    const Timestamp& now = rec.timestamp;

    auto& f = rec.fields;
    put(f, "tcp.srcport", sport);
    put(f, "tcp.dstport", dport);
    put(f, "tcp.service_port", std::min(sport, dport));
    put(f, "tcp.len", static_cast<double>(payload.size()));
    put(f, "tcp.seq_raw", seq);
    put(f, "tcp.hdr_len", static_cast<double>(hdr));
    put(f, "tcp.flags", flags);
    std::string flag_str = ".........";
    constexpr std::string_view kLetters = "NCEUAPRSF";
    for (int bit = 8; bit >= 0; --bit) {
        if (flags & (1u << bit)) flag_str[static_cast<std::size_t>(8 - bit)] = kLetters[static_cast<std::size_t>(8 - bit)];
    }
    put_text(f, "tcp.flags.str", flag_str);
    put(f, "tcp.flags.res", (flags >> 9) & 7);
    put(f, "tcp.flags.ae", ae);
    put(f, "tcp.flags.cwr", cwr);
    put(f, "tcp.flags.ece", ece);
    put(f, "tcp.flags.urg", urg);
    put(f, "tcp.flags.ack", has_ack);
    put(f, "tcp.flags.push", psh);
    put(f, "tcp.flags.reset", rst);
    put(f, "tcp.flags.syn", syn);
    put(f, "tcp.flags.fin", fin);
    put(f, "tcp.window_size_value", window);
    put(f, "tcp.checksum", checksum);
    put(f, "tcp.checksum.status",
        complete ? (transport_sum(*rec.src_ip, *rec.dst_ip, 6, seg) == 0xffff ? 1 : 0) : 2);
    put(f, "tcp.urgent_pointer", urgent);
    put(f, "tcp.connection.syn", syn && !has_ack);
    put(f, "tcp.connection.synack", syn && has_ack);
    put(f, "tcp.connection.fin", fin);
    put(f, "tcp.connection.rst", rst);
    if (!payload.empty()) put(f, "tcp.payload.first_byte", payload[0]);

    const TcpOptions opts = walk_tcp_options(seg.subspan(20, hdr - 20), f);

    // Conversation tracking.
    auto [key, d] = canonical({*rec.src_ip, sport}, {*rec.dst_ip, dport});
    auto [it, created] = tcp.try_emplace(key);
    TcpStream& st = it->second;
    if (created) {
        st.index = tcp.size() - 1;
        st.first = now;
        st.previous = now;
    }
    TcpDirection& me = st.dir[static_cast<std::size_t>(d)];
    TcpDirection& peer = st.dir[static_cast<std::size_t>(1 - d)];

    if (syn) {
        me.isn = seq;
        me.syn_seen = true;
        me.wscale = opts.wscale;
        me.pending_syn_seq = seq;
        me.pending_syn_time = now;
        if (!has_ack && !st.syn_time) {
            st.syn_time = now;
            st.client = d;
        }
        if (has_ack) st.synack_seen = true;
    } else if (!me.isn) {
        me.isn = seq;
    }

    if (has_ack) {
        if (peer.pending_syn_seq && ack == *peer.pending_syn_seq + 1) {
            put(f, "tcp.analysis.ack_rtt", seconds_between(peer.pending_syn_time, now));
            peer.pending_syn_seq.reset();
            if (!syn && d == st.client && st.synack_seen && st.syn_time && !st.initial_rtt) {
                st.initial_rtt = seconds_between(*st.syn_time, now);
            }
        }
        put(f, "tcp.ack_raw", ack);
        put(f, "tcp.ack", peer.isn ? static_cast<std::uint32_t>(ack - *peer.isn) : ack);
    }

    const std::uint32_t rel_seq = seq - *me.isn;
    put(f, "tcp.seq", rel_seq);
    put(f, "tcp.nxtseq", static_cast<std::uint32_t>(rel_seq + payload.size() + (syn ? 1 : 0) + (fin ? 1 : 0)));

    // Window scaling is in effect only when both SYNs carried the option.
    double scale = -1;
    if (me.syn_seen && peer.syn_seen) {
        scale = (me.wscale && peer.wscale) ? static_cast<double>(1u << std::min<unsigned>(*me.wscale, 14)) : -2;
    }
    put(f, "tcp.window_size_scalefactor", scale);
    put(f, "tcp.window_size", (!syn && scale > 0) ? window * scale : window);

    if (st.initial_rtt) put(f, "tcp.analysis.initial_rtt", *st.initial_rtt);
    put(f, "tcp.stream", static_cast<double>(st.index));
    put(f, "tcp.time_relative", seconds_between(st.first, now));
    put(f, "tcp.time_delta", seconds_between(st.previous, now));
    put(f, "tcp.completeness.syn", st.syn_time.has_value() || me.syn_seen || peer.syn_seen);
    st.previous = now;

    if (payload.empty()) return;

    if (sport == 53 || dport == 53) {
        application(f, [&](FieldMap& out) {
            ByteCursor p(payload);
            const std::uint16_t len = p.u16();
            parse_dns(p.rest(), "tcp", len, out);
        });
    } else if ((is_http_port(sport) || is_http_port(dport)) &&
               looks_like_http(std::string_view(reinterpret_cast<const char*>(payload.data()),
                                                std::min<std::size_t>(payload.size(), 16)))) {
        application(f, [&](FieldMap& out) {
            parse_http(std::string_view(reinterpret_cast<const char*>(payload.data()), payload.size()), st, out);
        });
    } else if (looks_like_tls(payload)) {
        application(f, [&](FieldMap& out) { parse_tls(payload, out); });
    }
}

void PacketDecoder::State::decode_udp(Bytes seg, bool complete, PacketRecord& rec) {
    ByteCursor c(seg);
    const std::uint16_t sport = c.u16();
    const std::uint16_t dport = c.u16();
    const std::uint16_t length = c.u16();
    const std::uint16_t checksum = c.u16();
    if (length < 8) throw Malformed{};
    const auto payload = seg.subspan(8, std::min<std::size_t>(length, seg.size()) - 8);
    const Timestamp& now = rec.timestamp;

    auto& f = rec.fields;
    put(f, "udp.srcport", sport);
    put(f, "udp.dstport", dport);
    put(f, "udp.service_port", std::min(sport, dport));
    put(f, "udp.length", length);
    put(f, "udp.checksum", checksum);
    put(f, "udp.checksum.zero", checksum == 0);
    const bool verifiable = complete && checksum != 0 && seg.size() >= length;
    put(f, "udp.checksum.status",
        verifiable ? (transport_sum(*rec.src_ip, *rec.dst_ip, 17, seg.subspan(0, length)) == 0xffff ? 1 : 0) : 2);
    put(f, "udp.payload.len", static_cast<double>(length - 8));
    if (!payload.empty()) put(f, "udp.payload.first_byte", payload[0]);

    auto [key, d] = canonical({*rec.src_ip, sport}, {*rec.dst_ip, dport});
    auto [it, created] = udp.try_emplace(key);
    UdpStream& st = it->second;
    if (created) {
        st.index = udp.size() - 1;
        st.first = now;
        st.previous = now;
    }
    put(f, "udp.stream", static_cast<double>(st.index));
    put(f, "udp.time_relative", seconds_between(st.first, now));
    put(f, "udp.time_delta", seconds_between(st.previous, now));
    st.previous = now;

    if (payload.empty()) return;
    auto dns_port = [&](std::uint16_t port) { return sport == port || dport == port; };
    if (dns_port(53) || dns_port(5353) || dns_port(5355)) {
        const std::string_view transport = dns_port(53) ? "udp" : dns_port(5353) ? "mdns" : "llmnr";
        application(f, [&](FieldMap& out) { parse_dns(payload, transport, std::nullopt, out); });
    } else if (dns_port(67) || dns_port(68)) {
        application(f, [&](FieldMap& out) { parse_dhcp(payload, out); });
    }
}

std::optional<PacketRecord> decode_packet(std::span<const std::uint8_t> frame, const Timestamp& timestamp) {
    PacketDecoder decoder;
    return decoder.decode(frame, timestamp);
}

}  // namespace dfp
