#include <string_view>

#include "dfp/model.hpp"

namespace dfp {
namespace {

struct Row {
    std::string_view name;
    FeatureKind kind;
};

constexpr auto N = FeatureKind::numeric;
constexpr auto S = FeatureKind::nominal;

// IPv4 and ICMP.
constexpr Row kNetwork[] = {
    {"ip.version", N},
    {"ip.hdr_len", N},
    {"ip.dsfield", N},
    {"ip.dsfield.dscp", N},
    {"ip.dsfield.ecn", N},
    {"ip.len", N},
    {"ip.id", N},
    {"ip.flags", N},
    {"ip.flags.rb", N},
    {"ip.flags.df", N},
    {"ip.flags.mf", N},
    {"ip.frag_offset", N},
    {"ip.ttl", N},
    {"ip.proto", N},
    {"ip.checksum.status", N},
    {"ip.opt.count", N},
    {"ip.opt.type", N},
    {"ip.opt.type.copy", N},
    {"ip.opt.type.class", N},
    {"ip.opt.type.number", N},
    {"ip.opt.len", N},
    {"ip.opt.ra", N},
    {"icmp.type", N},
    {"icmp.code", N},
    {"icmp.checksum", N},
    {"icmp.checksum.status", N},
    {"icmp.ident", N},
    {"icmp.seq", N},
    {"icmp.seq_le", N},
    {"icmp.mtu", N},
    {"icmp.data_len", N},
    {"icmp.inner.ip.proto", N},
    {"icmp.inner.ip.ttl", N},
};

// TCP and UDP.
constexpr Row kTransport[] = {
    {"tcp.srcport", N},
    {"tcp.dstport", N},
    {"tcp.service_port", N},
    {"tcp.stream", N},
    {"tcp.len", N},
    {"tcp.seq", N},
    {"tcp.seq_raw", N},
    {"tcp.nxtseq", N},
    {"tcp.ack", N},
    {"tcp.ack_raw", N},
    {"tcp.hdr_len", N},
    {"tcp.flags", N},
    {"tcp.flags.str", S},
    {"tcp.flags.res", N},
    {"tcp.flags.ae", N},
    {"tcp.flags.cwr", N},
    {"tcp.flags.ece", N},
    {"tcp.flags.urg", N},
    {"tcp.flags.ack", N},
    {"tcp.flags.push", N},
    {"tcp.flags.reset", N},
    {"tcp.flags.syn", N},
    {"tcp.flags.fin", N},
    {"tcp.window_size_value", N},
    {"tcp.window_size", N},
    {"tcp.window_size_scalefactor", N},
    {"tcp.checksum", N},
    {"tcp.checksum.status", N},
    {"tcp.urgent_pointer", N},
    {"tcp.connection.syn", N},
    {"tcp.connection.synack", N},
    {"tcp.connection.fin", N},
    {"tcp.connection.rst", N},
    {"tcp.options.len", N},
    {"tcp.options.count", N},
    {"tcp.options.layout", S},
    {"tcp.options.mss_val", N},
    {"tcp.options.wscale.shift", N},
    {"tcp.options.wscale.multiplier", N},
    {"tcp.options.sack_perm", N},
    {"tcp.options.sack.count", N},
    {"tcp.options.timestamp.tsval", N},
    {"tcp.options.timestamp.tsecr", N},
    {"tcp.options.nop.count", N},
    {"tcp.options.eol", N},
    {"tcp.options.tfo", N},
    {"tcp.analysis.ack_rtt", N},
    {"tcp.analysis.initial_rtt", N},
    {"tcp.time_relative", N},
    {"tcp.time_delta", N},
    {"tcp.completeness.syn", N},
    {"tcp.payload.first_byte", N},
    {"udp.srcport", N},
    {"udp.dstport", N},
    {"udp.service_port", N},
    {"udp.length", N},
    {"udp.checksum", N},
    {"udp.checksum.status", N},
    {"udp.checksum.zero", N},
    {"udp.stream", N},
    {"udp.time_relative", N},
    {"udp.time_delta", N},
    {"udp.payload.len", N},
    {"udp.payload.first_byte", N},
};

// DNS, HTTP, TLS and DHCP.
constexpr Row kApplication[] = {
    {"dns.id", N},
    {"dns.flags", N},
    {"dns.flags.response", N},
    {"dns.flags.opcode", N},
    {"dns.flags.authoritative", N},
    {"dns.flags.truncated", N},
    {"dns.flags.recdesired", N},
    {"dns.flags.recavail", N},
    {"dns.flags.z", N},
    {"dns.flags.authenticated", N},
    {"dns.flags.checkdisable", N},
    {"dns.flags.rcode", N},
    {"dns.count.queries", N},
    {"dns.count.answers", N},
    {"dns.count.auth_rr", N},
    {"dns.count.add_rr", N},
    {"dns.qry.name", S},
    {"dns.qry.name.len", N},
    {"dns.count.labels", N},
    {"dns.qry.type", N},
    {"dns.qry.class", N},
    {"dns.qry.qu", N},
    {"dns.resp.name", S},
    {"dns.resp.type", N},
    {"dns.resp.class", N},
    {"dns.resp.ttl", N},
    {"dns.resp.len", N},
    {"dns.rr.udp_payload_size", N},
    {"dns.length", N},
    {"dns.transport", S},
    {"http.request", N},
    {"http.response", N},
    {"http.request.method", S},
    {"http.request.uri", S},
    {"http.request.uri.len", N},
    {"http.request.version", S},
    {"http.response.version", S},
    {"http.response.code", N},
    {"http.response.phrase", S},
    {"http.host", S},
    {"http.user_agent", S},
    {"http.accept", S},
    {"http.accept_encoding", S},
    {"http.accept_language", S},
    {"http.connection", S},
    {"http.content_type", S},
    {"http.content_length_header", N},
    {"http.server", S},
    {"http.cache_control", S},
    {"http.transfer_encoding", S},
    {"http.chunked", N},
    {"http.chunk_size", N},
    {"http.request_number", N},
    {"http.response_number", N},
    {"http.cookie.len", N},
    {"http.header.count", N},
    {"http.header.len", N},
    {"http.location", S},
    {"http.upgrade", S},
    {"http.soapaction", S},
    {"http.referer", S},
    {"tls.record.content_type", N},
    {"tls.record.version", N},
    {"tls.record.length", N},
    {"tls.record.count", N},
    {"tls.handshake", N},
    {"tls.handshake.type", N},
    {"tls.handshake.length", N},
    {"tls.handshake.version", N},
    {"tls.handshake.random_time", N},
    {"tls.handshake.session_id_length", N},
    {"tls.handshake.cipher_suites_length", N},
    {"tls.handshake.cipher_suites_count", N},
    {"tls.handshake.ciphersuite", N},
    {"tls.handshake.comp_methods_length", N},
    {"tls.handshake.comp_method", N},
    {"tls.handshake.extensions_length", N},
    {"tls.handshake.extension.count", N},
    {"tls.handshake.extension.types", S},
    {"tls.handshake.extensions_server_name", S},
    {"tls.handshake.extensions_server_name_len", N},
    {"tls.handshake.extensions.supported_version", N},
    {"tls.handshake.extensions_supported_groups_length", N},
    {"tls.handshake.extensions_ec_point_formats_length", N},
    {"tls.handshake.sig_hash_alg_len", N},
    {"tls.handshake.extensions_alpn_str", S},
    {"tls.handshake.ja3_full", S},
    {"tls.alert_message.level", N},
    {"tls.alert_message.desc", N},
    {"tls.change_cipher_spec", N},
    {"tls.app_data.length", N},
    {"dhcp.type", N},
    {"dhcp.hw.type", N},
    {"dhcp.hw.len", N},
    {"dhcp.hops", N},
    {"dhcp.id", N},
    {"dhcp.secs", N},
    {"dhcp.flags.bc", N},
    {"dhcp.flags.reserved", N},
    {"dhcp.cookie", N},
    {"dhcp.server_name.len", N},
    {"dhcp.file.len", N},
    {"dhcp.option.dhcp", N},
    {"dhcp.option.hostname", S},
    {"dhcp.option.vendor_class_id", S},
    {"dhcp.option.request_list", S},
    {"dhcp.option.request_list.len", N},
    {"dhcp.option.max_msg_size", N},
    {"dhcp.option.ip_address_lease_time", N},
    {"dhcp.option.renewal_time", N},
    {"dhcp.option.rebinding_time", N},
    {"dhcp.option.client_id.type", N},
    {"dhcp.option.client_id.len", N},
    {"dhcp.option.count", N},
    {"dhcp.option.types", S},
    {"dhcp.option.end", N},
    {"dhcp.option.padding_len", N},
    {"dhcp.option.interface_mtu", N},
    {"dhcp.option.domain_name", S},
    {"dhcp.option.fqdn.flags", N},
    {"dhcp.option.user_class", S},
};

static_assert(std::size(kNetwork) == 33);
static_assert(std::size(kTransport) == 64);
static_assert(std::size(kApplication) == 121);

FeatureSchema build_default_schema() {
    std::vector<FeatureDef> defs;
    defs.reserve(218);
    auto add = [&defs](std::span<const Row> rows, Layer layer) {
        for (const auto& row : rows) defs.push_back({std::string(row.name), layer, row.kind, false});
    };
    add(kNetwork, Layer::network);
    add(kTransport, Layer::transport);
    add(kApplication, Layer::application);
    return FeatureSchema(std::move(defs));
}

}  // namespace

const FeatureSchema& default_schema() {
    static const FeatureSchema schema = build_default_schema();
    return schema;
}

}  // namespace dfp
