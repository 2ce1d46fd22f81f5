#include <gtest/gtest.h>

#include <set>

#include "dfp/error.hpp"
#include "dfp/model.hpp"
#include "support/packets.hpp"

using namespace dfp;

TEST(DefaultSchema, Has218FieldsSplitByLayer) {
    const auto& s = default_schema();
    EXPECT_EQ(s.size(), 218u);
    EXPECT_EQ(s.count(Layer::network), 33u);
    EXPECT_EQ(s.count(Layer::transport), 64u);
    EXPECT_EQ(s.count(Layer::application), 121u);
}

TEST(DefaultSchema, ExcludesAddressesAndIpChecksum) {
    for (auto name : kIdentityFields) EXPECT_FALSE(default_schema().contains(name)) << name;
    EXPECT_TRUE(default_schema().contains("ip.checksum.status"));
}

TEST(DefaultSchema, NamesFieldsQuotedInTheFeatureTable) {
    for (auto name : {"ip.hdr_len", "ip.dsfield", "ip.ttl", "ip.flags.df", "icmp.type", "tcp.flags.syn",
                      "tcp.window_size_value", "udp.length", "dns.qry.name", "http.request.method",
                      "dhcp.option.hostname", "tls.handshake.type"}) {
        EXPECT_TRUE(default_schema().contains(name)) << name;
    }
    EXPECT_EQ(default_schema()[*default_schema().index_of("dns.qry.name")].kind, FeatureKind::nominal);
    EXPECT_EQ(default_schema()[*default_schema().index_of("ip.ttl")].kind, FeatureKind::numeric);
}

TEST(Schema, RejectsDuplicateAndEmptyNames) {
    EXPECT_THROW(FeatureSchema({{"a"}, {"a"}}), ValidationError);
    EXPECT_THROW(FeatureSchema({{""}}), ValidationError);
}

TEST(Schema, JsonRoundTrip) {
    FeatureSchema s({{"ip.ttl", Layer::network, FeatureKind::numeric, true},
                     {"dns.qry.name", Layer::application, FeatureKind::nominal, false}});
    EXPECT_EQ(schema_from_json(schema_to_json(s)), s);
    EXPECT_EQ(schema_from_json(schema_to_json(default_schema())), default_schema());
}

TEST(Schema, JsonRejectsUnknownLayer) {
    EXPECT_THROW(schema_from_json(R"([{"name":"x","layer":"link"}])"), ValidationError);
    EXPECT_THROW(schema_from_json(R"({"name":"x"})"), ValidationError);
    EXPECT_THROW(schema_from_json("[{"), ValidationError);
}

TEST(FeatureValue, AbsentIsNotZero) {
    EXPECT_NE(FeatureValue::absent(), FeatureValue::numeric(0));
    EXPECT_TRUE(FeatureValue{}.is_absent());
    EXPECT_FALSE(FeatureValue::text("x").is_coded());
    EXPECT_TRUE(FeatureValue::nominal(3).is_coded());
}

TEST(Numbers, FormatIsPositionalAndShortest) {
    EXPECT_EQ(format_number(64), "64");
    EXPECT_EQ(format_number(0.25), "0.25");
    EXPECT_EQ(format_number(-3), "-3");
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(4294967295.0), "4294967295");
    EXPECT_EQ(format_number(0.001), "0.001");
}

TEST(Numbers, ParseDecimalAndHex) {
    EXPECT_EQ(parse_number("0x0035"), 53.0);
    EXPECT_EQ(parse_number("0X1f"), 31.0);
    EXPECT_EQ(parse_number("-0x10"), -16.0);
    EXPECT_EQ(parse_number("64"), 64.0);
    EXPECT_EQ(parse_number("0.5"), 0.5);
    EXPECT_FALSE(parse_number(""));
    EXPECT_FALSE(parse_number("0x"));
    EXPECT_FALSE(parse_number("12ab"));
    EXPECT_FALSE(parse_number("0xzz"));
}

TEST(Numbers, FormatParseRoundTrip) {
    for (double v : {0.0, 1.0, 0.1, 123456.789, 1e-7, 65535.0, 0.000123}) {
        EXPECT_EQ(parse_number(format_number(v)), v) << v;
    }
}

TEST(Addresses, MacAndIpv4) {
    const auto m = parse_mac("02:00:00:00:00:0A");
    ASSERT_TRUE(m);
    EXPECT_EQ(format_mac(*m), "02:00:00:00:00:0a");
    EXPECT_FALSE(parse_mac("02:00:00:00:00"));
    EXPECT_FALSE(parse_mac("zz:00:00:00:00:00"));
    EXPECT_EQ(parse_ipv4("192.168.1.20"), fixture::ip(192, 168, 1, 20));
    EXPECT_EQ(format_ipv4(fixture::ip(10, 0, 0, 1)), "10.0.0.1");
    EXPECT_FALSE(parse_ipv4("256.1.1.1"));
    EXPECT_FALSE(parse_ipv4("1.2.3"));
}

TEST(Timestamps, SecondsBetween) {
    EXPECT_DOUBLE_EQ(seconds_between({10, 500'000'000}, {12, 0}), 1.5);
    EXPECT_DOUBLE_EQ(seconds_between({12, 0}, {10, 500'000'000}), -1.5);
}

namespace {

LabelMap two_dlink() {
    return LabelMap({{"02:00:00:00:00:01", "D-LinkCam", "D-Link"},
                     {"02:00:00:00:00:02", "D-LinkSensor", "D-Link"},
                     {"02:00:00:00:00:03", "Aria", "Fitbit"},
                     {"10.0.0.9", "Lightify", "Osram"}});
}

}  // namespace

TEST(GenreMap, SharedManufacturerBecomesGenre) {
    const auto g = build_genre_map(two_dlink());
    EXPECT_EQ(g.at("D-LinkCam"), "D-Link");
    EXPECT_EQ(g.at("D-LinkSensor"), "D-Link");
}

TEST(GenreMap, SingletonManufacturerUsesDeviceName) {
    const auto g = build_genre_map(two_dlink());
    EXPECT_EQ(g.at("Aria"), "Aria");
    EXPECT_EQ(g.at("Lightify"), "Lightify");
}

TEST(GenreMap, EmptyMapIsAnError) { EXPECT_THROW(build_genre_map(LabelMap{}), ValidationError); }

TEST(GenreMap, DeviceUnderTwoManufacturersIsAnError) {
    LabelMap m({{"02:00:00:00:00:01", "Cam", "A"}, {"02:00:00:00:00:02", "Cam", "B"}});
    EXPECT_THROW(build_genre_map(m), ValidationError);
}

TEST(GenreMap, SeveralKeysForOneDeviceCountOnce) {
    LabelMap m({{"02:00:00:00:00:01", "Cam", "A"}, {"10.0.0.1", "Cam", "A"}, {"02:00:00:00:00:02", "Plug", "B"}});
    const auto g = build_genre_map(m);
    EXPECT_EQ(g.at("Cam"), "Cam");
    EXPECT_EQ(m.device_names(), (std::vector<std::string>{"Cam", "Plug"}));
}

TEST(LabelMap, MatchesMacBeforeIp) {
    const auto m = two_dlink();
    PacketRecord r;
    r.src_mac = fixture::mac(1);
    r.src_ip = fixture::ip(10, 0, 0, 9);
    ASSERT_NE(m.match_source(r), nullptr);
    EXPECT_EQ(m.match_source(r)->name, "D-LinkCam");
    r.src_mac = fixture::mac(77);
    EXPECT_EQ(m.match_source(r)->name, "Lightify");
    r.src_ip.reset();
    EXPECT_EQ(m.match_source(r), nullptr);
}

TEST(LabelMap, RejectsBadAndDuplicateKeys) {
    EXPECT_THROW(LabelMap({{"nonsense", "X", "Y"}}), ValidationError);
    EXPECT_THROW(LabelMap({{"02:00:00:00:00:01", "X", "Y"}, {"02:00:00:00:00:01", "Z", "Y"}}), ValidationError);
    EXPECT_THROW(LabelMap({{"02:00:00:00:00:01", "", "Y"}}), ValidationError);
}

TEST(LabelMap, JsonRoundTrip) {
    const auto m = two_dlink();
    const auto back = label_map_from_json(label_map_to_json(m));
    ASSERT_EQ(back.entries().size(), 4u);
    EXPECT_EQ(back.entries()[3].key, "10.0.0.9");
    EXPECT_EQ(back.entries()[3].manufacturer, "Osram");
    EXPECT_THROW(label_map_from_json(R"({"devices":[{"key":"02:00:00:00:00:01"}]})"), ValidationError);
}

TEST(BundledLabelMaps, IotSentinelHas27DevicesIn12Genres) {
    const auto m = load_label_map(std::filesystem::path(DFP_DATA_DIR) / "label_maps/iot_sentinel.json");
    EXPECT_EQ(m.device_names().size(), 27u);
    const auto g = build_genre_map(m);
    std::set<std::string> genres;
    for (const auto& [d, genre] : g) genres.insert(genre);
    EXPECT_EQ(genres.size(), 12u);
    for (auto name : {"Aria", "D-Link", "Hue", "Smarter", "Lightify", "MAXGateway", "TP-Link", "WeMo", "Withings"}) {
        EXPECT_TRUE(genres.contains(name)) << name;
    }
    EXPECT_EQ(g.at("D-LinkSiren"), "D-Link");
}

TEST(BundledLabelMaps, UnswHas19Devices) {
    const auto m = load_label_map(std::filesystem::path(DFP_DATA_DIR) / "label_maps/unsw.json");
    EXPECT_EQ(m.device_names().size(), 19u);
    EXPECT_EQ(build_genre_map(m).at("WithingsSleep"), "Withings");
}

TEST(NominalDictionary, FirstOccurrenceCodes) {
    NominalDictionary d;
    EXPECT_EQ(d.code_for("a"), 0);
    EXPECT_EQ(d.code_for("b"), 1);
    EXPECT_EQ(d.code_for("a"), 0);
    EXPECT_EQ(d.text(1), "b");
    EXPECT_EQ(d.find("c"), std::nullopt);
    EXPECT_THROW(d.text(5), Error);
}

TEST(LabeledDataset, ValidateCatchesArity) {
    LabeledDataset ds;
    ds.schema = FeatureSchema({{"a"}, {"b"}});
    ds.rows.push_back({{FeatureValue::numeric(1)}, "d", "g"});
    EXPECT_THROW(ds.validate(), DataError);
}

TEST(BlockPlan, Validates) {
    EXPECT_NO_THROW((BlockPlan{10, 10, 0}.validate()));
    EXPECT_THROW((BlockPlan{0, 10, 0}.validate()), ValidationError);
    EXPECT_THROW((BlockPlan{10, 0, 0}.validate()), ValidationError);
}
