#include <gtest/gtest.h>

#include "dfp/decode.hpp"
#include "dfp/error.hpp"
#include "dfp/extraction.hpp"
#include "support/packets.hpp"

using namespace dfp;

namespace {

const fixture::Host kCam{fixture::mac(2), fixture::ip(192, 168, 1, 20)};
const fixture::Host kGateway{fixture::mac(0xfe), fixture::ip(192, 168, 1, 1)};

LabeledDataset text_column(std::vector<FeatureValue> cells) {
    LabeledDataset ds;
    ds.schema = FeatureSchema({{"http.host", Layer::application, FeatureKind::nominal}});
    ds.dictionaries.resize(1);
    for (auto& c : cells) ds.rows.push_back({{std::move(c)}, "d", "d"});
    ds.devices = {"d"};
    return ds;
}

}  // namespace

TEST(Extraction, TcpRecordFillsTransportColumns) {
    const auto rec = decode_packet(fixture::tcp_frame(kCam, kGateway, {}), {1, 0});
    ASSERT_TRUE(rec);
    const FeatureExtractor ex(default_schema(), {});
    const auto row = ex(*rec);
    const auto& schema = ex.schema();
    ASSERT_EQ(row.size(), schema.size());
    EXPECT_EQ(schema.size(), default_schema().size());
    EXPECT_EQ(row[*schema.index_of("tcp.srcport")], FeatureValue::numeric(40000));
    EXPECT_TRUE(row[*schema.index_of("udp.srcport")].is_absent());
    EXPECT_FALSE(schema.contains("ip.src"));
}

TEST(Extraction, IncludeIpAppendsSourceAddress) {
    const auto rec = decode_packet(fixture::tcp_frame(kCam, kGateway, {}), {1, 0});
    ASSERT_TRUE(rec);
    ExtractionPolicy policy;
    policy.include_ip = true;
    const FeatureExtractor ex(default_schema(), policy);
    ASSERT_EQ(ex.schema().size(), default_schema().size() + 1);
    const auto& last = ex.schema()[ex.schema().size() - 1];
    EXPECT_EQ(last.name, "ip.src");
    EXPECT_EQ(last.kind, FeatureKind::nominal);
    EXPECT_EQ(ex(*rec).back(), FeatureValue::text("192.168.1.20"));
}

TEST(Extraction, ExclusionsAndAlwaysInclude) {
    ExtractionPolicy policy;
    policy.extra_excluded = {"ip.ttl"};
    policy.always_include = {"tcp.srcport"};
    const auto schema = effective_schema(default_schema(), policy);
    EXPECT_FALSE(schema.contains("ip.ttl"));
    EXPECT_TRUE(schema[*schema.index_of("tcp.srcport")].always_include);
    policy.always_include = {"ip.ttl"};
    EXPECT_THROW(effective_schema(default_schema(), policy), ValidationError);
}

TEST(Extraction, BuildDatasetFollowsDeviceOrder) {
    const auto rec = decode_packet(fixture::tcp_frame(kCam, kGateway, {}), {1, 0});
    std::vector<LabeledPacket> packets{{*rec, "b", "g"}, {*rec, "c", "g"}, {*rec, "a", "g"}};
    const FeatureExtractor ex(default_schema(), {});
    const auto ds = build_dataset(packets, ex, {"a", "b"});
    EXPECT_EQ(ds.devices, (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.rows[0].device, "b");
}

TEST(Extraction, NominalizeAssignsFirstOccurrenceCodes) {
    auto ds = nominalize_dataset(text_column({FeatureValue::text("a"), FeatureValue::text("b"), FeatureValue::text("a")}));
    EXPECT_EQ(ds.rows[0].values[0].nominal().code, 0);
    EXPECT_EQ(ds.rows[1].values[0].nominal().code, 1);
    EXPECT_EQ(ds.rows[2].values[0].nominal().code, 0);
    EXPECT_EQ(ds.dictionaries[0].text(1), "b");
    const auto again = nominalize_dataset(ds);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(again.rows[i].values, ds.rows[i].values);
    EXPECT_EQ(again.dictionaries[0], ds.dictionaries[0]);
}

TEST(Extraction, NominalizeLeavesAbsentColumnAlone) {
    const auto before = text_column({FeatureValue::absent(), FeatureValue::absent()});
    const auto after = nominalize_dataset(before);
    EXPECT_TRUE(after.rows[0].values[0].is_absent());
    EXPECT_TRUE(after.rows[1].values[0].is_absent());
    EXPECT_TRUE(after.dictionaries[0].empty());
}

TEST(Extraction, CharacterRendering) {
    EXPECT_EQ(character_rendering(FeatureValue::numeric(64)), "64");
    EXPECT_EQ(character_rendering(FeatureValue::numeric(0.5)), "0.5");
    EXPECT_EQ(character_rendering(FeatureValue::absent()), "N");
    EXPECT_EQ(character_rendering(FeatureValue::nominal(13, "x")), "13");
    EXPECT_THROW(character_rendering(FeatureValue::text("x")), Error);
}

TEST(Extraction, DictionariesJsonRoundTrip) {
    auto ds = nominalize_dataset(text_column({FeatureValue::text("q"), FeatureValue::text("r")}));
    auto fresh = text_column({FeatureValue::text("r")});
    load_dictionaries(fresh, dictionaries_to_json(ds));
    fresh = nominalize_dataset(std::move(fresh));
    EXPECT_EQ(fresh.rows[0].values[0].nominal().code, 1);
}

TEST(Extraction, MatrixSaveLoad) {
    auto ds = text_column({FeatureValue::text("q"), FeatureValue::absent(), FeatureValue::text("r")});
    ds.rows[1].device = "e";
    ds.rows[1].genre = "g";
    ds.devices = {"e", "d"};
    ds = nominalize_dataset(std::move(ds));
    const auto dir = fixture::temp_dir("matrix");
    const auto files = MatrixFiles::in(dir);
    save_matrix(ds, files);
    const auto back = load_matrix(files);
    EXPECT_EQ(back.schema, ds.schema);
    EXPECT_EQ(back.dictionaries, ds.dictionaries);
    EXPECT_EQ(back.devices, ds.devices);
    ASSERT_EQ(back.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(back.rows[i].values, ds.rows[i].values) << i;
        EXPECT_EQ(back.rows[i].device, ds.rows[i].device);
        EXPECT_EQ(back.rows[i].genre, ds.rows[i].genre);
    }
}
