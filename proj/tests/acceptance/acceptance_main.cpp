// Acceptance checks. Prints one PASS / FAIL / SKIP line per criterion and
// exits non-zero if a required criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dfp/classifier.hpp"
#include "dfp/decode.hpp"
#include "dfp/diagnostics.hpp"
#include "dfp/error.hpp"
#include "dfp/metrics.hpp"
#include "dfp/pipeline.hpp"
#include "support/packets.hpp"
#include "support/synthetic.hpp"

using namespace dfp;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status;
    std::string detail;
};

Outcome pass(std::string d) { return {Status::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::fail, std::move(d)}; }

std::string fmt(double x, int digits = 6) {
    std::ostringstream o;
    o.precision(digits);
    o << x;
    return o.str();
}

// 1 ---------------------------------------------------------------------------

long double entropy_oracle(const std::string& s) {
    std::map<char, long long> counts;
    for (char c : s) ++counts[c];
    const long double n = static_cast<long double>(s.size());
    long double h = 0;
    for (const auto& [c, k] : counts) {
        const long double p = static_cast<long double>(k) / n;
        h -= p * log2l(p);
    }
    return h / n;
}

Outcome metric_entropy_oracle() {
    std::mt19937_64 rng(20240101);
    const std::string symbols = "0123456789N.";
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        const std::size_t alphabet = 1 + rng() % symbols.size();
        const std::size_t length = 1 + rng() % 10000;
        std::string s(length, ' ');
        for (auto& c : s) c = symbols[rng() % alphabet];
        const double got = metric_entropy(s);
        if (!(got >= 0.0 && got < 1.0)) return fail("value " + fmt(got, 17) + " outside [0,1) for length " + std::to_string(length));
        const double err = static_cast<double>(fabsl(static_cast<long double>(got) - entropy_oracle(s)));
        worst = std::max(worst, err);
        if (err > 1e-12) return fail("string " + std::to_string(i) + " differs by " + fmt(err));
    }
    return pass("10000 strings, max |error| " + fmt(worst, 3));
}

// 2 ---------------------------------------------------------------------------

Outcome suitability_identity() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng() % 300;
        std::vector<double> v(n), s(n);
        for (std::size_t j = 0; j < n; ++j) {
            v[j] = unit(rng) * 0.5;
            s[j] = unit(rng);
        }
        const auto u = suitability_vector(v, s);
        for (std::size_t j = 0; j < n; ++j) {
            if (u[j] != v[j] * s[j]) return fail("u != v*s at trial " + std::to_string(trial));
        }
    }
    set_diagnostic_sink({});
    for (int trial = 0; trial < 200; ++trial) {
        MetricReport r;
        const std::size_t n = 5 + rng() % 200;
        for (std::size_t j = 0; j < n; ++j) {
            r.features.push_back("f" + std::to_string(j));
            r.u_mean.push_back(rng() % 4 == 0 ? 0.0 : unit(rng) * 0.1);
        }
        r.always_include.assign(n, false);
        r.auto_included.assign(n, false);
        std::vector<double> lambdas{0.0};
        for (int k = 0; k < 20; ++k) lambdas.push_back(unit(rng) * 0.12);
        std::sort(lambdas.begin(), lambdas.end());
        std::set<std::string> previous;
        for (std::size_t k = 0; k < lambdas.size(); ++k) {
            const auto names = select_features(r, lambdas[k]);
            const std::set<std::string> now(names.begin(), names.end());
            if (k > 0 && !std::includes(previous.begin(), previous.end(), now.begin(), now.end())) {
                return fail("selection grew when lambda rose to " + fmt(lambdas[k]));
            }
            previous = now;
        }
    }
    return pass("1000 random vectors exact; selection monotone over 200 reports x 21 thresholds");
}

// 3 ---------------------------------------------------------------------------

Outcome planted_feature_recovery() {
    const auto ds = fixture::planted_dataset();
    MetricsOptions options;
    options.plan = {10, 10, 31};
    options.repetitions = 50;
    auto report = evaluate_features(ds, options);
    const auto best = static_cast<std::size_t>(std::max_element(report.u_mean.begin(), report.u_mean.end()) -
                                               report.u_mean.begin());
    if (report.features[best] != "planted") return fail("maximal mean u is '" + report.features[best] + "'");
    for (std::size_t j = 0; j < report.size(); ++j) {
        if (j != best && report.u_mean[j] >= report.u_mean[best]) return fail("tie with " + report.features[j]);
    }
    const auto selected = select_features(report, 0.0);
    const auto split = split_dataset(select_columns(ds, selected), {0.7, 31});
    const auto model = train_tree(split.train, Level::device);
    const auto eval = evaluate(model, split.validation, Level::device);
    if (eval.accuracy < 0.99) return fail("validation accuracy " + fmt(eval.accuracy));
    return pass("planted u_mean " + fmt(report.u_mean[best]) + " over R=50; " + std::to_string(selected.size()) +
                " features selected; validation accuracy " + fmt(eval.accuracy));
}

// 4 ---------------------------------------------------------------------------

struct OracleCandidate {
    std::size_t feature;
    SplitKind kind;
    double threshold;
    long double gain;
    long double ratio;
};

long double entropy_of(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& labels) {
    std::map<std::size_t, long double> counts;
    for (auto r : rows) counts[labels[r]] += 1;
    long double h = 0;
    const long double n = static_cast<long double>(rows.size());
    for (const auto& [c, k] : counts) h -= (k / n) * log2l(k / n);
    return h;
}

/// Gain and gain ratio of a partition, from scratch.
std::pair<long double, long double> score_partition(const std::vector<std::vector<std::size_t>>& parts,
                                                    const std::vector<std::size_t>& rows,
                                                    const std::vector<std::size_t>& labels) {
    const long double n = static_cast<long double>(rows.size());
    long double weighted = 0, split_info = 0;
    for (const auto& p : parts) {
        if (p.empty()) continue;
        const long double w = static_cast<long double>(p.size()) / n;
        weighted += w * entropy_of(p, labels);
        split_info -= w * log2l(w);
    }
    const long double gain = entropy_of(rows, labels) - weighted;
    return {gain, gain / split_info};
}

/// Every admissible candidate per feature.
std::vector<std::vector<OracleCandidate>> enumerate_splits(const LabeledDataset& ds, const std::vector<std::size_t>& rows,
                                                           const std::vector<std::size_t>& labels, std::size_t min_leaf) {
    std::vector<std::vector<OracleCandidate>> out(ds.schema.size());
    for (std::size_t j = 0; j < ds.schema.size(); ++j) {
        if (ds.schema[j].kind == FeatureKind::nominal) {
            std::map<std::int32_t, std::vector<std::size_t>> groups;
            for (auto r : rows) {
                const auto& v = ds.rows[r].values[j];
                groups[v.is_absent() ? -1 : v.nominal().code].push_back(r);
            }
            std::vector<std::vector<std::size_t>> parts;
            std::size_t big = 0;
            for (auto& [c, g] : groups) {
                big += g.size() >= min_leaf;
                parts.push_back(g);
            }
            if (parts.size() < 2 || big < 2) continue;
            const auto [gain, ratio] = score_partition(parts, rows, labels);
            out[j].push_back({j, SplitKind::nominal, 0.0, gain, ratio});
            continue;
        }
        std::vector<std::size_t> absent;
        std::set<double> values;
        for (auto r : rows) {
            const auto& v = ds.rows[r].values[j];
            if (v.is_absent()) {
                absent.push_back(r);
            } else {
                values.insert(v.number());
            }
        }
        const std::vector<double> sorted(values.begin(), values.end());
        for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
            std::vector<std::size_t> left, right;
            for (auto r : rows) {
                const auto& v = ds.rows[r].values[j];
                if (v.is_absent()) continue;
                (v.number() <= sorted[k] ? left : right).push_back(r);
            }
            if (left.size() < min_leaf || right.size() < min_leaf) continue;
            const auto [gain, ratio] = score_partition({left, right, absent}, rows, labels);
            out[j].push_back({j, SplitKind::threshold, (sorted[k] + sorted[k + 1]) / 2, gain, ratio});
        }
        const std::size_t present = rows.size() - absent.size();
        if (present >= min_leaf && absent.size() >= min_leaf) {
            std::vector<std::size_t> p;
            for (auto r : rows) {
                if (!ds.rows[r].values[j].is_absent()) p.push_back(r);
            }
            const auto [gain, ratio] = score_partition({p, absent}, rows, labels);
            out[j].push_back({j, SplitKind::presence, 0.0, gain, ratio});
        }
    }
    return out;
}

LabeledDataset random_small_dataset(std::mt19937_64& rng) {
    const std::size_t n = 4 + rng() % 47;
    const std::size_t features = 1 + rng() % 4;
    const std::size_t classes = 2 + rng() % 3;
    std::vector<FeatureDef> defs;
    for (std::size_t j = 0; j < features; ++j) {
        defs.push_back({"f" + std::to_string(j), Layer::network, rng() % 3 == 0 ? FeatureKind::nominal : FeatureKind::numeric});
    }
    LabeledDataset ds;
    ds.schema = FeatureSchema(defs);
    ds.dictionaries.resize(features);
    std::vector<std::uint32_t> range(features), absent_pct(features);
    for (std::size_t j = 0; j < features; ++j) {
        range[j] = 2 + static_cast<std::uint32_t>(rng() % 8);
        absent_pct[j] = rng() % 2 ? 0 : static_cast<std::uint32_t>(rng() % 40);
    }
    for (std::size_t i = 0; i < n; ++i) {
        LabeledRow row;
        for (std::size_t j = 0; j < features; ++j) {
            if (rng() % 100 < absent_pct[j]) {
                row.values.push_back(FeatureValue::absent());
                continue;
            }
            const auto x = rng() % range[j];
            if (defs[j].kind == FeatureKind::nominal) {
                const std::string text = "v" + std::to_string(x);
                row.values.push_back(FeatureValue::nominal(ds.dictionaries[j].code_for(text), text));
            } else {
                row.values.push_back(FeatureValue::numeric(static_cast<double>(x) * 1.5));
            }
        }
        row.device = row.genre = "c" + std::to_string(rng() % classes);
        ds.rows.push_back(std::move(row));
    }
    for (const auto& r : ds.rows) {
        if (std::find(ds.devices.begin(), ds.devices.end(), r.device) == ds.devices.end()) ds.devices.push_back(r.device);
    }
    return ds;
}

/// Compares find_best_split with the exhaustive oracle. Returns an error
/// message, or empty on agreement. `exact` counts decisions without ties.
std::string check_split(const LabeledDataset& ds, const std::vector<std::size_t>& rows, std::size_t min_leaf,
                        std::size_t& exact) {
    constexpr long double eps = 1e-9L;
    std::vector<std::string> classes;
    const auto labels = class_labels(ds, Level::device, classes);
    TreeParams params;
    params.min_leaf = min_leaf;
    const auto got = find_best_split(ds, rows, labels, classes.size(), params);
    const auto all = enumerate_splits(ds, rows, labels, min_leaf);

    // Per feature, the candidate with maximal gain. Among thresholds of equal
    // gain the lowest wins; a presence split must beat the best threshold.
    std::vector<OracleCandidate> per_feature;
    for (const auto& cs : all) {
        if (cs.empty()) continue;
        const OracleCandidate* pick = nullptr;
        long double top = -1;
        for (const auto& c : cs) {
            if (c.kind != SplitKind::presence) top = std::max(top, c.gain);
        }
        for (const auto& c : cs) {
            if (c.kind != SplitKind::presence && c.gain >= top - eps) {
                if (!pick || c.threshold < pick->threshold) pick = &c;
            }
        }
        for (const auto& c : cs) {
            if (c.kind == SplitKind::presence && (!pick || c.gain > pick->gain + eps)) pick = &c;
        }
        per_feature.push_back(*pick);
    }
    if (per_feature.empty()) return got ? "implementation split where none is admissible" : "";
    if (!got) return "no split returned although candidates exist";
    long double mean = 0;
    for (const auto& c : per_feature) mean += c.gain;
    mean /= static_cast<long double>(per_feature.size());

    // Gain at least average, then maximal gain ratio; ties to the lowest feature.
    long double top_ratio = -1;
    for (const auto& c : per_feature) {
        if (c.gain >= mean - eps) top_ratio = std::max(top_ratio, c.ratio);
    }
    std::vector<OracleCandidate> winners;
    for (const auto& c : per_feature) {
        if (c.gain >= mean - eps && c.ratio >= top_ratio - eps) winners.push_back(c);
    }
    const auto& want = winners.front();
    if (fabsl(static_cast<long double>(got->gain_ratio) - want.ratio) > eps ||
        fabsl(static_cast<long double>(got->gain) - want.gain) > eps) {
        return "gain/ratio " + fmt(got->gain, 17) + "/" + fmt(got->gain_ratio, 17) + " vs oracle " +
               fmt(static_cast<double>(want.gain), 17) + "/" + fmt(static_cast<double>(want.ratio), 17);
    }
    const bool match = want.feature == got->feature && want.kind == got->kind &&
                       (want.kind != SplitKind::threshold || want.threshold == got->threshold);
    if (!match) {
        return "chose feature " + std::to_string(got->feature) + " " + std::string(to_string(got->kind)) +
               " at " + fmt(got->threshold) + "; oracle feature " + std::to_string(want.feature) + " " +
               std::string(to_string(want.kind)) + " at " + fmt(want.threshold);
    }
    exact += winners.size() == 1;
    return "";
}

Outcome tree_oracle() {
    std::mt19937_64 rng(4242);
    std::size_t checked = 0, exact = 0;
    for (int d = 0; d < 1500; ++d) {
        const auto ds = random_small_dataset(rng);
        const std::size_t min_leaf = 1 + rng() % 3;
        std::vector<std::size_t> rows(ds.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        for (int sub = 0; sub < 3; ++sub) {
            if (sub > 0) {
                std::shuffle(rows.begin(), rows.end(), rng);
                rows.resize(std::max<std::size_t>(2, rows.size() * 2 / 3));
                std::sort(rows.begin(), rows.end());
            }
            const auto err = check_split(ds, rows, min_leaf, exact);
            ++checked;
            if (!err.empty()) return fail("dataset " + std::to_string(d) + ": " + err);
        }
    }

    // Consistent data: labels are a function of the feature vector.
    TreeParams unpruned;
    unpruned.prune = false;
    unpruned.min_leaf = 1;
    for (int d = 0; d < 300; ++d) {
        auto ds = random_small_dataset(rng);
        std::map<std::string, std::string> label_of;
        for (auto& row : ds.rows) {
            std::string key;
            for (const auto& v : row.values) key += (v.is_absent() ? "N" : v.is_numeric() ? fmt(v.number()) : v.nominal().text) + "|";
            auto [it, fresh] = label_of.emplace(key, row.device);
            row.device = row.genre = it->second;
        }
        const auto model = train_tree(ds, Level::device, unpruned);
        const auto preds = model.predict(ds);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (model.classes[preds[i].label] != ds.rows[i].device) {
                return fail("training error on consistent dataset " + std::to_string(d));
            }
        }
    }

    const auto xor_ds = fixture::numeric_dataset({{0, 1, 0, 1, 0, 1, 0, 1}, {0, 0, 1, 1, 0, 0, 1, 1}},
                                                 {"0", "1", "1", "0", "0", "1", "1", "0"});
    TreeParams xor_params;
    xor_params.prune = false;
    const auto xor_model = train_tree(xor_ds, Level::device, xor_params);
    const auto xor_preds = xor_model.predict(xor_ds);
    for (std::size_t i = 0; i < xor_ds.size(); ++i) {
        if (xor_model.classes[xor_preds[i].label] != xor_ds.rows[i].device) return fail("XOR not learned");
    }
    if (xor_model.depth() != 2) return fail("XOR tree depth " + std::to_string(xor_model.depth()));
    return pass(std::to_string(checked) + " split decisions match the oracle (" + std::to_string(exact) +
                " without ties); 300 consistent datasets fit exactly; XOR depth 2");
}

// 5 ---------------------------------------------------------------------------

LabeledDataset indexed_rows(std::size_t n) {
    LabeledDataset ds;
    ds.schema = FeatureSchema({{"i", Layer::network, FeatureKind::numeric}});
    ds.dictionaries.resize(1);
    ds.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.rows[i] = {{FeatureValue::numeric(static_cast<double>(i))}, "d", "d"};
    ds.devices = {"d"};
    return ds;
}

Outcome split_protocol() {
    // 70/30 with round-half-up is (7n + 5) / 10 in integers.
    for (std::size_t n = 2; n <= 5000; ++n) {
        const auto s = split_dataset(indexed_rows(n), {0.7, n});
        const std::size_t want = (7 * n + 5) / 10;
        if (s.train.size() != want || s.validation.size() != n - want) {
            return fail("n=" + std::to_string(n) + " gave " + std::to_string(s.train.size()));
        }
    }
    const auto ds = indexed_rows(20000);
    const auto a = split_dataset(ds, {0.7, 99});
    const auto b = split_dataset(ds, {0.7, 99});
    if (a.train_rows != b.train_rows || a.validation_rows != b.validation_rows) return fail("not seed-deterministic");
    if (split_dataset(ds, {0.7, 100}).train_rows == a.train_rows) return fail("seed has no effect");
    std::vector<int> seen(ds.size(), 0);
    for (auto r : a.train_rows) ++seen[r];
    for (auto r : a.validation_rows) ++seen[r];
    if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) return fail("partitions overlap or miss rows");

    struct Reference {
        std::size_t total, train, validation;
    };
    std::string detail;
    for (const auto p : {Reference{99271, 69489, 29782}, Reference{10678, 7474, 3204}}) {
        const auto s = split_dataset(indexed_rows(p.total), {0.7, 1});
        const auto dt = static_cast<long>(s.train.size()) - static_cast<long>(p.train);
        const auto dv = static_cast<long>(s.validation.size()) - static_cast<long>(p.validation);
        if (std::abs(dt) > 1 || std::abs(dv) > 1) return fail("t=" + std::to_string(p.total) + " off by more than 1");
        detail += " " + std::to_string(p.total) + "->" + std::to_string(s.train.size()) + "/" +
                  std::to_string(s.validation.size());
    }
    return pass("sizes exact for n<=5000, disjoint, deterministic;" + detail + " (reference sizes truncate)");
}

// 6 ---------------------------------------------------------------------------

Outcome pipeline_determinism() {
    const auto dir = fixture::temp_dir("acceptance-pipeline");
    const auto net = fixture::write_home_network(dir, 80);
    auto config = [&](const char* out) {
        PipelineConfig c;
        c.captures = {net.capture};
        c.label_map = net.label_map;
        c.output = dir / out;
        c.block_size = 10;
        c.blocks = 5;
        c.repetitions = 20;
        c.seed = 1234;
        return c;
    };
    const auto a = cmd_pipeline(config("a"));
    const auto b = cmd_pipeline(config("b"));
    if (a.evaluation.reports.size() != b.evaluation.reports.size()) return fail("different report counts");
    for (std::size_t i = 0; i < a.evaluation.reports.size(); ++i) {
        if (a.evaluation.reports[i].to_json() != b.evaluation.reports[i].to_json()) return fail("reports differ");
    }
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir / "a")) {
        if (!entry.is_regular_file() || entry.path().filename() == "config.json") continue;
        const auto rel = std::filesystem::relative(entry.path(), dir / "a");
        if (read_text_file(entry.path()) != read_text_file(dir / "b" / rel)) return fail(rel.string() + " differs");
        ++files;
    }
    std::filesystem::remove_all(dir);
    return pass(std::to_string(files) + " output files byte-identical across two runs");
}

// 7 ---------------------------------------------------------------------------

Outcome decoder_fuzz() {
    std::mt19937_64 rng(777);
    const fixture::Host a{fixture::mac(1), fixture::ip(10, 0, 0, 1)};
    const fixture::Host b{fixture::mac(2), fixture::ip(10, 0, 0, 2)};
    std::vector<fixture::Bytes> seeds;
    fixture::TcpSegment syn;
    syn.options = {2, 4, 5, 0xb4, 1, 3, 3, 7, 4, 2, 8, 10, 0, 0, 0, 1, 0, 0, 0, 0};
    seeds.push_back(fixture::tcp_frame(a, b, syn));
    fixture::TcpSegment http;
    http.flags = fixture::tcpflag::ack;
    http.payload = fixture::text("GET /x HTTP/1.1\r\nHost: h\r\nTransfer-Encoding: chunked\r\n\r\n5\r\nhello\r\n");
    seeds.push_back(fixture::tcp_frame(a, b, http));
    fixture::TcpSegment tls;
    tls.dport = 443;
    tls.flags = fixture::tcpflag::ack;
    tls.payload = fixture::tls_client_hello("example.org");
    seeds.push_back(fixture::tcp_frame(a, b, tls));
    seeds.push_back(fixture::udp_frame(a, b, 5353, 53, fixture::dns_query(1, "a.b.example.com", 28)));
    seeds.push_back(fixture::udp_frame(a, b, 68, 67, fixture::dhcp_discover(9, a.mac, "host")));
    seeds.push_back(fixture::ethernet(b.mac, a.mac, fixture::kIPv4,
                                      fixture::ipv4(a.ip, b.ip, 1, fixture::icmp_echo(8, 1, 2, fixture::Bytes(8, 1)))));
    seeds.push_back(fixture::arp_request(a.mac, a.ip, b.ip));

    PacketDecoder decoder;
    std::size_t decoded = 0;
    constexpr std::size_t kFrames = 1'000'000;
    try {
        for (std::size_t i = 0; i < kFrames; ++i) {
            fixture::Bytes frame;
            const auto mode = rng() % 4;
            if (mode == 0) {
                frame.resize(rng() % 300);
                for (auto& x : frame) x = static_cast<std::uint8_t>(rng());
                if (frame.size() > 13 && rng() % 2) {
                    frame[12] = 0x08;
                    frame[13] = 0x00;
                }
            } else {
                frame = seeds[rng() % seeds.size()];
                if (mode == 1) {
                    frame.resize(rng() % (frame.size() + 1));
                } else {
                    const auto flips = 1 + rng() % 8;
                    for (std::uint64_t f = 0; f < flips && !frame.empty(); ++f) {
                        frame[rng() % frame.size()] = static_cast<std::uint8_t>(rng());
                    }
                    if (mode == 3) frame.resize(rng() % (frame.size() + 1));
                }
            }
            decoded += decoder.decode(frame, {static_cast<std::int64_t>(i / 1000), static_cast<std::uint32_t>(i % 1000)})
                           .has_value();
        }
    } catch (const std::exception& e) {
        return fail(std::string("decoder threw: ") + e.what());
    }
    const auto& st = decoder.stats();
    if (st.frames != kFrames) return fail("frame count " + std::to_string(st.frames));
    return pass("1000000 frames, " + std::to_string(decoded) + " decoded, " + std::to_string(st.skipped_malformed) +
                " malformed, " + std::to_string(st.malformed_application) + " bad application payloads");
}

// 8 ---------------------------------------------------------------------------

Outcome full_scale() {
    const char* sentinel = std::getenv("DFP_SENTINEL_CONFIG");
    const char* unsw = std::getenv("DFP_UNSW_CONFIG");
    if (!sentinel && !unsw) return {Status::skip, "set DFP_SENTINEL_CONFIG and/or DFP_UNSW_CONFIG to run"};
    set_diagnostic_sink(nullptr);
    std::string detail;
    auto accuracy = [](const PipelineResult& r, Level level) {
        for (const auto& rep : r.evaluation.reports) {
            if (rep.level == level) return rep.accuracy * 100;
        }
        return -1.0;
    };
    bool ok = true;
    auto check = [&](const std::string& what, double got, double lo, double hi) {
        detail += " " + what + "=" + fmt(got, 4) + "%";
        if (got < lo || got > hi) {
            ok = false;
            detail += "(!)";
        }
    };
    if (sentinel) {
        auto c = load_config(sentinel);
        apply_environment(c);
        c.level = Level::device;
        c.include_ip = false;
        const auto r = cmd_pipeline(c);
        check("sentinel-genre", accuracy(r, Level::genre), 99.37 - 3, 99.37 + 3);
        check("sentinel-device", accuracy(r, Level::device), 83.35 - 5, 83.35 + 5);
        c.include_ip = true;
        check("sentinel-device-ip", accuracy(cmd_pipeline(c), Level::device), 99.0, 100.0);
    }
    if (unsw) {
        auto c = load_config(unsw);
        apply_environment(c);
        c.level = Level::device;
        check("unsw-device", accuracy(cmd_pipeline(c), Level::device), 97.78 - 3, 97.78 + 3);
    }
    return {ok ? Status::pass : Status::fail, detail.substr(1)};
}

}  // namespace

int main() {
    set_diagnostic_sink({});
    struct Criterion {
        int id;
        const char* name;
        bool required;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "metric-entropy oracle", true, metric_entropy_oracle},
        {2, "suitability identity and lambda monotonicity", true, suitability_identity},
        {3, "planted-feature recovery", true, planted_feature_recovery},
        {4, "tree split oracle", true, tree_oracle},
        {5, "split protocol", true, split_protocol},
        {6, "pipeline determinism", true, pipeline_determinism},
        {7, "decoder fuzz totality", true, decoder_fuzz},
        {8, "full-scale reproduction", false, full_scale},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* tag = out.status == Status::pass ? "PASS" : out.status == Status::fail ? "FAIL" : "SKIP";
        std::printf("%s [%d] %s: %s (%.1fs)\n", tag, c.id, c.name, out.detail.c_str(), secs);
        std::fflush(stdout);
        if (out.status == Status::fail && c.required) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
