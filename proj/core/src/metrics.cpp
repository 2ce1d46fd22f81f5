#include "dfp/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dfp/diagnostics.hpp"
#include "dfp/error.hpp"
#include "dfp/extraction.hpp"
#include "json.hpp"
#include "parallel.hpp"

namespace dfp {

void FeatureString::append(std::string_view chars) {
    for (unsigned char ch : chars) ++counts_[ch];
    length_ += chars.size();
}

void FeatureString::append(const FeatureString& other) {
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    length_ += other.length_;
}

void FeatureString::append(const FeatureValue& value) { append(character_rendering(value)); }

std::size_t FeatureString::distinct() const {
    return static_cast<std::size_t>(std::count_if(counts_.begin(), counts_.end(), [](auto c) { return c > 0; }));
}

namespace {

template <class Count>
double entropy_from_counts(std::span<const Count> counts, std::uint64_t length) {
    if (length == 0) return 0.0;
    const double total = static_cast<double>(length);
    double h = 0.0;
    for (Count c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    return h / total;
}

}  // namespace

double metric_entropy(std::span<const std::uint64_t> counts, std::uint64_t length) {
    return entropy_from_counts(counts, length);
}

double metric_entropy(const FeatureString& s) {
    return entropy_from_counts(std::span<const std::uint64_t>(s.counts()), s.length());
}

double metric_entropy(std::string_view chars) { return metric_entropy(FeatureString(chars)); }

// ---------------------------------------------------------------------------

BlockSampling make_blocks(std::span<const std::size_t> rows, const BlockPlan& plan, Rng& rng) {
    plan.validate();
    BlockSampling out;
    const std::size_t k = plan.block_size;
    if (rows.size() < k) {
        out.short_of_plan = true;
        return out;
    }
    const std::size_t count = std::min(plan.blocks, rows.size() / k);
    out.short_of_plan = count < plan.blocks;
    const auto picks = sample_indices(rows.size(), count * k, rng);
    out.blocks.resize(count);
    for (std::size_t b = 0; b < count; ++b) {
        out.blocks[b].reserve(k);
        for (std::size_t i = 0; i < k; ++i) out.blocks[b].push_back(rows[picks[b * k + i]]);
    }
    return out;
}

namespace {

FeatureString column_string(const LabeledDataset& dataset, std::size_t j, std::span<const std::size_t> rows) {
    FeatureString s;
    for (auto r : rows) s.append(dataset.rows.at(r).values.at(j));
    return s;
}

}  // namespace

std::vector<double> variability_vector(const LabeledDataset& dataset, std::span<const Block> one_block_per_device) {
    std::vector<double> v(dataset.schema.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        FeatureString s;
        for (const auto& block : one_block_per_device) s.append(column_string(dataset, j, block));
        v[j] = metric_entropy(s);
    }
    return v;
}

std::vector<double> device_stability_vector(const LabeledDataset& dataset, std::span<const Block> device_blocks) {
    std::vector<double> sd(dataset.schema.size());
    for (std::size_t j = 0; j < sd.size(); ++j) {
        FeatureString s;
        for (const auto& block : device_blocks) s.append(column_string(dataset, j, block));
        sd[j] = 1.0 - metric_entropy(s);
    }
    return sd;
}

std::vector<double> stability_vector(std::span<const std::vector<double>> device_vectors) {
    if (device_vectors.empty()) throw Error("stability needs at least one device vector");
    const std::size_t n = device_vectors.front().size();
    std::vector<double> s(n, 0.0);
    for (const auto& sd : device_vectors) {
        if (sd.size() != n) throw Error("device stability vectors differ in length");
        for (std::size_t j = 0; j < n; ++j) s[j] += sd[j];
    }
    for (auto& x : s) x /= static_cast<double>(device_vectors.size());
    return s;
}

std::vector<double> suitability_vector(std::span<const double> v, std::span<const double> s) {
    if (v.size() != s.size()) {
        throw Error("variability and stability vectors differ in length (" + std::to_string(v.size()) + " vs " +
                    std::to_string(s.size()) + ")");
    }
    std::vector<double> u(v.size());
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = v[j] * s[j];
    return u;
}

// ---------------------------------------------------------------------------

void MetricsOptions::validate() const {
    plan.validate();
    if (repetitions < 1) throw ValidationError("repetitions must be at least 1");
    if (!(distinct_cap_fraction > 0.0 && distinct_cap_fraction <= 1.0)) {
        throw ValidationError("distinct cap fraction must lie in (0, 1]");
    }
}

namespace {

struct DeviceRows {
    std::vector<std::string> devices;
    std::vector<std::vector<std::size_t>> rows;
};

DeviceRows group_rows(const LabeledDataset& dataset) {
    DeviceRows out;
    std::map<std::string, std::size_t, std::less<>> index;
    auto slot = [&](const std::string& name) {
        auto [it, inserted] = index.try_emplace(name, out.devices.size());
        if (inserted) {
            out.devices.push_back(name);
            out.rows.emplace_back();
        }
        return it->second;
    };
    for (const auto& d : dataset.devices) slot(d);
    for (std::size_t r = 0; r < dataset.rows.size(); ++r) out.rows[slot(dataset.rows[r].device)].push_back(r);
    return out;
}

RepetitionDraw draw(const DeviceRows& groups, const std::vector<std::size_t>& eligible, const MetricsOptions& options,
                    std::size_t repetition) {
    RepetitionDraw out;
    for (auto d : eligible) {
        Rng rng(derive_seed(options.plan.seed, repetition, d));
        auto sampling = make_blocks(groups.rows[d], options.plan, rng);
        out.variability_block.push_back(uniform_index(rng, sampling.blocks.size()));
        out.devices.push_back(groups.devices[d]);
        out.blocks.push_back(std::move(sampling.blocks));
    }
    return out;
}

std::vector<std::size_t> eligible_devices(const DeviceRows& groups, const BlockPlan& plan) {
    std::vector<std::size_t> out;
    for (std::size_t d = 0; d < groups.devices.size(); ++d) {
        if (groups.rows[d].size() >= plan.block_size) out.push_back(d);
    }
    return out;
}

/// Every cell of one column as an id of its distinct rendering, with the
/// character histogram of each rendering over the column's own alphabet.
struct RenderedColumn {
    std::vector<std::uint32_t> ids;
    std::size_t alphabet = 0;
    std::vector<std::uint32_t> histograms;  // ids x alphabet

    const std::uint32_t* histogram(std::uint32_t id) const { return histograms.data() + id * alphabet; }
};

RenderedColumn render_column(const LabeledDataset& dataset, std::size_t j) {
    RenderedColumn col;
    col.ids.resize(dataset.rows.size());
    std::map<std::pair<int, std::uint64_t>, std::uint32_t> index;
    std::vector<std::string> renderings;
    for (std::size_t r = 0; r < dataset.rows.size(); ++r) {
        const auto& value = dataset.rows[r].values[j];
        std::pair<int, std::uint64_t> key{0, 0};
        if (value.is_numeric()) {
            key = {1, std::bit_cast<std::uint64_t>(value.number() == 0.0 ? 0.0 : value.number())};
        } else if (value.is_nominal()) {
            if (!value.is_coded()) throw Error("metrics need a nominalized dataset");
            key = {2, static_cast<std::uint64_t>(value.nominal().code)};
        }
        auto [it, inserted] = index.try_emplace(key, static_cast<std::uint32_t>(renderings.size()));
        if (inserted) renderings.push_back(character_rendering(value));
        col.ids[r] = it->second;
    }
    std::array<int, 256> slot;
    slot.fill(-1);
    std::set<unsigned char> chars;
    for (const auto& s : renderings) chars.insert(s.begin(), s.end());
    for (unsigned char ch : chars) slot[ch] = static_cast<int>(col.alphabet++);
    col.histograms.assign(renderings.size() * col.alphabet, 0);
    for (std::size_t id = 0; id < renderings.size(); ++id) {
        for (unsigned char ch : renderings[id]) ++col.histograms[id * col.alphabet + slot[ch]];
    }
    return col;
}

struct RepetitionResult {
    std::vector<double> v, s, u;
    std::vector<std::vector<double>> sd;
    std::vector<std::size_t> distinct;
    std::size_t sampled = 0;
};

RepetitionResult score_repetition(const std::vector<RenderedColumn>& columns, const RepetitionDraw& rep, bool detailed) {
    const std::size_t n = columns.size();
    const std::size_t devices = rep.blocks.size();
    RepetitionResult out;
    out.v.resize(n);
    out.s.assign(n, 0.0);
    if (detailed) {
        out.sd.assign(devices, std::vector<double>(n));
        out.distinct.resize(n);
    }
    for (const auto& blocks : rep.blocks) {
        for (const auto& b : blocks) out.sampled += b.size();
    }

    std::vector<std::uint64_t> var_counts, dev_counts;
    std::vector<std::uint32_t> seen;
    for (std::size_t j = 0; j < n; ++j) {
        const auto& col = columns[j];
        const std::size_t a = col.alphabet;
        var_counts.assign(a, 0);
        std::uint64_t var_length = 0;
        seen.clear();
        for (std::size_t d = 0; d < devices; ++d) {
            dev_counts.assign(a, 0);
            std::uint64_t dev_length = 0;
            for (std::size_t b = 0; b < rep.blocks[d].size(); ++b) {
                const bool var_block = b == rep.variability_block[d];
                for (auto r : rep.blocks[d][b]) {
                    const auto id = col.ids[r];
                    const std::uint32_t* h = col.histogram(id);
                    std::uint64_t len = 0;
                    for (std::size_t c = 0; c < a; ++c) {
                        dev_counts[c] += h[c];
                        len += h[c];
                    }
                    dev_length += len;
                    if (var_block) {
                        for (std::size_t c = 0; c < a; ++c) var_counts[c] += h[c];
                        var_length += len;
                    }
                    if (detailed) seen.push_back(id);
                }
            }
            const double sd = 1.0 - metric_entropy(dev_counts, dev_length);
            out.s[j] += sd;
            if (detailed) out.sd[d][j] = sd;
        }
        out.s[j] /= static_cast<double>(devices);
        out.v[j] = metric_entropy(var_counts, var_length);
        if (detailed) {
            std::sort(seen.begin(), seen.end());
            out.distinct[j] = static_cast<std::size_t>(std::unique(seen.begin(), seen.end()) - seen.begin());
        }
    }
    out.u = suitability_vector(out.v, out.s);
    return out;
}

}  // namespace

RepetitionDraw draw_repetition(const LabeledDataset& dataset, const MetricsOptions& options, std::size_t repetition) {
    options.validate();
    const auto groups = group_rows(dataset);
    return draw(groups, eligible_devices(groups, options.plan), options, repetition);
}

MetricReport evaluate_features(const LabeledDataset& dataset, const MetricsOptions& options) {
    options.validate();
    dataset.validate();
    const auto groups = group_rows(dataset);
    const auto eligible = eligible_devices(groups, options.plan);

    MetricReport report;
    report.features = dataset.schema.names();
    for (const auto& f : dataset.schema.features()) report.always_include.push_back(f.always_include);
    report.repetitions = options.repetitions;
    report.seed = options.plan.seed;
    report.block_size = options.plan.block_size;
    report.blocks = options.plan.blocks;
    for (std::size_t d = 0; d < groups.devices.size(); ++d) {
        const auto& rows = groups.rows[d];
        if (rows.size() < options.plan.block_size) {
            report.excluded_devices.push_back(groups.devices[d]);
            warn("device '" + groups.devices[d] + "' has " + std::to_string(rows.size()) +
                 " packets, fewer than one block of " + std::to_string(options.plan.block_size) +
                 "; excluded from metrics");
        } else {
            report.devices.push_back(groups.devices[d]);
            if (rows.size() < options.plan.block_size * options.plan.blocks) {
                warn("device '" + groups.devices[d] + "' has " + std::to_string(rows.size()) + " packets; only " +
                     std::to_string(rows.size() / options.plan.block_size) + " of " +
                     std::to_string(options.plan.blocks) + " blocks per repetition");
            }
        }
    }
    if (eligible.size() < 2) {
        throw DataError("metrics need at least two devices with " + std::to_string(options.plan.block_size) +
                        " or more packets; found " + std::to_string(eligible.size()));
    }

    std::vector<RenderedColumn> columns(dataset.schema.size());
    detail::parallel_for(columns.size(), options.threads, [&](std::size_t j) { columns[j] = render_column(dataset, j); });

    const std::size_t reps = options.repetitions;
    std::vector<std::vector<double>> u_reps(reps);
    RepetitionResult last;
    const std::size_t progress_step = std::max<std::size_t>(1, reps / 10);
    std::atomic<std::size_t> done{0};
    detail::parallel_for(reps, options.threads, [&](std::size_t rep) {
        const bool final_rep = rep + 1 == reps;
        auto result = score_repetition(columns, draw(groups, eligible, options, rep), final_rep);
        u_reps[rep] = result.u;
        if (final_rep) last = std::move(result);
        const auto finished = ++done;
        if (reps >= 100 && finished % progress_step == 0) {
            info("metrics: " + std::to_string(finished) + "/" + std::to_string(reps) + " repetitions");
        }
    });

    const std::size_t n = columns.size();
    report.u_mean.assign(n, 0.0);
    for (const auto& u : u_reps) {
        for (std::size_t j = 0; j < n; ++j) report.u_mean[j] += u[j];
    }
    for (auto& x : report.u_mean) x /= static_cast<double>(reps);

    report.v = std::move(last.v);
    report.s = std::move(last.s);
    report.u = std::move(last.u);
    report.sd = std::move(last.sd);
    report.sd_devices = report.devices;
    report.distinct_count = std::move(last.distinct);
    report.sampled_packets = last.sampled;
    report.auto_included.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        report.auto_included[j] = static_cast<double>(report.distinct_count[j]) >=
                                  options.distinct_cap_fraction * static_cast<double>(report.sampled_packets);
    }
    report.selected.assign(n, false);
    if (options.keep_repetitions) report.u_per_repetition = std::move(u_reps);
    return report;
}

std::vector<std::string> select_features(MetricReport& report, double lambda, const SelectionPolicy& policy) {
    if (!(lambda >= 0.0 && lambda < 1.0)) {
        throw ValidationError("lambda must lie in [0, 1), got " + format_number(lambda));
    }
    const std::size_t n = report.size();
    std::vector<bool> forced = report.always_include;
    forced.resize(n, false);
    for (const auto& name : policy.always_include) {
        const auto it = std::find(report.features.begin(), report.features.end(), name);
        if (it == report.features.end()) throw ValidationError("always-include feature '" + name + "' is not scored");
        forced[static_cast<std::size_t>(it - report.features.begin())] = true;
    }
    report.lambda = lambda;
    report.selected.assign(n, false);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < n; ++j) {
        const bool bypass = policy.high_cardinality_bypass && j < report.auto_included.size() && report.auto_included[j];
        if (report.u_mean[j] > lambda || forced[j] || bypass) {
            report.selected[j] = true;
            names.push_back(report.features[j]);
        }
    }
    if (names.empty()) warn("no feature scored above lambda " + format_number(lambda));
    return names;
}

// ---------------------------------------------------------------------------

namespace {

std::string short_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

}  // namespace

std::string metric_report_to_tsv(const MetricReport& report) {
    std::ostringstream out;
    out << "feature\tv\ts\tu_mean\tdistinct_count\tauto_included\tselected\n";
    for (std::size_t j = 0; j < report.size(); ++j) {
        const bool selected = j < report.selected.size() && report.selected[j];
        out << report.features[j] << '\t' << short_number(report.v[j]) << '\t' << short_number(report.s[j]) << '\t'
            << short_number(report.u_mean[j]) << '\t' << report.distinct_count[j] << '\t'
            << (report.auto_included[j] ? 1 : 0) << '\t' << (selected ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string metric_report_to_json(const MetricReport& report) {
    using json = nlohmann::ordered_json;
    json j;
    j["repetitions"] = report.repetitions;
    j["seed"] = report.seed;
    j["block_size"] = report.block_size;
    j["blocks"] = report.blocks;
    j["sampled_packets"] = report.sampled_packets;
    j["lambda"] = std::isnan(report.lambda) ? json(nullptr) : json(report.lambda);
    j["devices"] = report.devices;
    j["excluded_devices"] = report.excluded_devices;
    json features = json::array();
    for (std::size_t i = 0; i < report.size(); ++i) {
        json f;
        f["name"] = report.features[i];
        f["v"] = report.v[i];
        f["s"] = report.s[i];
        f["u"] = report.u[i];
        f["u_mean"] = report.u_mean[i];
        f["distinct_count"] = report.distinct_count[i];
        f["auto_included"] = static_cast<bool>(report.auto_included[i]);
        f["always_include"] = i < report.always_include.size() && report.always_include[i];
        f["selected"] = i < report.selected.size() && report.selected[i];
        json sd = json::array();
        for (const auto& dev : report.sd) sd.push_back(dev[i]);
        f["sd"] = std::move(sd);
        features.push_back(std::move(f));
    }
    j["features"] = std::move(features);
    if (!report.u_per_repetition.empty()) j["u_per_repetition"] = report.u_per_repetition;
    return j.dump(2) + "\n";
}

MetricReport metric_report_from_json(std::string_view text) {
    using json = nlohmann::json;
    MetricReport r;
    try {
        const auto j = json::parse(text);
        r.repetitions = j.at("repetitions").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.block_size = j.at("block_size").get<std::size_t>();
        r.blocks = j.at("blocks").get<std::size_t>();
        r.sampled_packets = j.at("sampled_packets").get<std::size_t>();
        r.lambda = j.at("lambda").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("lambda").get<double>();
        r.devices = j.at("devices").get<std::vector<std::string>>();
        r.excluded_devices = j.at("excluded_devices").get<std::vector<std::string>>();
        r.sd_devices = r.devices;
        r.sd.assign(r.devices.size(), {});
        for (const auto& f : j.at("features")) {
            r.features.push_back(f.at("name").get<std::string>());
            r.v.push_back(f.at("v").get<double>());
            r.s.push_back(f.at("s").get<double>());
            r.u.push_back(f.at("u").get<double>());
            r.u_mean.push_back(f.at("u_mean").get<double>());
            r.distinct_count.push_back(f.at("distinct_count").get<std::size_t>());
            r.auto_included.push_back(f.at("auto_included").get<bool>());
            r.always_include.push_back(f.at("always_include").get<bool>());
            r.selected.push_back(f.at("selected").get<bool>());
            const auto& sd = f.at("sd");
            if (sd.size() != r.devices.size()) throw DataError("metric report: sd length differs from device count");
            for (std::size_t d = 0; d < sd.size(); ++d) r.sd[d].push_back(sd[d].get<double>());
        }
        if (j.contains("u_per_repetition")) {
            r.u_per_repetition = j.at("u_per_repetition").get<std::vector<std::vector<double>>>();
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed metric report: ") + e.what());
    }
    return r;
}

}  // namespace dfp
