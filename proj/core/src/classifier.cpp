#include "dfp/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "dfp/error.hpp"
#include "dfp/random.hpp"
#include "json.hpp"

namespace dfp {

std::string_view to_string(Level level) { return level == Level::device ? "device" : "genre"; }

Level parse_level(std::string_view text) {
    if (text == "device") return Level::device;
    if (text == "genre") return Level::genre;
    throw ValidationError("unknown level '" + std::string(text) + "' (expected device or genre)");
}

std::string_view to_string(SplitKind kind) {
    switch (kind) {
        case SplitKind::leaf: return "leaf";
        case SplitKind::threshold: return "threshold";
        case SplitKind::presence: return "presence";
        case SplitKind::nominal: return "nominal";
    }
    return "leaf";
}

namespace {

SplitKind parse_split_kind(std::string_view text) {
    for (auto k : {SplitKind::leaf, SplitKind::threshold, SplitKind::presence, SplitKind::nominal}) {
        if (to_string(k) == text) return k;
    }
    throw DataError("unknown node kind '" + std::string(text) + "'");
}

}  // namespace

// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("train fraction must lie in (0, 1), got " + format_number(train_fraction));
    }
}

namespace {

LabeledDataset subset(const LabeledDataset& dataset, std::span<const std::size_t> rows) {
    LabeledDataset out;
    out.schema = dataset.schema;
    out.dictionaries = dataset.dictionaries;
    out.devices = dataset.devices;
    out.rows.reserve(rows.size());
    for (auto r : rows) out.rows.push_back(dataset.rows[r]);
    return out;
}

}  // namespace

DatasetSplit split_dataset(const LabeledDataset& dataset, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = dataset.size();
    // Half-way cases such as 0.7 * 5 must round up even though 0.7 is not
    // exact in binary, so the product is snapped to 6 decimals first.
    const double scaled = std::round(spec.train_fraction * static_cast<double>(n) * 1e6) / 1e6;
    const auto n_train = static_cast<std::size_t>(std::floor(scaled + 0.5));
    if (n_train == 0 || n_train >= n) {
        throw ValidationError("a train fraction of " + format_number(spec.train_fraction) + " over " +
                              std::to_string(n) + " rows leaves a partition empty");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(splitmix64(spec.seed));
    shuffle(std::span<std::size_t>(order), rng);

    DatasetSplit out;
    out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.validation_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(out.train_rows.begin(), out.train_rows.end());
    std::sort(out.validation_rows.begin(), out.validation_rows.end());
    out.train = subset(dataset, out.train_rows);
    out.validation = subset(dataset, out.validation_rows);
    return out;
}

LabeledDataset select_columns(const LabeledDataset& dataset, std::span<const std::string> names) {
    std::vector<std::size_t> idx;
    std::vector<FeatureDef> defs;
    for (const auto& name : names) {
        const auto j = dataset.schema.index_of(name);
        if (!j) throw ValidationError("feature '" + name + "' is not a column of the dataset");
        idx.push_back(*j);
        defs.push_back(dataset.schema[*j]);
    }
    LabeledDataset out;
    out.schema = FeatureSchema(std::move(defs));
    out.devices = dataset.devices;
    for (auto j : idx) {
        out.dictionaries.push_back(j < dataset.dictionaries.size() ? dataset.dictionaries[j] : NominalDictionary{});
    }
    out.rows.reserve(dataset.rows.size());
    for (const auto& row : dataset.rows) {
        LabeledRow r{{}, row.device, row.genre};
        r.values.reserve(idx.size());
        for (auto j : idx) r.values.push_back(row.values[j]);
        out.rows.push_back(std::move(r));
    }
    return out;
}

void TreeParams::validate() const {
    if (min_leaf < 1) throw ValidationError("minimum leaf size must be at least 1");
    if (!(confidence > 0.0 && confidence <= 0.5)) {
        throw ValidationError("pruning confidence must lie in (0, 0.5], got " + format_number(confidence));
    }
}

std::vector<std::size_t> class_labels(const LabeledDataset& dataset, Level level, std::vector<std::string>& classes) {
    std::map<std::string, std::size_t, std::less<>> index;
    for (std::size_t i = 0; i < classes.size(); ++i) index.emplace(classes[i], i);
    auto slot = [&](const std::string& name) {
        auto [it, inserted] = index.try_emplace(name, classes.size());
        if (inserted) classes.push_back(name);
        return it->second;
    };
    if (level == Level::device) {
        for (const auto& d : dataset.devices) slot(d);
    } else {
        const auto genres = dataset.genres();
        for (const auto& d : dataset.devices) {
            if (auto it = genres.find(d); it != genres.end()) slot(it->second);
        }
    }
    std::vector<std::size_t> labels;
    labels.reserve(dataset.rows.size());
    for (const auto& row : dataset.rows) labels.push_back(slot(level == Level::device ? row.device : row.genre));
    return labels;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::int32_t kAbsentCode = -1;
constexpr std::int32_t kUnseenCode = -2;
/// Scores closer than this are ties, so rounding noise cannot reorder
/// mathematically equal candidates.
constexpr double kTie = 1e-12;

/// Column view used by training: numbers (NaN when absent) or codes.
struct Column {
    bool nominal = false;
    std::vector<double> x;
    std::vector<std::int32_t> code;
};

double numeric_of(const FeatureValue& v) {
    return v.is_numeric() ? v.number() : std::numeric_limits<double>::quiet_NaN();
}

std::vector<Column> columns_of(const LabeledDataset& dataset) {
    std::vector<Column> cols(dataset.schema.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        auto& col = cols[j];
        col.nominal = dataset.schema[j].kind == FeatureKind::nominal;
        if (col.nominal) {
            col.code.reserve(dataset.size());
            for (const auto& row : dataset.rows) {
                const auto& v = row.values[j];
                if (v.is_absent()) {
                    col.code.push_back(kAbsentCode);
                } else if (v.is_coded()) {
                    col.code.push_back(v.nominal().code);
                } else {
                    throw Error("column '" + dataset.schema[j].name + "' is not nominalized");
                }
            }
        } else {
            col.x.reserve(dataset.size());
            for (const auto& row : dataset.rows) col.x.push_back(numeric_of(row.values[j]));
        }
    }
    return cols;
}

double entropy(std::span<const double> counts, double n) {
    if (n <= 0) return 0.0;
    double h = 0.0;
    for (double c : counts) {
        if (c > 0) h -= (c / n) * std::log2(c / n);
    }
    return h;
}

struct Branches {
    std::vector<std::vector<double>> counts;
    std::vector<double> sizes;
};

/// Gain and split information for a partition of `total` rows whose parent
/// entropy is `parent`.
std::pair<double, double> gain_and_split_info(const Branches& b, double total, double parent) {
    double weighted = 0.0;
    double split_info = 0.0;
    for (std::size_t i = 0; i < b.sizes.size(); ++i) {
        const double n = b.sizes[i];
        if (n <= 0) continue;
        weighted += (n / total) * entropy(b.counts[i], n);
        split_info -= (n / total) * std::log2(n / total);
    }
    return {parent - weighted, split_info};
}

class SplitFinder {
public:
    SplitFinder(const std::vector<Column>& cols, std::span<const std::size_t> labels, std::size_t classes,
                const TreeParams& params)
        : cols_(cols), labels_(labels), classes_(classes), min_leaf_(static_cast<double>(params.min_leaf)) {}

    std::optional<SplitCandidate> best(std::span<const std::size_t> rows) const {
        std::vector<double> counts(classes_, 0.0);
        for (auto r : rows) counts[labels_[r]] += 1;
        const double total = static_cast<double>(rows.size());
        const double parent = entropy(counts, total);

        std::vector<SplitCandidate> valid;
        for (std::size_t j = 0; j < cols_.size(); ++j) {
            auto c = cols_[j].nominal ? nominal(j, rows, total, parent) : numeric(j, rows, total, parent);
            if (c) valid.push_back(std::move(*c));
        }
        if (valid.empty()) return std::nullopt;
        double mean_gain = 0.0;
        for (const auto& c : valid) mean_gain += c.gain;
        mean_gain /= static_cast<double>(valid.size());

        const SplitCandidate* pick = nullptr;
        for (const auto& c : valid) {
            if (c.gain < mean_gain - kTie) continue;
            if (!pick || c.gain_ratio > pick->gain_ratio + kTie) pick = &c;
        }
        return *pick;
    }

private:
    std::optional<SplitCandidate> numeric(std::size_t j, std::span<const std::size_t> rows, double total,
                                          double parent) const {
        const auto& x = cols_[j].x;
        std::vector<std::size_t> present;
        present.reserve(rows.size());
        std::vector<double> absent(classes_, 0.0);
        double absent_n = 0;
        for (auto r : rows) {
            if (std::isnan(x[r])) {
                absent[labels_[r]] += 1;
                absent_n += 1;
            } else {
                present.push_back(r);
            }
        }
        if (present.empty()) return std::nullopt;
        std::sort(present.begin(), present.end(), [&](auto a, auto b) { return x[a] < x[b] || (x[a] == x[b] && a < b); });

        std::vector<double> right(classes_, 0.0);
        for (auto r : present) right[labels_[r]] += 1;
        std::vector<double> left(classes_, 0.0);
        const double present_n = static_cast<double>(present.size());

        std::optional<SplitCandidate> best;
        Branches b;
        for (std::size_t i = 1; i < present.size(); ++i) {
            const auto moved = labels_[present[i - 1]];
            left[moved] += 1;
            right[moved] -= 1;
            const double lo = x[present[i - 1]];
            const double hi = x[present[i]];
            if (!(lo < hi)) continue;
            const double ln = static_cast<double>(i);
            const double rn = present_n - ln;
            if (ln < min_leaf_ || rn < min_leaf_) continue;
            b.counts = {left, right, absent};
            b.sizes = {ln, rn, absent_n};
            const auto [gain, split_info] = gain_and_split_info(b, total, parent);
            if (best && !(gain > best->gain + kTie)) continue;
            double t = lo + (hi - lo) / 2;
            if (!(t < hi)) t = lo;
            best = SplitCandidate{j, SplitKind::threshold, t, {}, gain, gain / split_info};
        }
        if (absent_n >= min_leaf_ && present_n >= min_leaf_) {
            std::vector<double> all(classes_, 0.0);
            for (auto r : present) all[labels_[r]] += 1;
            b.counts = {all, absent};
            b.sizes = {present_n, absent_n};
            const auto [gain, split_info] = gain_and_split_info(b, total, parent);
            if (!best || gain > best->gain + kTie) {
                best = SplitCandidate{j, SplitKind::presence, x[present.back()], {}, gain, gain / split_info};
            }
        }
        return best;
    }

    std::optional<SplitCandidate> nominal(std::size_t j, std::span<const std::size_t> rows, double total,
                                          double parent) const {
        const auto& code = cols_[j].code;
        std::map<std::int32_t, std::vector<double>> groups;
        for (auto r : rows) {
            auto& g = groups[code[r]];
            if (g.empty()) g.assign(classes_, 0.0);
            g[labels_[r]] += 1;
        }
        if (groups.size() < 2) return std::nullopt;
        Branches b;
        std::vector<std::int32_t> codes;
        int big_enough = 0;
        for (auto& [c, counts] : groups) {
            const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
            if (n >= min_leaf_) ++big_enough;
            if (c != kAbsentCode) codes.push_back(c);
            b.sizes.push_back(n);
            b.counts.push_back(std::move(counts));
        }
        if (big_enough < 2) return std::nullopt;
        const auto [gain, split_info] = gain_and_split_info(b, total, parent);
        return SplitCandidate{j, SplitKind::nominal, 0.0, std::move(codes), gain, gain / split_info};
    }

    const std::vector<Column>& cols_;
    std::span<const std::size_t> labels_;
    std::size_t classes_;
    double min_leaf_;
};

/// Position in node.children a present value takes, or nullopt for absent
/// and unseen values (routed by absent_child / default_child instead).
std::optional<std::size_t> branch_of(const TreeNode& node, double x, std::int32_t code) {
    switch (node.kind) {
        case SplitKind::threshold:
            if (std::isnan(x)) return std::nullopt;
            return x <= node.threshold ? 0 : 1;
        case SplitKind::presence:
            return std::isnan(x) ? 1 : 0;
        case SplitKind::nominal: {
            if (code == kAbsentCode) return std::nullopt;
            const auto it = std::find(node.codes.begin(), node.codes.end(), code);
            if (it == node.codes.end()) return std::nullopt;
            return static_cast<std::size_t>(it - node.codes.begin());
        }
        case SplitKind::leaf: break;
    }
    return std::nullopt;
}

std::size_t majority(std::span<const double> counts) {
    return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

void prune(std::vector<TreeNode>& nodes, double cf) {
    std::vector<double> estimate(nodes.size(), 0.0);
    // Children always follow their parent, so reverse order is bottom-up.
    for (std::size_t i = nodes.size(); i-- > 0;) {
        auto& node = nodes[i];
        const double n = std::accumulate(node.class_counts.begin(), node.class_counts.end(), 0.0);
        const double errors = n - node.class_counts[node.label];
        const double as_leaf = errors + pessimistic_extra_errors(n, errors, cf);
        if (node.is_leaf()) {
            estimate[i] = as_leaf;
            continue;
        }
        double as_tree = 0.0;
        for (auto c : node.children) as_tree += estimate[c];
        if (as_leaf <= as_tree + 0.1) {
            node.kind = SplitKind::leaf;
            node.children.clear();
            node.codes.clear();
            node.absent_child.reset();
            node.default_child = 0;
            node.threshold = 0.0;
            node.feature = 0;
            estimate[i] = as_leaf;
        } else {
            estimate[i] = as_tree;
        }
    }
}

/// Drops unreachable nodes, keeping parent-before-child order.
std::vector<TreeNode> compact(std::vector<TreeNode> nodes) {
    std::vector<std::size_t> order{0};
    for (std::size_t k = 0; k < order.size(); ++k) {
        for (auto c : nodes[order[k]].children) order.push_back(c);
    }
    std::vector<std::size_t> remap(nodes.size(), 0);
    for (std::size_t k = 0; k < order.size(); ++k) remap[order[k]] = k;
    std::vector<TreeNode> out;
    out.reserve(order.size());
    for (auto i : order) {
        auto node = std::move(nodes[i]);
        for (auto& c : node.children) c = remap[c];
        if (node.absent_child) node.absent_child = remap[*node.absent_child];
        if (!node.is_leaf()) node.default_child = remap[node.default_child];
        out.push_back(std::move(node));
    }
    return out;
}

}  // namespace

double pessimistic_extra_errors(double n, double errors, double cf) {
    if (!(cf > 0.0 && cf <= 0.5)) throw ValidationError("pruning confidence must lie in (0, 0.5]");
    if (n <= 0) return 0.0;
    if (errors < 1) {
        const double base = n * (1 - std::pow(cf, 1 / n));
        if (errors == 0) return base;
        return base + errors * (pessimistic_extra_errors(n, 1, cf) - base);
    }
    if (errors + 0.5 >= n) return std::max(n - errors, 0.0);
    const double z = boost::math::quantile(boost::math::normal(), 1 - cf);
    const double f = (errors + 0.5) / n;
    const double r = (f + z * z / (2 * n) + z * std::sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n);
    return r * n - errors;
}

std::optional<SplitCandidate> find_best_split(const LabeledDataset& dataset, std::span<const std::size_t> rows,
                                              std::span<const std::size_t> labels, std::size_t class_count,
                                              const TreeParams& params) {
    params.validate();
    const auto cols = columns_of(dataset);
    return SplitFinder(cols, labels, class_count, params).best(rows);
}

DecisionTreeModel train_tree(const LabeledDataset& train, Level level, const TreeParams& params) {
    params.validate();
    train.validate();
    if (train.schema.empty()) throw ValidationError("cannot train a tree without features");
    if (train.rows.empty()) throw DataError("cannot train a tree on an empty dataset");

    DecisionTreeModel model;
    model.level = level;
    model.schema = train.schema;
    model.dictionaries = train.dictionaries;
    model.dictionaries.resize(train.schema.size());
    model.params = params;
    const auto labels = class_labels(train, level, model.classes);
    const auto cols = columns_of(train);
    const SplitFinder finder(cols, labels, model.classes.size(), params);

    struct Pending {
        std::size_t node;
        std::vector<std::size_t> rows;
    };
    std::vector<Pending> stack;
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    model.nodes.emplace_back();
    stack.push_back({0, std::move(all)});
    while (!stack.empty()) {
        auto [index, rows] = std::move(stack.back());
        stack.pop_back();
        std::vector<double> counts(model.classes.size(), 0.0);
        for (auto r : rows) counts[labels[r]] += 1;
        {
            auto& node = model.nodes[index];
            node.class_counts = counts;
            node.label = majority(counts);
        }
        const bool pure = counts[majority(counts)] == static_cast<double>(rows.size());
        if (pure || rows.size() < 2 * params.min_leaf) continue;
        auto split = finder.best(rows);
        if (!split) continue;

        TreeNode probe;
        probe.kind = split->kind;
        probe.threshold = split->threshold;
        probe.codes = split->codes;
        const auto& col = cols[split->feature];
        const std::size_t fixed = split->kind == SplitKind::nominal ? split->codes.size() : 2;
        std::vector<std::vector<std::size_t>> parts(fixed);
        std::vector<std::size_t> absent_rows;
        for (auto r : rows) {
            const double x = col.nominal ? 0.0 : col.x[r];
            const std::int32_t code = col.nominal ? col.code[r] : 0;
            const bool is_absent = col.nominal ? code == kAbsentCode : std::isnan(x);
            if (is_absent && split->kind != SplitKind::presence) {
                absent_rows.push_back(r);
            } else {
                parts[*branch_of(probe, x, code)].push_back(r);
            }
        }
        if (!absent_rows.empty()) parts.push_back(std::move(absent_rows));

        auto& node = model.nodes[index];
        node.kind = split->kind;
        node.feature = split->feature;
        node.threshold = split->threshold;
        node.codes = split->codes;
        std::size_t largest = 0;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            if (parts[k].size() > parts[largest].size()) largest = k;
        }
        const std::size_t first_child = model.nodes.size();
        node.children.clear();
        for (std::size_t k = 0; k < parts.size(); ++k) node.children.push_back(first_child + k);
        node.default_child = first_child + largest;
        if (parts.size() > fixed) node.absent_child = first_child + fixed;
        for (std::size_t k = 0; k < parts.size(); ++k) model.nodes.emplace_back();
        for (std::size_t k = parts.size(); k-- > 0;) stack.push_back({first_child + k, std::move(parts[k])});
    }
    if (params.prune) prune(model.nodes, params.confidence);
    model.nodes = compact(std::move(model.nodes));
    return model;
}

// ---------------------------------------------------------------------------

Prediction DecisionTreeModel::predict(std::span<const FeatureValue> values) const {
    if (values.size() != schema.size()) {
        throw ValidationError("expected " + std::to_string(schema.size()) + " feature values, got " +
                              std::to_string(values.size()));
    }
    if (nodes.empty()) throw Error("model has no nodes");
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& node = nodes[i];
        const auto& v = values[node.feature];
        double x = 0.0;
        std::int32_t code = kAbsentCode;
        if (schema[node.feature].kind == FeatureKind::nominal) {
            if (v.is_coded()) {
                code = v.nominal().code;
            } else if (!v.is_absent()) {
                const std::string text = v.is_numeric() ? format_number(v.number()) : v.nominal().text;
                code = dictionaries[node.feature].find(text).value_or(kUnseenCode);
            }
        } else {
            x = numeric_of(v);
        }
        const bool absent = schema[node.feature].kind == FeatureKind::nominal ? code == kAbsentCode : std::isnan(x);
        if (const auto b = branch_of(node, x, code)) {
            i = node.children[*b];
        } else if (absent && node.absent_child) {
            i = *node.absent_child;
        } else {
            i = node.default_child;
        }
    }
    const auto& leaf = nodes[i];
    const double n = std::accumulate(leaf.class_counts.begin(), leaf.class_counts.end(), 0.0);
    return {leaf.label, n > 0 ? leaf.class_counts[leaf.label] / n : 0.0};
}

std::vector<Prediction> DecisionTreeModel::predict(const LabeledDataset& dataset) const {
    struct Source {
        std::size_t column;
        std::vector<std::int32_t> remap;  // dataset code -> model code
        bool nominal;
    };
    std::vector<Source> sources;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto col = dataset.schema.index_of(schema[j].name);
        if (!col) throw ValidationError("dataset lacks model feature '" + schema[j].name + "'");
        Source s{*col, {}, schema[j].kind == FeatureKind::nominal};
        if (s.nominal && *col < dataset.dictionaries.size()) {
            for (const auto& text : dataset.dictionaries[*col].entries()) {
                s.remap.push_back(dictionaries[j].find(text).value_or(kUnseenCode));
            }
        }
        sources.push_back(std::move(s));
    }
    std::vector<Prediction> out;
    out.reserve(dataset.size());
    FeatureVector values(schema.size());
    for (const auto& row : dataset.rows) {
        for (std::size_t j = 0; j < sources.size(); ++j) {
            const auto& s = sources[j];
            const auto& v = row.values.at(s.column);
            if (s.nominal && v.is_coded()) {
                const auto c = v.nominal().code;
                const bool known = c >= 0 && static_cast<std::size_t>(c) < s.remap.size();
                values[j] = FeatureValue::nominal(known ? s.remap[static_cast<std::size_t>(c)] : kUnseenCode);
            } else {
                values[j] = v;
            }
        }
        out.push_back(predict(values));
    }
    return out;
}

std::size_t DecisionTreeModel::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
}

std::size_t DecisionTreeModel::depth() const {
    if (nodes.empty()) return 0;
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        for (auto c : nodes[i].children) d[c] = d[i] + 1;
    }
    return deepest;
}

// ---------------------------------------------------------------------------

std::string serialize_model(const DecisionTreeModel& model) {
    using json = nlohmann::ordered_json;
    json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["level"] = to_string(model.level);
    j["classes"] = model.classes;
    j["schema"] = json::parse(schema_to_json(model.schema));
    json dicts = json::object();
    for (std::size_t k = 0; k < model.schema.size() && k < model.dictionaries.size(); ++k) {
        if (!model.dictionaries[k].empty()) {
            dicts[model.schema[k].name] = std::vector<std::string>(model.dictionaries[k].entries().begin(),
                                                                   model.dictionaries[k].entries().end());
        }
    }
    j["dictionaries"] = std::move(dicts);
    j["params"] = {{"min_leaf", model.params.min_leaf},
                   {"confidence", model.params.confidence},
                   {"prune", model.params.prune}};
    j["metadata"] = {{"seed", model.metadata.seed},
                     {"lambda", std::isnan(model.metadata.lambda) ? json(nullptr) : json(model.metadata.lambda)},
                     {"include_ip", model.metadata.include_ip},
                     {"train_fraction", model.metadata.train_fraction},
                     {"tool_version", model.metadata.tool_version}};
    json nodes = json::array();
    for (const auto& n : model.nodes) {
        json node;
        node["kind"] = to_string(n.kind);
        node["label"] = n.label;
        node["counts"] = n.class_counts;
        if (!n.is_leaf()) {
            node["feature"] = n.feature;
            if (n.kind != SplitKind::nominal) node["threshold"] = n.threshold;
            if (n.kind == SplitKind::nominal) node["codes"] = n.codes;
            node["children"] = n.children;
            node["absent"] = n.absent_child ? json(*n.absent_child) : json(nullptr);
            node["default"] = n.default_child;
        }
        nodes.push_back(std::move(node));
    }
    j["nodes"] = std::move(nodes);
    return j.dump(1) + "\n";
}

DecisionTreeModel deserialize_model(std::string_view text) {
    using json = nlohmann::json;
    DecisionTreeModel m;
    try {
        const auto j = json::parse(text);
        if (j.at("format").get<std::string>() != kModelFormat) throw DataError("not a dfp-tree model");
        const int version = j.at("version").get<int>();
        if (version != kModelVersion) {
            throw DataError("unsupported model version " + std::to_string(version) + " (this build reads " +
                            std::to_string(kModelVersion) + ")");
        }
        m.level = parse_level(j.at("level").get<std::string>());
        m.classes = j.at("classes").get<std::vector<std::string>>();
        m.schema = schema_from_json(j.at("schema").dump());
        m.dictionaries.resize(m.schema.size());
        for (const auto& [name, entries] : j.at("dictionaries").items()) {
            const auto k = m.schema.index_of(name);
            if (!k) throw DataError("dictionary for unknown feature '" + name + "'");
            for (const auto& e : entries) m.dictionaries[*k].code_for(e.get<std::string>());
        }
        const auto& p = j.at("params");
        m.params.min_leaf = p.at("min_leaf").get<std::size_t>();
        m.params.confidence = p.at("confidence").get<double>();
        m.params.prune = p.at("prune").get<bool>();
        const auto& md = j.at("metadata");
        m.metadata.seed = md.at("seed").get<std::uint64_t>();
        m.metadata.lambda = md.at("lambda").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                      : md.at("lambda").get<double>();
        m.metadata.include_ip = md.at("include_ip").get<bool>();
        m.metadata.train_fraction = md.at("train_fraction").get<double>();
        m.metadata.tool_version = md.at("tool_version").get<std::string>();
        for (const auto& n : j.at("nodes")) {
            TreeNode node;
            node.kind = parse_split_kind(n.at("kind").get<std::string>());
            node.label = n.at("label").get<std::size_t>();
            node.class_counts = n.at("counts").get<std::vector<double>>();
            if (!node.is_leaf()) {
                node.feature = n.at("feature").get<std::size_t>();
                if (node.kind == SplitKind::nominal) {
                    node.codes = n.at("codes").get<std::vector<std::int32_t>>();
                } else {
                    node.threshold = n.at("threshold").get<double>();
                }
                node.children = n.at("children").get<std::vector<std::size_t>>();
                if (!n.at("absent").is_null()) node.absent_child = n.at("absent").get<std::size_t>();
                node.default_child = n.at("default").get<std::size_t>();
            }
            m.nodes.push_back(std::move(node));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model: ") + e.what());
    }
    if (m.nodes.empty()) throw DataError("malformed model: no nodes");
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        const auto& n = m.nodes[i];
        auto bad = [&](const std::string& what) { return DataError("malformed model: node " + std::to_string(i) + " " + what); };
        if (n.label >= m.classes.size()) throw bad("has an out-of-range label");
        if (n.class_counts.size() != m.classes.size()) throw bad("has a class count of the wrong length");
        if (n.is_leaf()) continue;
        if (n.feature >= m.schema.size()) throw bad("splits on an out-of-range feature");
        const std::size_t fixed = n.kind == SplitKind::nominal ? n.codes.size() : 2;
        if (n.children.size() != fixed + (n.absent_child ? 1 : 0)) throw bad("has an inconsistent branch count");
        for (auto c : n.children) {
            if (c <= i || c >= m.nodes.size()) throw bad("has an invalid child");
        }
        if (std::find(n.children.begin(), n.children.end(), n.default_child) == n.children.end()) {
            throw bad("has an invalid default branch");
        }
    }
    return m;
}

void save_model(const DecisionTreeModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << serialize_model(model);
    if (!out) throw DataError("write failed: " + path.string());
}

DecisionTreeModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open model " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return deserialize_model(text.str());
}

}  // namespace dfp
