#include <algorithm>
#include <map>
#include <sstream>

#include "dfp/classifier.hpp"
#include "dfp/error.hpp"
#include "json.hpp"

namespace dfp {

EvaluationReport score_predictions(Level level, std::vector<std::string> classes, std::span<const std::string> actual,
                                   std::span<const std::string> predicted) {
    if (actual.size() != predicted.size()) throw Error("actual and predicted label lists differ in length");
    if (actual.empty()) throw DataError("cannot evaluate on an empty validation set");
    std::map<std::string, std::size_t, std::less<>> index;
    for (std::size_t i = 0; i < classes.size(); ++i) index.emplace(classes[i], i);
    auto slot = [&](const std::string& name) {
        auto [it, inserted] = index.try_emplace(name, classes.size());
        if (inserted) classes.push_back(name);
        return it->second;
    };
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(actual.size());
    for (std::size_t i = 0; i < actual.size(); ++i) pairs.emplace_back(slot(actual[i]), slot(predicted[i]));

    EvaluationReport r;
    r.level = level;
    r.classes = std::move(classes);
    const std::size_t k = r.classes.size();
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (auto [a, p] : pairs) ++r.confusion[a][p];
    r.total = pairs.size();
    for (std::size_t c = 0; c < k; ++c) r.correct += r.confusion[c][c];
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);

    double f1_sum = 0.0;
    std::size_t f1_classes = 0;
    for (std::size_t c = 0; c < k; ++c) {
        ClassMetrics m;
        m.label = r.classes[c];
        for (std::size_t o = 0; o < k; ++o) {
            m.support += r.confusion[c][o];
            m.predicted += r.confusion[o][c];
        }
        const double tp = static_cast<double>(r.confusion[c][c]);
        m.precision = m.predicted ? tp / static_cast<double>(m.predicted) : 0.0;
        m.recall = m.support ? tp / static_cast<double>(m.support) : 0.0;
        m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        if (m.support > 0) {
            f1_sum += m.f1;
            ++f1_classes;
        }
        r.per_class.push_back(std::move(m));
    }
    r.macro_f1 = f1_classes ? f1_sum / static_cast<double>(f1_classes) : 0.0;
    return r;
}

EvaluationReport evaluate(const DecisionTreeModel& model, const LabeledDataset& validation, Level level,
                          const GenreMap& genres) {
    if (model.level == Level::genre && level == Level::device) {
        throw ValidationError("a genre-level model cannot be evaluated at device level");
    }
    const GenreMap observed = genres.empty() ? validation.genres() : genres;
    auto genre_of = [&](const std::string& device) {
        auto it = observed.find(device);
        return it != observed.end() ? it->second : device;
    };
    const bool map_to_genre = level == Level::genre && model.level == Level::device;

    std::vector<std::string> classes;
    for (const auto& c : model.classes) {
        std::string name = map_to_genre ? genre_of(c) : c;
        if (std::find(classes.begin(), classes.end(), name) == classes.end()) classes.push_back(std::move(name));
    }
    const auto predictions = model.predict(validation);
    std::vector<std::string> actual, predicted;
    actual.reserve(validation.size());
    predicted.reserve(validation.size());
    for (std::size_t i = 0; i < validation.size(); ++i) {
        const auto& row = validation.rows[i];
        const auto& label = model.classes[predictions[i].label];
        actual.push_back(level == Level::device ? row.device : row.genre);
        predicted.push_back(map_to_genre ? genre_of(label) : label);
    }
    return score_predictions(level, std::move(classes), actual, predicted);
}

std::string EvaluationReport::to_json() const {
    using json = nlohmann::ordered_json;
    json j;
    j["level"] = dfp::to_string(level);
    j["total"] = total;
    j["correct"] = correct;
    j["accuracy"] = accuracy;
    j["macro_f1"] = macro_f1;
    j["classes"] = classes;
    json per = json::array();
    for (const auto& m : per_class) {
        per.push_back({{"label", m.label},
                       {"support", m.support},
                       {"predicted", m.predicted},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1}});
    }
    j["per_class"] = std::move(per);
    j["confusion"] = confusion;
    return j.dump(2) + "\n";
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

std::string EvaluationReport::confusion_csv() const {
    std::ostringstream out;
    out << "actual\\predicted";
    for (const auto& c : classes) out << ',' << csv_field(c);
    out << '\n';
    for (std::size_t a = 0; a < classes.size(); ++a) {
        out << csv_field(classes[a]);
        for (auto n : confusion[a]) out << ',' << n;
        out << '\n';
    }
    return out.str();
}

std::string EvaluationReport::per_class_csv() const {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed << "class,support,predicted,precision,recall,f1\n";
    for (const auto& m : per_class) {
        out << csv_field(m.label) << ',' << m.support << ',' << m.predicted << ',' << m.precision << ',' << m.recall
            << ',' << m.f1 << '\n';
    }
    return out.str();
}

}  // namespace dfp
