#include "semshift/figures.hpp"

#include <algorithm>
#include <cctype>
#include <ostream>

#include "semshift/error.hpp"

namespace semshift {

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + "\"";
}

std::vector<ScatterPoint> cluster_scatter(const EmbeddingStore& store, const ClusterRecord& record) {
    const auto word = store.find_word(record.word);
    if (!word) throw LookupError("word '" + record.word + "' not in store");
    const Points points = word_points(store, *word);
    if (static_cast<Eigen::Index>(record.labels.size()) != points.rows()) {
        throw ValidationError("clustering record for '" + record.word +
                              "' does not cover every occurrence (was it subsampled?)");
    }
    const auto proj = pca_2d(points);
    const auto occurrences = store.occurrences_of(*word);
    std::vector<ScatterPoint> rows;
    rows.reserve(record.labels.size());
    for (std::size_t i = 0; i < record.labels.size(); ++i) {
        rows.push_back({proj.coordinates(static_cast<Eigen::Index>(i), 0),
                        proj.coordinates(static_cast<Eigen::Index>(i), 1), record.labels[i],
                        store.slices().at(occurrences[i].first).label});
    }
    return rows;
}

void write_cluster_scatter(std::ostream& out, const std::vector<ScatterPoint>& points) {
    out << "x,y,cluster,slice\n";
    for (const auto& p : points) {
        out << format_double(p.x) << ',' << format_double(p.y) << ',' << p.cluster << ',' << csv_field(p.slice) << '\n';
    }
}

std::vector<ClusterCount> frequency_scatter(const std::vector<ClusterRecord>& records) {
    std::vector<ClusterCount> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back({r.word, r.n_clusters, r.labels.size()});
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.word < b.word; });
    return rows;
}

void write_frequency_scatter(std::ostream& out, const std::vector<ClusterCount>& rows) {
    out << "word,frequency,n_clusters\n";
    for (const auto& r : rows) out << csv_field(r.word) << ',' << r.frequency << ',' << r.n_clusters << '\n';
}

std::vector<EpochPoint> epoch_curve(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("report directory " + dir.string() + " does not exist");
    std::vector<EpochPoint> rows;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        const std::string stem = entry.path().stem().string();
        const auto digit = std::find_if(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); });
        if (digit == stem.end()) continue;
        auto end = digit;
        while (end != stem.end() && std::isdigit(static_cast<unsigned char>(*end))) ++end;
        const int epoch = std::stoi(std::string(digit, end));
        const auto j = read_json_file(entry.path());
        auto add = [&](const nlohmann::json& r) {
            const auto report = report_from_json(r);
            rows.push_back({epoch, report.method, report.spearman});
        };
        if (j.is_array()) {
            for (const auto& r : j) add(r);
        } else {
            add(j);
        }
    }
    if (rows.empty()) throw IoError("no epoch-named evaluation reports in " + dir.string());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.method != b.method) return a.method < b.method;
        return a.epoch < b.epoch;
    });
    return rows;
}

void write_epoch_curve(std::ostream& out, const std::vector<EpochPoint>& rows) {
    out << "epoch,method,spearman\n";
    for (const auto& r : rows) out << r.epoch << ',' << csv_field(r.method) << ',' << format_double(r.spearman) << '\n';
}

}  // namespace semshift
