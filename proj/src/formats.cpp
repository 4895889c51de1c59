#include "semshift/formats.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "semshift/error.hpp"

namespace semshift {

std::vector<std::string> split_tab(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        fields.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return fields;
}

std::optional<double> parse_double(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

namespace {

struct TsvTable {
    std::vector<std::string> header;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw FormatError("TSV header lacks column '" + std::string(name) + "'", 1);
    }
};

TsvTable read_tsv(std::istream& in) {
    TsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        auto fields = split_tab(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) throw FormatError("wrong number of TSV fields", line_no);
        table.rows.emplace_back(line_no, std::move(fields));
    }
    if (!have_header) throw FormatError("TSV file has no header", line_no);
    return table;
}

double field_value(const std::pair<std::size_t, std::vector<std::string>>& row, std::size_t col) {
    const auto v = parse_double(row.second[col]);
    if (!v) throw FormatError("unparseable number '" + row.second[col] + "'", row.first);
    return *v;
}

}  // namespace

void write_scores(std::ostream& out, const std::vector<ChangeScore>& scores) {
    out << "word\tmethod\tscore\n";
    for (const auto& s : scores) out << s.word << '\t' << s.method << '\t' << format_double(s.value) << '\n';
}

std::vector<ChangeScore> read_scores(std::istream& in) {
    const auto table = read_tsv(in);
    const auto wc = table.column("word");
    const auto mc = table.column("method");
    const auto sc = table.column("score");
    std::vector<ChangeScore> scores;
    for (const auto& row : table.rows) scores.push_back({row.second[wc], row.second[mc], field_value(row, sc)});
    return scores;
}

void write_scores_file(const std::filesystem::path& path, const std::vector<ChangeScore>& scores) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_scores(out, scores);
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ChangeScore> read_scores_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_scores(in);
}

void write_metrics(std::ostream& out, const std::vector<MetricScore>& scores) {
    out << "word\tmetric\tvalue\n";
    for (const auto& s : scores) {
        out << s.word << '\t' << metric_name(s.metric) << '\t' << format_double(s.value) << '\n';
    }
}

std::vector<MetricScore> read_metrics(std::istream& in) {
    const auto table = read_tsv(in);
    const auto wc = table.column("word");
    const auto mc = table.column("metric");
    const auto vc = table.column("value");
    std::vector<MetricScore> scores;
    for (const auto& row : table.rows) {
        MetricScore s;
        s.word = row.second[wc];
        s.metric = parse_metric(row.second[mc]);
        s.value = field_value(row, vc);
        scores.push_back(std::move(s));
    }
    return scores;
}

nlohmann::ordered_json config_to_json(const ClusteringConfig& config) {
    nlohmann::ordered_json j;
    j["method"] = method_tag(config);
    j["seed"] = config.seed;
    if (config.method == ClusteringMethod::KMeans) {
        j["k"] = config.k;
        j["kmeans_max_iter"] = config.kmeans_max_iter;
        j["kmeans_n_init"] = config.kmeans_n_init;
        j["kmeans_tol"] = config.kmeans_tol;
    } else {
        j["ap_damping"] = config.ap_damping;
        j["ap_max_iter"] = config.ap_max_iter;
        j["ap_convergence_iter"] = config.ap_convergence_iter;
        if (config.ap_preference) {
            j["ap_preference"] = *config.ap_preference;
        } else {
            j["ap_preference"] = "median";
        }
        j["ap_tie_noise"] = config.ap_tie_noise;
    }
    j["max_occurrences"] = config.max_occurrences;
    return j;
}

void config_from_json(const nlohmann::json& j, ClusteringConfig& config) {
    try {
        if (j.contains("method")) apply_method_tag(config, j["method"].get<std::string>());
        if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("k")) config.k = j["k"].get<int>();
        if (j.contains("kmeans_max_iter")) config.kmeans_max_iter = j["kmeans_max_iter"].get<int>();
        if (j.contains("kmeans_n_init")) config.kmeans_n_init = j["kmeans_n_init"].get<int>();
        if (j.contains("kmeans_tol")) config.kmeans_tol = j["kmeans_tol"].get<double>();
        if (j.contains("ap_damping")) config.ap_damping = j["ap_damping"].get<double>();
        if (j.contains("ap_max_iter")) config.ap_max_iter = j["ap_max_iter"].get<int>();
        if (j.contains("ap_convergence_iter")) config.ap_convergence_iter = j["ap_convergence_iter"].get<int>();
        if (j.contains("ap_preference")) {
            const auto& p = j["ap_preference"];
            if (p.is_string()) {
                if (p.get<std::string>() != "median") throw ParameterError("ap_preference must be a number or \"median\"");
                config.ap_preference.reset();
            } else {
                config.ap_preference = p.get<double>();
            }
        }
        if (j.contains("ap_tie_noise")) config.ap_tie_noise = j["ap_tie_noise"].get<bool>();
        if (j.contains("max_occurrences")) config.max_occurrences = j["max_occurrences"].get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("bad clustering config: ") + e.what());
    }
}

nlohmann::ordered_json record_to_json(const ClusterRecord& record) {
    nlohmann::ordered_json j;
    j["word"] = record.word;
    j["method"] = record.method;
    j["config"] = record.config;
    j["n_clusters"] = record.n_clusters;
    j["converged"] = record.converged;
    j["iterations_run"] = record.iterations_run;
    j["labels"] = record.labels;
    j["slice_ids"] = record.slice_ids;
    j["exemplar_indices"] = record.exemplar_indices;
    return j;
}

ClusterRecord record_from_json(const nlohmann::json& j) {
    ClusterRecord r;
    try {
        r.word = j.at("word").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.config = j.value("config", nlohmann::ordered_json::object());
        r.n_clusters = j.at("n_clusters").get<int>();
        r.converged = j.at("converged").get<bool>();
        r.iterations_run = j.value("iterations_run", 0);
        r.labels = j.at("labels").get<std::vector<int>>();
        r.slice_ids = j.at("slice_ids").get<std::vector<std::uint16_t>>();
        r.exemplar_indices = j.value("exemplar_indices", std::vector<std::size_t>{});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad clustering record: ") + e.what(), 0);
    }
    if (r.labels.size() != r.slice_ids.size()) {
        throw FormatError("clustering record for '" + r.word + "' has mismatched labels and slice ids", 0);
    }
    return r;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what(), 0);
    }
}

void write_record_file(const std::filesystem::path& path, const ClusterRecord& record) {
    // Compact: label arrays dominate the size.
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << record_to_json(record).dump() << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

ClusterRecord read_record_file(const std::filesystem::path& path) {
    return record_from_json(read_json_file(path));
}

std::string record_file_name(std::string_view word) {
    std::string name;
    for (unsigned char c : word) {
        if (std::isalnum(c) || c == '_' || c == '-') {
            name.push_back(static_cast<char>(c));
        } else {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            name += buf;
        }
    }
    return name + ".json";
}

}  // namespace semshift
