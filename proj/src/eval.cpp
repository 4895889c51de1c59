#include "semshift/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "semshift/error.hpp"
#include "semshift/formats.hpp"

namespace semshift {

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::vector<GoldAnnotation> load_gold(std::istream& in) {
    std::vector<GoldAnnotation> gold;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::pair<std::size_t, std::size_t>> columns;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split_tab(line);
        if (!columns) {
            const auto word_it = std::find(fields.begin(), fields.end(), "word");
            const auto score_it = std::find(fields.begin(), fields.end(), "score");
            if (word_it == fields.end() || score_it == fields.end()) {
                throw FormatError("gold header must name 'word' and 'score' columns", line_no);
            }
            columns = std::make_pair(static_cast<std::size_t>(word_it - fields.begin()),
                                     static_cast<std::size_t>(score_it - fields.begin()));
            continue;
        }
        const auto [wc, sc] = *columns;
        if (fields.size() <= std::max(wc, sc) || fields[wc].empty()) {
            throw FormatError("malformed gold row", line_no);
        }
        const auto score = parse_double(fields[sc]);
        if (!score) throw FormatError("unparseable gold score '" + fields[sc] + "'", line_no);
        if (!(*score >= 0.0 && *score <= 3.0)) {
            throw ValidationError("gold score " + fields[sc] + " outside [0, 3] on line " + std::to_string(line_no));
        }
        if (!seen.insert(fields[wc]).second) {
            throw ValidationError("duplicate gold word '" + fields[wc] + "' on line " + std::to_string(line_no));
        }
        gold.push_back({fields[wc], *score});
    }
    if (!columns) throw FormatError("gold file has no header", line_no);
    return gold;
}

std::vector<GoldAnnotation> load_gold_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return load_gold(in);
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ValidationError("correlation inputs differ in length");
    if (xs.size() < 3) throw InsufficientDataError("correlation needs at least three pairs");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedScoreError("correlation undefined for a constant series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        // Positions i..j (0-based) share ranks i+1..j+1.
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = shared;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ValidationError("correlation inputs differ in length");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    return pearson(rx, ry);
}

EvalReport evaluate(const std::vector<ChangeScore>& scores, const std::vector<GoldAnnotation>& gold,
                    const std::optional<std::string>& method, std::span<const std::string> multi_piece_words) {
    std::set<std::string> methods;
    for (const auto& s : scores) methods.insert(s.method);
    std::string chosen;
    if (method) {
        chosen = *method;
    } else if (methods.size() == 1) {
        chosen = *methods.begin();
    } else if (methods.size() > 1) {
        throw ValidationError("scores hold several methods; select one");
    }

    std::map<std::string, double> by_word;
    for (const auto& s : scores) {
        if (s.method != chosen) continue;
        if (!by_word.emplace(lowercase(s.word), s.value).second) {
            throw ValidationError("duplicate score for word '" + s.word + "'");
        }
    }
    std::set<std::string> multi_piece;
    for (const auto& w : multi_piece_words) multi_piece.insert(lowercase(w));

    // Join in sorted gold order so the result does not depend on row order.
    std::vector<const GoldAnnotation*> sorted;
    for (const auto& g : gold) sorted.push_back(&g);
    std::sort(sorted.begin(), sorted.end(),
              [](const GoldAnnotation* a, const GoldAnnotation* b) { return lowercase(a->word) < lowercase(b->word); });

    EvalReport report;
    report.method = chosen;
    std::vector<double> model;
    std::vector<double> human;
    for (const auto* g : sorted) {
        const std::string key = lowercase(g->word);
        auto it = by_word.find(key);
        if (it == by_word.end()) {
            report.excluded.push_back({g->word, multi_piece.count(key) ? "multi-piece word" : "no score"});
            continue;
        }
        model.push_back(it->second);
        human.push_back(g->mean_score);
    }
    report.n_evaluated = model.size();
    report.n_excluded = report.excluded.size();
    if (model.size() < 3) {
        throw InsufficientDataError("only " + std::to_string(model.size()) + " gold words have scores; need 3");
    }
    report.pearson = pearson(model, human);
    report.spearman = spearman(model, human);
    return report;
}

nlohmann::ordered_json report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["method"] = report.method;
    j["n_evaluated"] = report.n_evaluated;
    j["n_excluded"] = report.n_excluded;
    j["pearson"] = report.pearson;
    j["spearman"] = report.spearman;
    auto excluded = nlohmann::ordered_json::array();
    for (const auto& e : report.excluded) excluded.push_back({{"word", e.word}, {"reason", e.reason}});
    j["excluded"] = std::move(excluded);
    return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    try {
        r.method = j.at("method").get<std::string>();
        r.n_evaluated = j.at("n_evaluated").get<std::size_t>();
        r.n_excluded = j.at("n_excluded").get<std::size_t>();
        r.pearson = j.at("pearson").get<double>();
        r.spearman = j.at("spearman").get<double>();
        for (const auto& e : j.value("excluded", nlohmann::json::array())) {
            r.excluded.push_back({e.at("word").get<std::string>(), e.at("reason").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad evaluation report: ") + e.what(), 0);
    }
    return r;
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof line, "%-24s %10s %10s %6s %6s\n", "method", "pearson", "spearman", "n", "excl");
    out << line;
    std::snprintf(line, sizeof line, "%-24s %10.4f %10.4f %6zu %6zu\n", report.method.c_str(), report.pearson,
                  report.spearman, report.n_evaluated, report.n_excluded);
    out << line;
    for (const auto& e : report.excluded) out << "  excluded: " << e.word << " (" << e.reason << ")\n";
    return out.str();
}

double cluster_frequency_correlation(std::span<const ClusterCount> counts) {
    std::vector<double> clusters;
    std::vector<double> freqs;
    for (const auto& c : counts) {
        clusters.push_back(static_cast<double>(c.n_clusters));
        freqs.push_back(static_cast<double>(c.frequency));
    }
    return pearson(clusters, freqs);
}

}  // namespace semshift
