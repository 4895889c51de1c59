#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "semshift/divergence.hpp"

namespace semshift {

/// Mean human change score on the 0 (no change) to 3 (significant change) scale.
struct GoldAnnotation {
    std::string word;
    double mean_score = 0.0;
};

/// Reads a TSV with a header naming `word` and `score` columns. Lines
/// starting with '#' are comments. Throws FormatError (line number) on a
/// malformed row and ValidationError on range or uniqueness violations.
std::vector<GoldAnnotation> load_gold(std::istream& in);
std::vector<GoldAnnotation> load_gold_file(const std::filesystem::path& path);

/// Sample Pearson correlation. Throws UndefinedScoreError on zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// 1-based ranks; tied values share the mean of their rank range.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);

struct Exclusion {
    std::string word;
    std::string reason;
};

struct EvalReport {
    std::string method;
    std::size_t n_evaluated = 0;
    std::size_t n_excluded = 0;
    std::vector<Exclusion> excluded;
    double pearson = 0.0;
    double spearman = 0.0;
};

/// Joins scores with gold annotations on the lowercased surface and
/// correlates them. Gold words without a score are reported as excluded;
/// those listed in `multi_piece_words` get a dedicated reason. When the
/// scores hold several methods, `method` selects one.
EvalReport evaluate(const std::vector<ChangeScore>& scores, const std::vector<GoldAnnotation>& gold,
                    const std::optional<std::string>& method = std::nullopt,
                    std::span<const std::string> multi_piece_words = {});

nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
/// Fixed-width table for terminals.
std::string format_report(const EvalReport& report);

struct ClusterCount {
    std::string word;
    int n_clusters = 0;
    std::size_t frequency = 0;
};

/// Pearson r between cluster count and occurrence count.
double cluster_frequency_correlation(std::span<const ClusterCount> counts);

}  // namespace semshift
