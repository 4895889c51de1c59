#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "semshift/clustering.hpp"
#include "semshift/divergence.hpp"
#include "semshift/shift_metrics.hpp"

namespace semshift {

std::vector<std::string> split_tab(std::string_view line);
std::optional<double> parse_double(std::string_view text);
/// Shortest round-trippable decimal form ("%.17g").
std::string format_double(double value);

// Scores TSV: word, method, score.
void write_scores(std::ostream& out, const std::vector<ChangeScore>& scores);
std::vector<ChangeScore> read_scores(std::istream& in);
void write_scores_file(const std::filesystem::path& path, const std::vector<ChangeScore>& scores);
std::vector<ChangeScore> read_scores_file(const std::filesystem::path& path);

// Metrics TSV: word, metric, value.
void write_metrics(std::ostream& out, const std::vector<MetricScore>& scores);
std::vector<MetricScore> read_metrics(std::istream& in);

/// Per-word clustering output shared by the cluster, score and report stages.
struct ClusterRecord {
    std::string word;
    std::string method;
    nlohmann::ordered_json config;
    int n_clusters = 0;
    bool converged = false;
    int iterations_run = 0;
    std::vector<int> labels;
    std::vector<std::uint16_t> slice_ids;
    std::vector<std::size_t> exemplar_indices;
};

nlohmann::ordered_json config_to_json(const ClusteringConfig& config);
/// Fields absent from `j` keep the values already in `config`.
void config_from_json(const nlohmann::json& j, ClusteringConfig& config);

nlohmann::ordered_json record_to_json(const ClusterRecord& record);
ClusterRecord record_from_json(const nlohmann::json& j);
void write_record_file(const std::filesystem::path& path, const ClusterRecord& record);
ClusterRecord read_record_file(const std::filesystem::path& path);

/// File-system friendly name for a word's clustering JSON.
std::string record_file_name(std::string_view word);

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace semshift
