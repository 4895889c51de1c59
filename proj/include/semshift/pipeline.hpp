#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semshift/clustering.hpp"
#include "semshift/divergence.hpp"
#include "semshift/error.hpp"
#include "semshift/eval.hpp"
#include "semshift/formats.hpp"
#include "semshift/shift_metrics.hpp"
#include "semshift/store.hpp"

namespace semshift {

inline constexpr const char* kVersion = "0.1.0";

/// A stage failed; the message names the stage and, when known, the word.
class StageError : public Error {
public:
    using Error::Error;
};

struct PipelineConfig {
    std::filesystem::path store_path;
    /// "averaging" or a clustering tag ("ap", "kmeans", "two-stage-ap", ...).
    std::string method = "ap";
    ClusteringConfig clustering;
    ScoringMode scoring = ScoringMode::FirstLast;
    Metric target_metric = Metric::Averaging;
    double threshold_fraction = 1.0;
    std::optional<std::filesystem::path> gold_path;
    std::filesystem::path output_dir = "semshift-out";
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    void validate() const;
};

nlohmann::ordered_json pipeline_config_to_json(const PipelineConfig& config);
/// Overrides the fields present in `j`.
void pipeline_config_from_json(const nlohmann::json& j, PipelineConfig& config);

/// Runs `task(i)` for i in [0, n) on up to `jobs` threads. The exception of
/// the lowest failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& task);

/// Per-word seed used for subsampling and clustering.
std::uint64_t word_seed(std::uint64_t seed, WordId word);

/// Words eligible for analysis: single-piece with at least one occurrence.
std::vector<WordId> eligible_words(const EmbeddingStore& store);

/// Computes `metric` for every word that has enough data. Words that do not
/// are appended to `skipped` with the reason.
std::vector<MetricScore> compute_metrics(const EmbeddingStore& store, const std::vector<WordId>& words, Metric metric,
                                         unsigned jobs, std::vector<Exclusion>* skipped = nullptr);

/// Clusters one word's occurrences (after the occurrence cap).
ClusterRecord cluster_word(const EmbeddingStore& store, WordId word, const ClusteringConfig& config);

/// JSD change score from a clustering record; method tag "<clustering>-jsd".
ChangeScore score_record(const ClusterRecord& record, std::size_t n_slices, ScoringMode mode);

/// Averaging baseline change score straight from the store.
ChangeScore averaging_score(const EmbeddingStore& store, WordId word, ScoringMode mode);

struct Selection {
    std::vector<MetricScore> metrics;
    TargetList targets;
    std::vector<Exclusion> skipped;
    std::vector<std::string> multi_piece;
};

/// Drops multi-piece words and words without the slice coverage `scoring`
/// needs, then keeps the top `fraction` of the rest by `metric`.
Selection select_words(const EmbeddingStore& store, ScoringMode scoring, Metric metric, double fraction,
                       unsigned jobs);

/// Clusters each word with seed word_seed(seed, word). Output follows `words`.
std::vector<ClusterRecord> cluster_words(const EmbeddingStore& store, const std::vector<WordId>& words,
                                         const ClusteringConfig& base, std::uint64_t seed, unsigned jobs);

struct RunOutputs {
    nlohmann::ordered_json manifest;
    std::vector<ChangeScore> scores;
    std::vector<ClusterRecord> records;
    std::optional<EvalReport> report;
};

/// select -> cluster -> score -> evaluate. Writes scores.tsv, metrics.tsv,
/// targets.txt, clusters/<word>.json, freq_scatter.csv, eval_report.json
/// (with gold) and manifest.json into the output directory.
RunOutputs run_pipeline(const PipelineConfig& config);

}  // namespace semshift
