#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "semshift/store.hpp"

namespace semshift {

/// One point per row.
using Points = Eigen::MatrixXd;

/// Occurrences of one word in one time slice. `points` may have zero rows.
struct SliceGroup {
    SliceId slice = 0;
    Points points;
};

/// Groups of one word, one per store slice, in chronological order.
std::vector<SliceGroup> group_by_slice(const EmbeddingStore& store, WordId word);

/// All occurrence vectors of a word, widened to double, in store order.
Points word_points(const EmbeddingStore& store, WordId word);

/// 1 - cos(u, v), clamped to [0, 2]. Throws DegenerateInputError on a zero vector.
double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

Eigen::VectorXd mean_vector(const Points& vectors);

/// Mean cosine distance of the occurrences to their own mean vector.
double variation_coefficient(const Points& occurrences);

struct VariationSeries {
    WordId word = 0;
    /// Var_t for every slice holding at least one occurrence, chronological.
    std::vector<double> per_slice_variation;
};

VariationSeries variation_series(WordId word, const std::vector<SliceGroup>& groups);

/// Signed mean of consecutive differences of the per-slice variation.
double variation_by_slice(const VariationSeries& series);

/// Cosine distance between the mean vectors of the first and the last slice.
double averaging_total_drift(const std::vector<SliceGroup>& groups);

/// Mean cosine distance between mean vectors of consecutive populated slices.
double averaging_by_slice(const std::vector<SliceGroup>& groups);

enum class Metric { Variation, VariationBySlice, Averaging, AveragingBySlice };

std::string_view metric_name(Metric metric);
Metric parse_metric(std::string_view name);

struct MetricScore {
    WordId word_id = 0;
    std::string word;
    Metric metric = Metric::Averaging;
    double value = 0.0;
};

/// Computes one metric for one word straight from the store.
MetricScore compute_metric(const EmbeddingStore& store, WordId word, Metric metric);

struct TargetList {
    std::vector<WordId> word_ids;
    std::vector<std::string> words;
    double threshold_fraction = 1.0;
};

/// Top ceil(fraction * |scores|) words by descending value, ties broken by
/// ascending surface.
TargetList select_targets(const std::vector<MetricScore>& scores, double threshold_fraction);

}  // namespace semshift
