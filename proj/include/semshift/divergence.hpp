#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semshift {

/// Cluster usage of one word per time slice.
struct UsageDistribution {
    /// counts[t][c]: occurrences of slice t assigned to cluster c.
    std::vector<std::vector<std::uint64_t>> counts;
    /// probabilities[t] = counts[t] / total; empty when slice t is absent.
    std::vector<std::vector<double>> probabilities;
    std::vector<bool> present;

    std::size_t n_slices() const noexcept { return counts.size(); }
};

/// Counts and row-normalizes cluster labels per slice. `n_slices` of zero
/// sizes the table from the largest slice id.
UsageDistribution usage_distribution(std::span<const int> labels, std::span<const std::uint16_t> slice_ids,
                                     int n_clusters, std::size_t n_slices = 0);

/// Shannon entropy in bits with 0 log 0 = 0.
double entropy_bits(std::span<const double> p);

/// Jensen-Shannon divergence in bits, in [0, 1].
double jsd(std::span<const double> p, std::span<const double> q);

/// Generalized JSD: H(uniform mixture) - mean H(P_i).
double jsd_multi(const std::vector<std::vector<double>>& distributions);

enum class ScoringMode { FirstLast, AllSlices };

std::string_view scoring_mode_name(ScoringMode mode);
ScoringMode parse_scoring_mode(std::string_view name);

/// FirstLast compares the first and last slice of the table; AllSlices
/// applies jsd_multi across every present slice.
double change_score(const UsageDistribution& dist, ScoringMode mode = ScoringMode::FirstLast);

struct ChangeScore {
    std::string word;
    std::string method;
    double value = 0.0;
};

/// Descending by value, ties by ascending word.
std::vector<ChangeScore> rank_words(std::vector<ChangeScore> scores);

}  // namespace semshift
