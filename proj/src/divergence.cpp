#include "semshift/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semshift/error.hpp"

namespace semshift {

namespace {

constexpr double kNormTolerance = 1e-9;

void check_distribution(std::span<const double> p) {
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("distribution has a negative or non-finite entry");
        total += v;
    }
    if (std::abs(total - 1.0) > kNormTolerance) throw ValidationError("distribution does not sum to 1");
}

}  // namespace

UsageDistribution usage_distribution(std::span<const int> labels, std::span<const std::uint16_t> slice_ids,
                                     int n_clusters, std::size_t n_slices) {
    if (labels.size() != slice_ids.size()) throw ValidationError("labels and slice ids differ in length");
    if (n_clusters < 1) throw ValidationError("at least one cluster required");
    for (auto s : slice_ids) n_slices = std::max(n_slices, static_cast<std::size_t>(s) + 1);

    UsageDistribution dist;
    dist.counts.assign(n_slices, std::vector<std::uint64_t>(static_cast<std::size_t>(n_clusters), 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_clusters) {
            throw ValidationError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                                  " outside [0, " + std::to_string(n_clusters) + ")");
        }
        ++dist.counts[slice_ids[i]][static_cast<std::size_t>(labels[i])];
    }
    dist.probabilities.resize(n_slices);
    dist.present.assign(n_slices, false);
    for (std::size_t t = 0; t < n_slices; ++t) {
        const auto& row = dist.counts[t];
        const std::uint64_t total = std::accumulate(row.begin(), row.end(), std::uint64_t{0});
        if (total == 0) continue;
        dist.present[t] = true;
        auto& p = dist.probabilities[t];
        p.resize(row.size());
        for (std::size_t c = 0; c < row.size(); ++c) {
            p[c] = static_cast<double>(row[c]) / static_cast<double>(total);
        }
    }
    return dist;
}

double entropy_bits(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log2(v);
    }
    return h;
}

double jsd(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ValidationError("distributions have different support sizes");
    check_distribution(p);
    check_distribution(q);
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
    const double value = entropy_bits(m) - 0.5 * (entropy_bits(p) + entropy_bits(q));
    return std::clamp(value, 0.0, 1.0);
}

double jsd_multi(const std::vector<std::vector<double>>& distributions) {
    if (distributions.size() < 2) throw ValidationError("generalized JSD needs at least two distributions");
    if (distributions.size() == 2) return jsd(distributions[0], distributions[1]);
    const std::size_t support = distributions.front().size();
    std::vector<double> mixture(support, 0.0);
    double mean_entropy = 0.0;
    const double weight = 1.0 / static_cast<double>(distributions.size());
    for (const auto& p : distributions) {
        if (p.size() != support) throw ValidationError("distributions have different support sizes");
        check_distribution(p);
        for (std::size_t i = 0; i < support; ++i) mixture[i] += weight * p[i];
        mean_entropy += weight * entropy_bits(p);
    }
    return std::max(0.0, entropy_bits(mixture) - mean_entropy);
}

std::string_view scoring_mode_name(ScoringMode mode) {
    return mode == ScoringMode::FirstLast ? "first-last" : "all-slices";
}

ScoringMode parse_scoring_mode(std::string_view name) {
    if (name == "first-last") return ScoringMode::FirstLast;
    if (name == "all-slices") return ScoringMode::AllSlices;
    throw ParameterError("unknown scoring mode '" + std::string(name) + "'");
}

double change_score(const UsageDistribution& dist, ScoringMode mode) {
    if (mode == ScoringMode::FirstLast) {
        if (dist.n_slices() < 2 || !dist.present.front() || !dist.present.back()) {
            throw InsufficientDataError("first-last scoring needs occurrences in the first and the last slice");
        }
        return jsd(dist.probabilities.front(), dist.probabilities.back());
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < dist.n_slices(); ++t) {
        if (dist.present[t]) rows.push_back(dist.probabilities[t]);
    }
    if (rows.size() < 2) throw InsufficientDataError("all-slices scoring needs at least two populated slices");
    return jsd_multi(rows);
}

std::vector<ChangeScore> rank_words(std::vector<ChangeScore> scores) {
    std::sort(scores.begin(), scores.end(), [](const ChangeScore& a, const ChangeScore& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.word < b.word;
    });
    return scores;
}

}  // namespace semshift
