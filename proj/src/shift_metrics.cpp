#include "semshift/shift_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "semshift/error.hpp"

namespace semshift {

std::vector<SliceGroup> group_by_slice(const EmbeddingStore& store, WordId word) {
    const auto counts = store.slice_counts(word);
    const auto d = static_cast<Eigen::Index>(store.dimension());
    std::vector<SliceGroup> groups(store.slices().size());
    for (std::size_t s = 0; s < groups.size(); ++s) {
        groups[s].slice = static_cast<SliceId>(s);
        groups[s].points.resize(static_cast<Eigen::Index>(counts[s]), d);
    }
    std::vector<Eigen::Index> fill(groups.size(), 0);
    const auto [begin, end] = store.word_range(word);
    for (std::size_t i = begin; i < end; ++i) {
        const auto occ = store.occurrence(i);
        auto& g = groups[occ.slice_id];
        const Eigen::Index row = fill[occ.slice_id]++;
        for (Eigen::Index j = 0; j < d; ++j) g.points(row, j) = occ.vector[static_cast<std::size_t>(j)];
    }
    return groups;
}

Points word_points(const EmbeddingStore& store, WordId word) {
    const auto [begin, end] = store.word_range(word);
    const auto d = static_cast<Eigen::Index>(store.dimension());
    Points points(static_cast<Eigen::Index>(end - begin), d);
    for (std::size_t i = begin; i < end; ++i) {
        const auto occ = store.occurrence(i);
        for (Eigen::Index j = 0; j < d; ++j) {
            points(static_cast<Eigen::Index>(i - begin), j) = occ.vector[static_cast<std::size_t>(j)];
        }
    }
    return points;
}

double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != v.size()) throw ValidationError("cosine distance of vectors with different lengths");
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw DegenerateInputError("cosine distance of a zero-norm vector");
    const double cos = u.dot(v) / (nu * nv);
    return std::clamp(1.0 - cos, 0.0, 2.0);
}

Eigen::VectorXd mean_vector(const Points& vectors) {
    if (vectors.rows() == 0) throw DegenerateInputError("mean of an empty vector list");
    return vectors.colwise().mean().transpose();
}

double variation_coefficient(const Points& occurrences) {
    const Eigen::VectorXd mean = mean_vector(occurrences);
    if (mean.norm() == 0.0) throw DegenerateInputError("occurrence mean vector has zero norm");
    double total = 0.0;
    for (Eigen::Index i = 0; i < occurrences.rows(); ++i) {
        total += cosine_distance(occurrences.row(i).transpose(), mean);
    }
    return total / static_cast<double>(occurrences.rows());
}

VariationSeries variation_series(WordId word, const std::vector<SliceGroup>& groups) {
    VariationSeries series{word, {}};
    for (const auto& g : groups) {
        if (g.points.rows() == 0) continue;
        series.per_slice_variation.push_back(variation_coefficient(g.points));
    }
    return series;
}

double variation_by_slice(const VariationSeries& series) {
    const auto& v = series.per_slice_variation;
    if (v.size() < 2) throw InsufficientDataError("variation by slice needs at least two populated slices");
    double total = 0.0;
    for (std::size_t t = 1; t < v.size(); ++t) total += v[t] - v[t - 1];
    return total / static_cast<double>(v.size() - 1);
}

double averaging_total_drift(const std::vector<SliceGroup>& groups) {
    if (groups.empty() || groups.front().points.rows() == 0 || groups.back().points.rows() == 0) {
        throw InsufficientDataError("averaging drift needs occurrences in the first and the last slice");
    }
    return cosine_distance(mean_vector(groups.front().points), mean_vector(groups.back().points));
}

double averaging_by_slice(const std::vector<SliceGroup>& groups) {
    std::vector<Eigen::VectorXd> means;
    for (const auto& g : groups) {
        if (g.points.rows() > 0) means.push_back(mean_vector(g.points));
    }
    if (means.size() < 2) throw InsufficientDataError("averaging by slice needs at least two populated slices");
    double total = 0.0;
    for (std::size_t t = 1; t < means.size(); ++t) total += cosine_distance(means[t - 1], means[t]);
    return total / static_cast<double>(means.size() - 1);
}

std::string_view metric_name(Metric metric) {
    switch (metric) {
        case Metric::Variation: return "variation";
        case Metric::VariationBySlice: return "variation_by_slice";
        case Metric::Averaging: return "averaging";
        case Metric::AveragingBySlice: return "averaging_by_slice";
    }
    return "unknown";
}

Metric parse_metric(std::string_view name) {
    for (Metric m : {Metric::Variation, Metric::VariationBySlice, Metric::Averaging, Metric::AveragingBySlice}) {
        if (metric_name(m) == name) return m;
    }
    throw ParameterError("unknown metric '" + std::string(name) + "'");
}

MetricScore compute_metric(const EmbeddingStore& store, WordId word, Metric metric) {
    MetricScore score{word, store.words().at(word).surface, metric, 0.0};
    switch (metric) {
        case Metric::Variation: {
            const Points pts = word_points(store, word);
            if (pts.rows() == 0) throw InsufficientDataError("word '" + score.word + "' has no occurrences");
            score.value = variation_coefficient(pts);
            break;
        }
        case Metric::VariationBySlice:
            score.value = variation_by_slice(variation_series(word, group_by_slice(store, word)));
            break;
        case Metric::Averaging:
            score.value = averaging_total_drift(group_by_slice(store, word));
            break;
        case Metric::AveragingBySlice:
            score.value = averaging_by_slice(group_by_slice(store, word));
            break;
    }
    return score;
}

TargetList select_targets(const std::vector<MetricScore>& scores, double threshold_fraction) {
    if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
        throw ParameterError("threshold fraction must lie in (0, 1]");
    }
    for (const auto& s : scores) {
        if (s.metric != scores.front().metric) throw ParameterError("target selection mixes metrics");
        if (!std::isfinite(s.value)) throw ValidationError("non-finite metric value for '" + s.word + "'");
    }
    std::vector<const MetricScore*> order;
    order.reserve(scores.size());
    for (const auto& s : scores) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const MetricScore* a, const MetricScore* b) {
        if (a->value != b->value) return a->value > b->value;
        return a->word < b->word;
    });
    // Guard against products like 0.3 * 10 landing just above an integer.
    const double raw = threshold_fraction * static_cast<double>(scores.size());
    auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    count = std::min(count, scores.size());

    TargetList targets;
    targets.threshold_fraction = threshold_fraction;
    for (std::size_t i = 0; i < count; ++i) {
        targets.word_ids.push_back(order[i]->word_id);
        targets.words.push_back(order[i]->word);
    }
    return targets;
}

}  // namespace semshift
