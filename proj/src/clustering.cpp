#include "semshift/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "semshift/error.hpp"

namespace semshift {

namespace {

double squared_distance(const Points& points, Eigen::Index i, const Eigen::MatrixXd& centers, Eigen::Index c) {
    return (points.row(i) - centers.row(c)).squaredNorm();
}

// Nearest center per point; ties go to the lowest center index.
std::vector<int> assign_nearest(const Points& points, const Eigen::MatrixXd& centers) {
    std::vector<int> labels(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const double d = squared_distance(points, i, centers, c);
            if (d < best) {
                best = d;
                best_c = static_cast<int>(c);
            }
        }
        labels[static_cast<std::size_t>(i)] = best_c;
    }
    return labels;
}

void require_finite(const Points& points) {
    if (!points.allFinite()) throw ValidationError("points contain non-finite entries");
}

}  // namespace

void ClusteringConfig::validate() const {
    if (k < 1) throw ParameterError("k must be at least 1");
    if (kmeans_max_iter < 1 || kmeans_n_init < 1) throw ParameterError("k-means iteration counts must be >= 1");
    if (!(kmeans_tol >= 0.0)) throw ParameterError("k-means tolerance must be non-negative");
    if (!(ap_damping >= 0.5 && ap_damping < 1.0)) throw ParameterError("damping must lie in [0.5, 1)");
    if (ap_max_iter < 1 || ap_convergence_iter < 1) throw ParameterError("AP iteration counts must be >= 1");
    if (ap_preference && !std::isfinite(*ap_preference)) throw ParameterError("preference must be finite");
}

std::string method_tag(const ClusteringConfig& config) {
    std::string base = config.method == ClusteringMethod::KMeans ? "kmeans" : "ap";
    return config.two_stage ? "two-stage-" + base : base;
}

void apply_method_tag(ClusteringConfig& config, std::string_view tag) {
    constexpr std::string_view prefix = "two-stage-";
    config.two_stage = tag.starts_with(prefix);
    if (config.two_stage) tag.remove_prefix(prefix.size());
    if (tag == "kmeans") {
        config.method = ClusteringMethod::KMeans;
    } else if (tag == "ap") {
        config.method = ClusteringMethod::AffinityPropagation;
    } else {
        throw ParameterError("unknown clustering method '" + std::string(tag) + "'");
    }
}

Eigen::MatrixXd cluster_means(const Points& points, const std::vector<int>& labels, int n_clusters) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_clusters, points.cols());
    std::vector<double> counts(static_cast<std::size_t>(n_clusters), 0.0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        sums.row(c) += points.row(i);
        counts[static_cast<std::size_t>(c)] += 1.0;
    }
    for (int c = 0; c < n_clusters; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) sums.row(c) /= counts[static_cast<std::size_t>(c)];
    }
    return sums;
}

double clustering_inertia(const Points& points, const std::vector<int>& labels, const Eigen::MatrixXd& centroids) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        total += squared_distance(points, i, centroids, labels[static_cast<std::size_t>(i)]);
    }
    return total;
}

// ---------------------------------------------------------------------------
// k-means

Eigen::MatrixXd kmeans_plus_plus(const Points& points, int k, std::mt19937_64& rng) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd centers(k, points.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    centers.row(0) = points.row(pick(rng));
    std::vector<double> closest(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) closest[static_cast<std::size_t>(i)] = squared_distance(points, i, centers, 0);

    for (int c = 1; c < k; ++c) {
        const double total = std::accumulate(closest.begin(), closest.end(), 0.0);
        Eigen::Index chosen = 0;
        if (total <= 0.0) {
            chosen = pick(rng);
        } else {
            const double target = unit(rng) * total;
            double running = 0.0;
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                running += closest[static_cast<std::size_t>(i)];
                if (running > target && closest[static_cast<std::size_t>(i)] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        centers.row(c) = points.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& d = closest[static_cast<std::size_t>(i)];
            d = std::min(d, squared_distance(points, i, centers, c));
        }
    }
    return centers;
}

LloydRun lloyd(const Points& points, Eigen::MatrixXd centers, int max_iter, double tol) {
    const Eigen::Index n = points.rows();
    const int k = static_cast<int>(centers.rows());
    if (n < k) throw InfeasibleError("k-means needs at least k points");

    // Tolerance is relative to the mean per-feature variance of the data.
    const Eigen::RowVectorXd mean = points.colwise().mean();
    const double mean_variance =
        n > 0 ? (points.rowwise() - mean).array().square().colwise().mean().mean() : 0.0;
    const double tol_abs = tol * mean_variance;

    LloydRun run;
    std::vector<int> labels = assign_nearest(points, centers);
    bool converged = false;
    int iteration = 0;
    while (iteration < max_iter) {
        ++iteration;

        std::vector<int> sizes(static_cast<std::size_t>(k), 0);
        for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
        for (int c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] > 0) continue;
            double worst = -1.0;
            Eigen::Index worst_i = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int own = labels[static_cast<std::size_t>(i)];
                if (sizes[static_cast<std::size_t>(own)] < 2) continue;
                const double d = squared_distance(points, i, centers, own);
                if (d > worst) {
                    worst = d;
                    worst_i = i;
                }
            }
            const int from = labels[static_cast<std::size_t>(worst_i)];
            --sizes[static_cast<std::size_t>(from)];
            ++sizes[static_cast<std::size_t>(c)];
            labels[static_cast<std::size_t>(worst_i)] = c;
            centers.row(c) = points.row(worst_i);
        }

        Eigen::MatrixXd updated = cluster_means(points, labels, k);
        run.inertia_trace.push_back(clustering_inertia(points, labels, updated));
        const double shift = (updated - centers).squaredNorm();
        centers = std::move(updated);
        if (shift <= tol_abs) {
            converged = true;
            break;
        }
        labels = assign_nearest(points, centers);
    }

    auto& r = run.result;
    r.n_clusters = k;
    r.inertia = run.inertia_trace.empty() ? clustering_inertia(points, labels, centers) : run.inertia_trace.back();
    r.labels = std::move(labels);
    r.centroids = std::move(centers);
    r.converged = converged;
    r.iterations_run = iteration;
    return run;
}

ClusteringResult kmeans(const Points& points, const ClusteringConfig& config) {
    config.validate();
    require_finite(points);
    if (points.rows() < config.k) {
        throw InfeasibleError("k-means with k=" + std::to_string(config.k) + " needs at least k points, got " +
                              std::to_string(points.rows()));
    }
    std::mt19937_64 rng(config.seed);
    ClusteringResult best;
    bool have_best = false;
    for (int init = 0; init < config.kmeans_n_init; ++init) {
        auto run = lloyd(points, kmeans_plus_plus(points, config.k, rng), config.kmeans_max_iter, config.kmeans_tol);
        if (!have_best || run.result.inertia < best.inertia) {
            best = std::move(run.result);
            have_best = true;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Affinity propagation

double median_off_diagonal(const Eigen::MatrixXd& similarities) {
    const Eigen::Index n = similarities.rows();
    if (n < 2) throw InfeasibleError("median similarity needs at least two points");
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n * (n - 1)));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            if (i != k) values.push_back(similarities(i, k));
        }
    }
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

Eigen::MatrixXd similarity_matrix(const Points& points, std::optional<double> preference) {
    const Eigen::Index n = points.rows();
    const Eigen::VectorXd norms = points.rowwise().squaredNorm();
    Eigen::MatrixXd s(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s(i, i) = 0.0;
        for (Eigen::Index k = i + 1; k < n; ++k) {
            const double d = (points.row(i) - points.row(k)).squaredNorm();
            s(i, k) = -d;
            s(k, i) = -d;
        }
    }
    const double pref = preference ? *preference : median_off_diagonal(s);
    s.diagonal().setConstant(pref);
    return s;
}

ClusteringResult affinity_propagation(const Points& points, const ClusteringConfig& config) {
    config.validate();
    require_finite(points);
    if (points.rows() < 2) throw InfeasibleError("affinity propagation needs at least two points");
    ClusteringResult result = affinity_propagation_from_similarities(similarity_matrix(points, config.ap_preference), config);
    result.centroids = cluster_means(points, result.labels, result.n_clusters);
    result.inertia = clustering_inertia(points, result.labels, result.centroids);
    return result;
}

ClusteringResult affinity_propagation_from_similarities(Eigen::MatrixXd s, const ClusteringConfig& config) {
    config.validate();
    const Eigen::Index n = s.rows();
    if (n < 2 || s.cols() != n) throw InfeasibleError("affinity propagation needs a square matrix of size >= 2");

    ClusteringResult result;
    result.labels.assign(static_cast<std::size_t>(n), 0);

    // Every off-diagonal similarity equal and every preference equal: the
    // messages carry no information, so decide directly.
    {
        const double off = s(0, 1);
        const double pref = s(0, 0);
        bool all_equal = true;
        for (Eigen::Index i = 0; i < n && all_equal; ++i) {
            for (Eigen::Index k = 0; k < n; ++k) {
                if (s(i, k) != (i == k ? pref : off)) {
                    all_equal = false;
                    break;
                }
            }
        }
        if (all_equal) {
            result.converged = true;
            if (pref > off) {
                std::iota(result.labels.begin(), result.labels.end(), 0);
                result.n_clusters = static_cast<int>(n);
                result.exemplar_indices.resize(static_cast<std::size_t>(n));
                std::iota(result.exemplar_indices.begin(), result.exemplar_indices.end(), std::size_t{0});
            } else {
                result.n_clusters = 1;
                result.exemplar_indices = {0};
            }
            return result;
        }
    }

    if (config.ap_tie_noise) {
        std::mt19937_64 rng(config.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double eps = std::numeric_limits<double>::epsilon();
        const double tiny = std::numeric_limits<double>::min();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < n; ++k) s(i, k) += (eps * s(i, k) + tiny * 100.0) * normal(rng);
        }
    }

    const double damping = config.ap_damping;
    const double step = 1.0 - damping;
    // Row-major access for responsibilities; availabilities are updated per column.
    Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd avail = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::vector<char>> history;
    const auto window = static_cast<std::size_t>(config.ap_convergence_iter);
    std::vector<char> is_exemplar(static_cast<std::size_t>(n), 0);

    int iteration = 0;
    bool converged = false;
    while (iteration < config.ap_max_iter) {
        ++iteration;

        // r(i,k) <- s(i,k) - max_{k' != k} (a(i,k') + s(i,k'))
        for (Eigen::Index i = 0; i < n; ++i) {
            double first = -std::numeric_limits<double>::infinity();
            double second = -std::numeric_limits<double>::infinity();
            Eigen::Index arg = 0;
            for (Eigen::Index k = 0; k < n; ++k) {
                const double v = avail(i, k) + s(i, k);
                if (v > first) {
                    second = first;
                    first = v;
                    arg = k;
                } else if (v > second) {
                    second = v;
                }
            }
            for (Eigen::Index k = 0; k < n; ++k) {
                const double target = s(i, k) - (k == arg ? second : first);
                resp(i, k) = damping * resp(i, k) + step * target;
            }
        }

        // a(i,k) <- min(0, r(k,k) + sum_{i' not in {i,k}} max(0, r(i',k))),  i != k
        // a(k,k) <- sum_{i' != k} max(0, r(i',k))
        for (Eigen::Index k = 0; k < n; ++k) {
            double positive = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (i != k) positive += std::max(0.0, resp(i, k));
            }
            const double self = resp(k, k);
            for (Eigen::Index i = 0; i < n; ++i) {
                double target;
                if (i == k) {
                    target = positive;
                } else {
                    target = std::min(0.0, self + positive - std::max(0.0, resp(i, k)));
                }
                avail(i, k) = damping * avail(i, k) + step * target;
            }
        }

        for (Eigen::Index k = 0; k < n; ++k) {
            is_exemplar[static_cast<std::size_t>(k)] = (avail(k, k) + resp(k, k)) > 0.0 ? 1 : 0;
        }
        history.push_back(is_exemplar);
        if (history.size() > window) history.erase(history.begin());
        const bool any = std::find(is_exemplar.begin(), is_exemplar.end(), 1) != is_exemplar.end();
        if (history.size() == window && any &&
            std::all_of(history.begin(), history.end(), [&](const auto& h) { return h == is_exemplar; })) {
            converged = true;
            break;
        }
    }
    result.converged = converged;
    result.iterations_run = iteration;

    std::vector<Eigen::Index> exemplars;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (is_exemplar[static_cast<std::size_t>(k)]) exemplars.push_back(k);
    }
    if (exemplars.empty()) {
        // No point ever claimed exemplar status: report a single cluster.
        result.converged = false;
        result.n_clusters = 1;
        return result;
    }

    // Assign each point to its most similar exemplar; exemplars keep themselves.
    auto assign = [&](const std::vector<Eigen::Index>& ex) {
        std::vector<int> c(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            int best_j = 0;
            for (std::size_t j = 0; j < ex.size(); ++j) {
                const double v = s(i, ex[j]);
                if (v > best) {
                    best = v;
                    best_j = static_cast<int>(j);
                }
            }
            c[static_cast<std::size_t>(i)] = best_j;
        }
        for (std::size_t j = 0; j < ex.size(); ++j) c[static_cast<std::size_t>(ex[j])] = static_cast<int>(j);
        return c;
    };

    std::vector<int> membership = assign(exemplars);
    // Refine: within each cluster pick the member with the largest summed
    // similarity from the other members (diagonal included).
    for (std::size_t j = 0; j < exemplars.size(); ++j) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (membership[static_cast<std::size_t>(i)] == static_cast<int>(j)) members.push_back(i);
        }
        double best = -std::numeric_limits<double>::infinity();
        Eigen::Index best_m = exemplars[j];
        for (Eigen::Index cand : members) {
            double total = 0.0;
            for (Eigen::Index i : members) total += s(i, cand);
            if (total > best) {
                best = total;
                best_m = cand;
            }
        }
        exemplars[j] = best_m;
    }
    membership = assign(exemplars);

    // Clusters are numbered by ascending exemplar index.
    std::vector<std::size_t> order(exemplars.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return exemplars[a] < exemplars[b]; });
    std::vector<int> rank(exemplars.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);
    for (Eigen::Index i = 0; i < n; ++i) {
        result.labels[static_cast<std::size_t>(i)] = rank[static_cast<std::size_t>(membership[static_cast<std::size_t>(i)])];
    }
    result.n_clusters = static_cast<int>(exemplars.size());
    result.exemplar_indices.resize(exemplars.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        result.exemplar_indices[r] = static_cast<std::size_t>(exemplars[order[r]]);
    }
    return result;
}

// ---------------------------------------------------------------------------

ClusteringResult two_stage(const Points& points, const ClusteringResult& base) {
    const int k = base.n_clusters;
    if (static_cast<Eigen::Index>(base.labels.size()) != points.rows()) {
        throw ValidationError("clustering result does not match the point count");
    }
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int l : base.labels) ++sizes[static_cast<std::size_t>(l)];

    std::vector<int> strong;
    for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] >= 3) strong.push_back(c);
    }
    if (strong.empty() || static_cast<int>(strong.size()) == k) return base;

    const Eigen::MatrixXd centroids = cluster_means(points, base.labels, k);
    std::vector<int> new_index(static_cast<std::size_t>(k), -1);
    for (std::size_t j = 0; j < strong.size(); ++j) new_index[static_cast<std::size_t>(strong[j])] = static_cast<int>(j);

    ClusteringResult merged;
    merged.labels.resize(base.labels.size());
    for (std::size_t i = 0; i < base.labels.size(); ++i) {
        const int own = base.labels[i];
        if (new_index[static_cast<std::size_t>(own)] >= 0) {
            merged.labels[i] = new_index[static_cast<std::size_t>(own)];
            continue;
        }
        double best = std::numeric_limits<double>::infinity();
        int best_j = 0;
        for (std::size_t j = 0; j < strong.size(); ++j) {
            const double d = squared_distance(points, static_cast<Eigen::Index>(i), centroids, strong[j]);
            if (d < best) {
                best = d;
                best_j = static_cast<int>(j);
            }
        }
        merged.labels[i] = best_j;
    }
    merged.n_clusters = static_cast<int>(strong.size());
    merged.centroids = cluster_means(points, merged.labels, merged.n_clusters);
    merged.inertia = clustering_inertia(points, merged.labels, merged.centroids);
    if (!base.exemplar_indices.empty()) {
        for (int c : strong) merged.exemplar_indices.push_back(base.exemplar_indices[static_cast<std::size_t>(c)]);
    }
    merged.converged = base.converged;
    merged.iterations_run = base.iterations_run;
    return merged;
}

ClusteringResult cluster_points(const Points& points, const ClusteringConfig& config) {
    ClusteringResult base = config.method == ClusteringMethod::KMeans ? kmeans(points, config)
                                                                      : affinity_propagation(points, config);
    return config.two_stage ? two_stage(points, base) : base;
}

double silhouette(const Points& points, const std::vector<int>& labels) {
    const Eigen::Index n = points.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n) throw ValidationError("one label per point required");
    int k = 0;
    for (int l : labels) {
        if (l < 0) throw ValidationError("negative cluster label");
        k = std::max(k, l + 1);
    }
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    if (std::count_if(sizes.begin(), sizes.end(), [](int s) { return s > 0; }) < 2) {
        throw UndefinedScoreError("silhouette needs at least two non-empty clusters");
    }

    std::vector<double> per_cluster(static_cast<std::size_t>(k));
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int own = labels[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(own)] == 1) continue;
        std::fill(per_cluster.begin(), per_cluster.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            per_cluster[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] +=
                (points.row(i) - points.row(j)).norm();
        }
        const double a = per_cluster[static_cast<std::size_t>(own)] / (sizes[static_cast<std::size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == own || sizes[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, per_cluster[static_cast<std::size_t>(c)] / sizes[static_cast<std::size_t>(c)]);
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (cap == 0 || n <= cap) return idx;
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `cap` slots become a uniform sample.
    for (std::size_t i = 0; i < cap; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace semshift
