#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "semshift/shift_metrics.hpp"

namespace semshift {

enum class ClusteringMethod { KMeans, AffinityPropagation };

struct ClusteringConfig {
    ClusteringMethod method = ClusteringMethod::AffinityPropagation;
    /// Merge clusters of size <= 2 into the nearest cluster of size >= 3
    /// after the base method has run.
    bool two_stage = false;
    int k = 5;
    std::uint64_t seed = 0;

    int kmeans_max_iter = 300;
    int kmeans_n_init = 10;
    double kmeans_tol = 1e-4;

    double ap_damping = 0.5;
    int ap_max_iter = 200;
    int ap_convergence_iter = 15;
    /// nullopt means the median of the off-diagonal similarities.
    std::optional<double> ap_preference;
    /// Perturb similarities with tiny seeded noise to break exact ties.
    bool ap_tie_noise = false;

    /// Words with more occurrences are uniformly subsampled to this size
    /// before clustering. Zero disables the cap.
    std::size_t max_occurrences = 20000;

    /// Throws ParameterError when a field is out of range.
    void validate() const;
};

/// Short tag: "kmeans", "ap", "two-stage-kmeans" or "two-stage-ap".
std::string method_tag(const ClusteringConfig& config);
/// Sets method and two_stage from a tag produced by method_tag.
void apply_method_tag(ClusteringConfig& config, std::string_view tag);

struct ClusteringResult {
    std::vector<int> labels;
    int n_clusters = 0;
    /// n_clusters x d, each row the mean of the cluster's members.
    Eigen::MatrixXd centroids;
    /// Affinity propagation only; exemplar of cluster c at position c.
    std::vector<std::size_t> exemplar_indices;
    bool converged = false;
    int iterations_run = 0;
    /// Within-cluster sum of squared Euclidean distances.
    double inertia = 0.0;
};

/// Member means for a labeling with labels in [0, n_clusters).
Eigen::MatrixXd cluster_means(const Points& points, const std::vector<int>& labels, int n_clusters);
double clustering_inertia(const Points& points, const std::vector<int>& labels, const Eigen::MatrixXd& centroids);

// ---------------------------------------------------------------------------
// k-means

/// k-means++ seeding: first center uniform, later ones sampled with
/// probability proportional to squared distance to the nearest chosen center.
Eigen::MatrixXd kmeans_plus_plus(const Points& points, int k, std::mt19937_64& rng);

struct LloydRun {
    ClusteringResult result;
    /// Inertia after every iteration; non-increasing.
    std::vector<double> inertia_trace;
};

/// Lloyd iterations from the given initial centers. Empty clusters are
/// reseeded with the point farthest from its own centroid.
LloydRun lloyd(const Points& points, Eigen::MatrixXd centers, int max_iter, double tol);

/// Best of `kmeans_n_init` seeded runs by inertia.
ClusteringResult kmeans(const Points& points, const ClusteringConfig& config);

// ---------------------------------------------------------------------------
// Affinity propagation

/// s(i, k) = -||x_i - x_k||^2 with the preference on the diagonal
/// (median off-diagonal similarity when `preference` is empty).
Eigen::MatrixXd similarity_matrix(const Points& points, std::optional<double> preference = std::nullopt);

double median_off_diagonal(const Eigen::MatrixXd& similarities);

/// Damped responsibility/availability message passing.
ClusteringResult affinity_propagation(const Points& points, const ClusteringConfig& config);

/// Runs affinity propagation on a prepared similarity matrix.
ClusteringResult affinity_propagation_from_similarities(Eigen::MatrixXd similarities, const ClusteringConfig& config);

// ---------------------------------------------------------------------------

/// Reassigns members of clusters with at most two members to the strong
/// cluster (three or more members) whose centroid is nearest.
ClusteringResult two_stage(const Points& points, const ClusteringResult& base);

/// Runs the configured method, including the two-stage merge when set.
ClusteringResult cluster_points(const Points& points, const ClusteringConfig& config);

/// Mean silhouette coefficient with Euclidean distances; singletons count 0.
double silhouette(const Points& points, const std::vector<int>& labels);

/// Sorted row indices of a uniform subsample of size `cap` (all rows when
/// n <= cap or cap == 0).
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap, std::uint64_t seed);

}  // namespace semshift
