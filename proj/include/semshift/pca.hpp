#pragma once

#include <array>

#include <Eigen/Dense>

#include "semshift/shift_metrics.hpp"

namespace semshift {

struct Projection2D {
    /// n x 2 projected coordinates of the mean-centered points.
    Eigen::MatrixXd coordinates;
    /// d x 2 unit principal axes; each axis's largest-magnitude loading is positive.
    Eigen::MatrixXd components;
    /// Fraction of total variance along each axis.
    std::array<double, 2> explained_variance_ratio{0.0, 0.0};
};

/// Exact eigen-decomposition of the sample covariance.
Projection2D pca_2d(const Points& points);

}  // namespace semshift
