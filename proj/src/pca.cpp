#include "semshift/pca.hpp"

#include <algorithm>
#include <cmath>

#include "semshift/error.hpp"

namespace semshift {

Projection2D pca_2d(const Points& points) {
    if (points.rows() < 3) throw InsufficientDataError("PCA needs at least three points");
    if (points.cols() < 2) throw InsufficientDataError("PCA needs at least two dimensions");
    if (!points.allFinite()) throw ValidationError("points contain non-finite entries");

    const Eigen::RowVectorXd mean = points.colwise().mean();
    const Eigen::MatrixXd centered = points.rowwise() - mean;
    const Eigen::MatrixXd covariance = centered.transpose() * centered / static_cast<double>(points.rows() - 1);
    const double total = covariance.trace();
    if (!(total > 0.0)) throw DegenerateInputError("PCA of identical points");

    // Eigenvalues come back ascending.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
    if (solver.info() != Eigen::Success) throw DegenerateInputError("covariance eigen-decomposition failed");
    const Eigen::Index d = covariance.rows();

    Projection2D proj;
    proj.components.resize(d, 2);
    for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd axis = solver.eigenvectors().col(d - 1 - c);
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis(arg) < 0.0) axis = -axis;
        proj.components.col(c) = axis;
        const double lambda = std::max(0.0, solver.eigenvalues()(d - 1 - c));
        proj.explained_variance_ratio[static_cast<std::size_t>(c)] = std::clamp(lambda / total, 0.0, 1.0);
    }
    proj.coordinates = centered * proj.components;
    return proj;
}

}  // namespace semshift
