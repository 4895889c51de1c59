#include <doctest.h>

#include <random>

#include "semshift/clustering.hpp"
#include "semshift/error.hpp"
#include "semshift/pca.hpp"
#include "semshift/pipeline.hpp"
#include "semshift/synth.hpp"

using namespace semshift;
using doctest::Approx;

TEST_CASE("points on a line") {
    Points p(5, 3);
    for (int i = 0; i < 5; ++i) p.row(i) = Eigen::RowVector3d(1.0, 2.0, -1.0) * i;
    const auto proj = pca_2d(p);
    CHECK(proj.explained_variance_ratio[0] == Approx(1.0));
    CHECK(proj.explained_variance_ratio[1] == Approx(0.0));
}

TEST_CASE("axis-aligned variances") {
    // Sum of squares 8 along x and 2 along y.
    Points p(4, 2);
    p << 2, 0, -2, 0, 0, 1, 0, -1;
    const auto proj = pca_2d(p);
    CHECK(proj.explained_variance_ratio[0] == Approx(0.8));
    CHECK(proj.explained_variance_ratio[1] == Approx(0.2));
    CHECK(std::abs(proj.components(0, 0)) == Approx(1.0));
}

TEST_CASE("agrees with an SVD of the centered data") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        Points p(30, 6);
        for (auto& v : p.reshaped()) v = g(rng);
        p.col(0) *= 5.0;
        p.col(3) *= 2.5;
        const auto proj = pca_2d(p);

        const Eigen::MatrixXd centered = p.rowwise() - p.colwise().mean();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
        const auto sv = svd.singularValues();
        const double total = sv.squaredNorm();
        CHECK(proj.explained_variance_ratio[0] == Approx(sv(0) * sv(0) / total));
        CHECK(proj.explained_variance_ratio[1] == Approx(sv(1) * sv(1) / total));
        for (int c = 0; c < 2; ++c) {
            CHECK(std::abs(proj.components.col(c).dot(svd.matrixV().col(c))) == Approx(1.0));
            Eigen::Index arg = 0;
            proj.components.col(c).cwiseAbs().maxCoeff(&arg);
            CHECK(proj.components(arg, c) > 0.0);
        }
        CHECK((proj.coordinates - centered * proj.components).norm() < 1e-9);
    }
}

TEST_CASE("degenerate inputs") {
    CHECK_THROWS_AS(pca_2d(Points::Ones(2, 3)), InsufficientDataError);
    CHECK_THROWS_AS(pca_2d(Points::Ones(5, 1)), InsufficientDataError);
    CHECK_THROWS_AS(pca_2d(Points::Ones(5, 3)), DegenerateInputError);
}

TEST_CASE("two-sense synthetic word separates in the projection") {
    const auto suite = default_suite(0);
    const auto specs = default_suite_specs(0);
    WordId word = 0;
    while (specs[word].senses.size() != 2) ++word;
    const auto points = word_points(suite.store, word);
    const auto proj = pca_2d(points);

    std::vector<int> truth;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double d0 = (points.row(i).transpose() - specs[word].senses[0].mean).squaredNorm();
        const double d1 = (points.row(i).transpose() - specs[word].senses[1].mean).squaredNorm();
        truth.push_back(d0 <= d1 ? 0 : 1);
    }
    CHECK(silhouette(proj.coordinates, truth) > 0.5);
}
