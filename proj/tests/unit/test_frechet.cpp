#include <cmath>

#include <gtest/gtest.h>

#include "featdist/frechet.hpp"
#include "featdist/synthetic.hpp"
#include "oracles.hpp"

using namespace featdist;

namespace {

GaussianMoments univariate(double mean, double variance) {
    GaussianMoments m;
    m.mean = Eigen::VectorXd::Constant(1, mean);
    m.cov = Eigen::MatrixXd::Constant(1, 1, variance);
    m.n_samples = 100;
    return m;
}

GaussianMoments random_moments(Eigen::Index d, std::uint64_t seed) {
    const Eigen::MatrixXd b = oracle::random_matrix(d + 3, d, seed);
    GaussianMoments m;
    m.mean = oracle::random_matrix(d, 1, seed + 1000, 2.0);
    const Eigen::MatrixXd c = b.transpose() * b / static_cast<double>(d);
    m.cov = 0.5 * (c + c.transpose());
    m.n_samples = 1000;
    return m;
}

} // namespace

TEST(FitMoments, HandCovariance) {
    RowMatrix x(2, 2);
    x << 0, 0, 2, 0;
    const auto m = fit_moments(FeatureMatrix(x));
    EXPECT_DOUBLE_EQ(m.mean(0), 1.0);
    EXPECT_DOUBLE_EQ(m.mean(1), 0.0);
    EXPECT_DOUBLE_EQ(m.cov(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(m.cov(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(m.cov(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(m.cov(1, 1), 0.0);
}

TEST(FitMoments, IdenticalRowsGiveZeroCovariance) {
    RowMatrix x(5, 3);
    for (int i = 0; i < 5; ++i) x.row(i) << 1.5, -2.0, 0.25;
    const auto m = fit_moments(FeatureMatrix(x));
    EXPECT_EQ(m.cov.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FitMoments, SingleSampleRejected) {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 4);
    try {
        fit_moments(one);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InsufficientSamples);
    }
}

TEST(FitMoments, CovarianceIsSymmetric) {
    const auto m = fit_moments(oracle::features(oracle::random_matrix(50, 7, 2)));
    EXPECT_EQ((m.cov - m.cov.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SqrtmPsd, DiagonalAndIdentity) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
    a(0, 0) = 4.0;
    a(1, 1) = 9.0;
    const auto r = sqrtm_psd(a);
    EXPECT_NEAR(r(0, 0), 2.0, 1e-14);
    EXPECT_NEAR(r(1, 1), 3.0, 1e-14);
    EXPECT_NEAR(r(0, 1), 0.0, 1e-14);
    const auto i = sqrtm_psd(Eigen::MatrixXd::Identity(5, 5));
    EXPECT_LE((i - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SqrtmPsd, SquaredReconstructsRandomPsd) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Eigen::MatrixXd b = oracle::random_matrix(6, 6, seed);
        const Eigen::MatrixXd a = b.transpose() * b;
        const Eigen::MatrixXd r = sqrtm_psd(0.5 * (a + a.transpose()));
        EXPECT_LE((r * r - a).norm() / a.norm(), 1e-8);
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r).eigenvalues().minCoeff(), -1e-12);
    }
}

TEST(SqrtmPsd, IllConditionedUpToOneMillion) {
    const Eigen::MatrixXd q = oracle::random_orthogonal(8, 4);
    Eigen::VectorXd lambda(8);
    lambda << 1e6, 3e5, 1e4, 50, 3, 1, 0.5, 1.0;
    const Eigen::MatrixXd a0 = q * lambda.asDiagonal() * q.transpose();
    const Eigen::MatrixXd a = 0.5 * (a0 + a0.transpose());
    const Eigen::MatrixXd r = sqrtm_psd(a);
    EXPECT_LE((r * r - a).norm() / a.norm(), 1e-8);
}

TEST(SqrtmPsd, ClampsRoundOffNegativeEigenvalues) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
    a(0, 0) = 1.0;
    a(1, 1) = -1e-18;
    const auto r = sqrtm_psd(a);
    EXPECT_EQ(r(1, 1), 0.0);
}

TEST(SqrtmPsd, RejectsAsymmetric) {
    Eigen::MatrixXd a(2, 2);
    a << 1, 0.5, 0.2, 1;
    try {
        sqrtm_psd(a);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotSymmetric);
    }
}

TEST(FrechetDistance, UnivariateClosedForm) {
    // (mu1 - mu2)^2 + (s1 - s2)^2
    EXPECT_NEAR(frechet_distance(univariate(1, 1), univariate(0, 1)), 1.0, 1e-12);
    EXPECT_NEAR(frechet_distance(univariate(0, 4), univariate(0, 1)), 1.0, 1e-12);
    EXPECT_NEAR(frechet_distance(univariate(3, 9), univariate(-1, 0.25)), 16.0 + 6.25, 1e-12);
}

TEST(FrechetDistance, IdentityAndSymmetry) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto a = random_moments(1 + static_cast<Eigen::Index>(seed % 16), seed);
        const auto b = random_moments(1 + static_cast<Eigen::Index>(seed % 16), seed + 77);
        EXPECT_LE(frechet_distance(a, a), 1e-8);
        const double ab = frechet_distance(a, b);
        EXPECT_LE(std::abs(ab - frechet_distance(b, a)), 1e-9 * ab);
    }
}

TEST(FrechetDistance, MatchesDiagonalOracle) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const int d = 1 + static_cast<int>(seed);
        std::vector<double> mu1(d), mu2(d), s1(d), s2(d);
        Xoshiro256StarStar rng(seed);
        GaussianMoments a, b;
        a.mean.resize(d);
        b.mean.resize(d);
        a.cov = Eigen::MatrixXd::Zero(d, d);
        b.cov = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < d; ++i) {
            mu1[i] = rng.uniform() * 4 - 2;
            mu2[i] = rng.uniform() * 4 - 2;
            s1[i] = 0.1 + rng.uniform() * 3;
            s2[i] = 0.1 + rng.uniform() * 3;
            a.mean(i) = mu1[i];
            b.mean(i) = mu2[i];
            a.cov(i, i) = s1[i] * s1[i];
            b.cov(i, i) = s2[i] * s2[i];
        }
        EXPECT_NEAR(frechet_distance(a, b), oracle::fd_diagonal(mu1, s1, mu2, s2), 1e-9);
    }
}

TEST(FrechetDistance, DimensionMismatch) {
    try {
        frechet_distance(random_moments(3, 1), random_moments(4, 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(FrechetDistance, EpsilonRegularizationIsOptIn) {
    const auto a = random_moments(4, 3);
    const auto b = random_moments(4, 9);
    EXPECT_NE(frechet_distance(a, b, 0.0), frechet_distance(a, b, 1e-3));
}

TEST(FrechetDistance, TranslationChangesByClosedForm) {
    const auto real = oracle::random_matrix(300, 5, 1);
    const auto syn = oracle::random_matrix(300, 5, 2, 1.5);
    const Eigen::RowVectorXd t = oracle::random_matrix(1, 5, 3, 0.7);
    const auto mr = fit_moments(real);
    const auto ms = fit_moments(syn);
    const Eigen::MatrixXd shifted = syn.rowwise() + t;
    const double before = frechet_distance(mr, ms);
    const double after = frechet_distance(mr, fit_moments(shifted));
    const double expected_change = 2.0 * t.dot((ms.mean - mr.mean).transpose()) + t.squaredNorm();
    EXPECT_NEAR(after - before, expected_change, 1e-6 * std::abs(expected_change));
}

TEST(FrechetFromFeatures, SelfIsZeroAndShiftMatchesAnalytic) {
    const auto real = synthetic::isotropic(20000, 8, 0.0, 1);
    EXPECT_LE(frechet_from_features(real, real, {}).value, 1e-8);
    const auto syn = synthetic::isotropic(20000, 8, 1.0, 2);
    const auto r = frechet_from_features(real, syn, {});
    EXPECT_NEAR(r.value, 8.0, 0.05 * 8.0);
    EXPECT_EQ(r.metric, MetricKind::fd);
    EXPECT_EQ(r.n_real, 20000u);
    EXPECT_EQ(r.n_syn, 20000u);
}

TEST(FrechetFromFeatures, NonIsotropicGaussiansMatchAnalytic) {
    const std::vector<double> mu1 = {0, 1, -1, 2, 0.5, 0, 0, 3};
    const std::vector<double> sd1 = {1, 2, 0.5, 1, 1.5, 0.7, 1, 2};
    const std::vector<double> mu2 = {1, 1, 0, 2, -0.5, 0, 1, 2};
    const std::vector<double> sd2 = {2, 1, 0.5, 1.5, 1, 0.7, 0.3, 1};
    const auto a = synthetic::gaussian(20000, mu1, sd1, 10);
    const auto b = synthetic::gaussian(20000, mu2, sd2, 11);
    const double analytic = oracle::fd_diagonal(mu1, sd1, mu2, sd2);
    EXPECT_NEAR(frechet_from_features(a, b, {}).value, analytic, 0.05 * analytic);
}

TEST(FrechetFromFeatures, DimensionMismatch) {
    const auto a = synthetic::isotropic(10, 3, 0.0, 1);
    const auto b = synthetic::isotropic(10, 4, 0.0, 2);
    EXPECT_THROW(frechet_from_features(a, b, {}), Error);
}
