#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "featdist/kernel.hpp"
#include "oracles.hpp"

using namespace featdist;

namespace {

FeatureMatrix points_1d(std::initializer_list<double> v) {
    RowMatrix m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return FeatureMatrix(std::move(m));
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::EmptyInput;
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

} // namespace

TEST(MedianHeuristic, ThreePointsOnALine) {
    // distances 1, 3, 2
    EXPECT_DOUBLE_EQ(median_heuristic(points_1d({0, 1, 3}), 4096, 0), 2.0);
}

TEST(MedianHeuristic, JointOverBothSets) {
    // distances 1, 3, 6, 2, 5, 3
    const auto x = points_1d({0, 1});
    const auto y = points_1d({3, 6});
    EXPECT_DOUBLE_EQ(median_heuristic(x, y, 4096, 0), 3.0);
    EXPECT_DOUBLE_EQ(median_heuristic(y, x, 4096, 0), 3.0);
}

TEST(MedianHeuristic, IdenticalPointsRaiseZeroMedian) {
    EXPECT_EQ(kind_of([] { median_heuristic(points_1d({2, 2, 2, 2}), 4096, 0); }), ErrorKind::ZeroMedian);
}

TEST(MedianHeuristic, TwoCopiesAndOneOther) {
    RowMatrix m(3, 2);
    m << 1, 1, 1, 1, 4, 5; // pairwise distances 0, 5, 5
    EXPECT_DOUBLE_EQ(median_heuristic(FeatureMatrix(m), 4096, 0), 5.0);
}

TEST(MedianHeuristic, MatchesBruteForce) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto a = oracle::random_matrix(40 + static_cast<Eigen::Index>(seed), 6, seed);
        const auto b = oracle::random_matrix(31, 6, seed + 50, 2.0);
        Eigen::MatrixXd both(a.rows() + b.rows(), 6);
        both << a, b;
        EXPECT_DOUBLE_EQ(median_heuristic(oracle::features(a), oracle::features(b), 4096, seed),
                         oracle::median_distance(both));
    }
}

TEST(MedianHeuristic, CappedIsSymmetricAndDeterministic) {
    const auto a = oracle::features(oracle::random_matrix(900, 4, 1));
    const auto b = oracle::features(oracle::random_matrix(500, 4, 2));
    const double ab = median_heuristic(a, b, 256, 9);
    EXPECT_EQ(ab, median_heuristic(b, a, 256, 9));
    EXPECT_EQ(ab, median_heuristic(a, b, 256, 9));
    EXPECT_GT(ab, 0.0);
}

TEST(MedianHeuristic, DimensionMismatch) {
    const auto a = oracle::features(oracle::random_matrix(5, 3, 1));
    const auto b = oracle::features(oracle::random_matrix(5, 2, 2));
    EXPECT_EQ(kind_of([&] { median_heuristic(a, b, 4096, 0); }), ErrorKind::DimensionMismatch);
}

TEST(Gram, LinearExample) {
    RowMatrix z(2, 2);
    z << 1, 0, 0, 1;
    const auto g = gram(FeatureMatrix(z), KernelSpec::linear());
    EXPECT_TRUE(g.values.isApprox(Eigen::MatrixXd::Identity(2, 2)));
    EXPECT_FALSE(g.centered);
}

TEST(Gram, RbfDiagonalIsOneAndSymmetric) {
    const auto z = oracle::features(oracle::random_matrix(37, 5, 3));
    const auto g = gram(z, KernelSpec::rbf(1.0, 0.8));
    for (Eigen::Index i = 0; i < 37; ++i) EXPECT_EQ(g.values(i, i), 1.0);
    EXPECT_TRUE(bitwise_equal(g.values, g.values.transpose()));
}

TEST(Gram, RbfLargeSigmaApproachesAllOnes) {
    const auto z = oracle::features(oracle::random_matrix(10, 3, 4));
    const auto g = gram(z, KernelSpec::rbf(1.0, 1e8));
    EXPECT_LE((g.values - Eigen::MatrixXd::Ones(10, 10)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gram, MatchesOracleForEachKernel) {
    const auto raw = oracle::random_matrix(23, 4, 5);
    const auto z = oracle::features(raw);
    EXPECT_LE((gram(z, KernelSpec::linear()).values - oracle::gram(raw, oracle::Kernel::linear)).cwiseAbs().maxCoeff(),
              1e-12);
    EXPECT_LE((gram(z, KernelSpec::polynomial(3, 1.0)).values -
               oracle::gram(raw, oracle::Kernel::polynomial, 1.0, 3, 1.0))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-9);
    EXPECT_LE((gram(z, KernelSpec::rbf(), 1.3).values - oracle::gram(raw, oracle::Kernel::rbf, 1.3))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-14);
}

TEST(Gram, SharedSigmaWinsOverOverride) {
    const auto raw = oracle::random_matrix(12, 3, 6);
    const auto g = gram(oracle::features(raw), KernelSpec::rbf(1.0, 5.0), 0.7);
    EXPECT_LE((g.values - oracle::gram(raw, oracle::Kernel::rbf, 0.7)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gram, RbfWithoutBandwidthRaises) {
    const auto z = oracle::features(oracle::random_matrix(4, 2, 7));
    EXPECT_EQ(kind_of([&] { gram(z, KernelSpec::rbf()); }), ErrorKind::MissingBandwidth);
}

TEST(Gram, InvalidPolynomialRejected) {
    const auto z = oracle::features(oracle::random_matrix(4, 2, 7));
    EXPECT_EQ(kind_of([&] { gram(z, KernelSpec::polynomial(0, 1.0)); }), ErrorKind::InvalidKernel);
    EXPECT_EQ(kind_of([&] { gram(z, KernelSpec::polynomial(2, -1.0)); }), ErrorKind::InvalidKernel);
}

TEST(Gram, BlockedEqualsUnblockedBitwise) {
    const auto z = oracle::features(oracle::random_matrix(301, 9, 8));
    for (const auto& k : {KernelSpec::linear(), KernelSpec::polynomial(2, 0.5), KernelSpec::rbf(1.0, 2.0)}) {
        const auto whole = gram(z, k, {}, ComputeOptions{1000, 1});
        for (std::size_t block : {1u, 7u, 64u, 256u}) {
            for (unsigned threads : {1u, 3u}) {
                EXPECT_TRUE(bitwise_equal(whole.values, gram(z, k, {}, ComputeOptions{block, threads}).values))
                    << describe(k) << " block=" << block << " threads=" << threads;
            }
        }
    }
}

TEST(Center, HandExample) {
    GramMatrix g{Eigen::MatrixXd(2, 2), false};
    g.values << 1, 0, 0, 1;
    const auto c = center(g);
    Eigen::MatrixXd expected(2, 2);
    expected << 0.5, -0.5, -0.5, 0.5;
    EXPECT_TRUE(c.values.isApprox(expected));
    EXPECT_TRUE(c.centered);
}

TEST(Center, ConstantMatrixBecomesZero) {
    GramMatrix g{Eigen::MatrixXd::Constant(6, 6, 3.25), false};
    EXPECT_EQ(center(g).values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Center, MatchesExplicitProjection) {
    const auto raw = oracle::random_matrix(40, 5, 9);
    const Eigen::MatrixXd k = oracle::gram(raw, oracle::Kernel::rbf, 1.1);
    const Eigen::MatrixXd h = oracle::centering(40);
    const auto c = center(GramMatrix{k, false});
    EXPECT_LE((c.values - h * k * h).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LE(c.values.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(bitwise_equal(c.values, c.values.transpose()));
}

TEST(Center, ThreadCountDoesNotChangeBits) {
    const auto raw = oracle::random_matrix(90, 5, 10);
    const GramMatrix g{oracle::gram(raw, oracle::Kernel::rbf, 1.5), false};
    EXPECT_TRUE(bitwise_equal(center(g, {256, 1}).values, center(g, {256, 4}).values));
}

TEST(Center, AlreadyCenteredRejected) {
    GramMatrix g{Eigen::MatrixXd::Identity(3, 3), false};
    const auto c = center(g);
    EXPECT_EQ(kind_of([&] { center(c); }), ErrorKind::AlreadyCentered);
}

TEST(KernelSpec, ParseAndDescribe) {
    EXPECT_EQ(parse_kernel_kind("rbf"), KernelKind::rbf);
    EXPECT_EQ(parse_kernel_kind("linear"), KernelKind::linear);
    EXPECT_EQ(parse_kernel_kind("poly"), KernelKind::polynomial);
    EXPECT_EQ(parse_kernel_kind("polynomial"), KernelKind::polynomial);
    EXPECT_THROW(parse_kernel_kind("laplace"), Error);
    EXPECT_EQ(describe(KernelSpec::linear()), "linear");
    EXPECT_EQ(describe(KernelSpec::rbf(0.5)), "rbf(fraction=0.5)");
    EXPECT_EQ(describe(KernelSpec::polynomial(3, 1.0)), "polynomial(degree=3;coef=1)");
}
