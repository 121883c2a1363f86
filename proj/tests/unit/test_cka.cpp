#include <cmath>

#include <gtest/gtest.h>

#include "featdist/cka.hpp"
#include "oracles.hpp"

using namespace featdist;

namespace {

GramMatrix raw_gram(const Eigen::MatrixXd& k) { return GramMatrix{k, false}; }

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::EmptyInput;
}

const KernelSpec kKernels[] = {KernelSpec::linear(), KernelSpec::polynomial(3, 1.0), KernelSpec::rbf()};

double cka_value(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& k, std::uint64_t seed = 0) {
    return cka(oracle::features(x), oracle::features(y), k, {}, seed).value;
}

} // namespace

TEST(Hsic, IdentityGram) {
    // H I H = H, Tr(H H) = n - 1 = 1, divided by (n-1)^2 = 1.
    EXPECT_NEAR(hsic(raw_gram(Eigen::MatrixXd::Identity(2, 2)), raw_gram(Eigen::MatrixXd::Identity(2, 2))), 1.0, 1e-15);
}

TEST(Hsic, ConstantKernelIsZero) {
    const auto ones = raw_gram(Eigen::MatrixXd::Ones(5, 5));
    const auto other = raw_gram(oracle::gram(oracle::random_matrix(5, 2, 1), oracle::Kernel::rbf));
    EXPECT_NEAR(hsic(ones, other), 0.0, 1e-15);
}

TEST(Hsic, SizeMismatch) {
    EXPECT_EQ(kind_of([] { hsic(raw_gram(Eigen::MatrixXd::Identity(3, 3)), raw_gram(Eigen::MatrixXd::Identity(4, 4))); }),
              ErrorKind::SizeMismatch);
}

TEST(Hsic, MatchesBothBruteForceForms) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto n = 10 + static_cast<Eigen::Index>(seed * 7);
        const Eigen::MatrixXd k = oracle::gram(oracle::random_matrix(n, 4, seed), oracle::Kernel::rbf, 1.7);
        const Eigen::MatrixXd l = oracle::gram(oracle::random_matrix(n, 3, seed + 100), oracle::Kernel::linear);
        const double engine = hsic(raw_gram(k), raw_gram(l));
        EXPECT_NEAR(engine, oracle::hsic(k, l), 1e-10 * std::max(1.0, std::abs(engine)));
        EXPECT_NEAR(engine, oracle::hsic_double_loop(k, l), 1e-10 * std::max(1.0, std::abs(engine)));
    }
}

TEST(Hsic, AcceptsPreCenteredInputs) {
    const Eigen::MatrixXd k = oracle::gram(oracle::random_matrix(20, 4, 3), oracle::Kernel::rbf, 1.0);
    const Eigen::MatrixXd l = oracle::gram(oracle::random_matrix(20, 4, 4), oracle::Kernel::rbf, 1.0);
    const double plain = hsic(raw_gram(k), raw_gram(l));
    EXPECT_NEAR(hsic(center(raw_gram(k)), raw_gram(l)), plain, 1e-14);
    EXPECT_NEAR(hsic(center(raw_gram(k)), center(raw_gram(l))), plain, 1e-14);
}

TEST(Cka, SelfSimilarityIsOne) {
    const auto x = oracle::random_matrix(60, 5, 1);
    for (const auto& k : kKernels) {
        EXPECT_NEAR(cka_value(x, x, k), 1.0, 1e-12) << describe(k);
    }
}

TEST(Cka, LinearScaleInvariance) {
    const auto x = oracle::random_matrix(60, 5, 2);
    EXPECT_NEAR(cka_value(x, 2.0 * x, KernelSpec::linear()), 1.0, 1e-12);
}

TEST(Cka, DegenerateInputRaises) {
    const Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(10, 3, 0.5);
    const auto y = oracle::random_matrix(10, 3, 3);
    EXPECT_EQ(kind_of([&] { cka_value(constant, y, KernelSpec::linear()); }), ErrorKind::DegenerateInput);
}

TEST(Cka, DimensionMismatch) {
    EXPECT_EQ(kind_of([] { cka_value(oracle::random_matrix(10, 3, 1), oracle::random_matrix(10, 4, 2), KernelSpec::linear()); }),
              ErrorKind::DimensionMismatch);
}

TEST(Cka, MatchesBruteForceAtThirtyTwoByFour) {
    const auto x = oracle::random_matrix(32, 4, 11);
    const auto y = oracle::random_matrix(32, 4, 12, 1.5);
    EXPECT_NEAR(cka_value(x, y, KernelSpec::linear()),
                oracle::cka(oracle::gram(x, oracle::Kernel::linear), oracle::gram(y, oracle::Kernel::linear)), 1e-10);
    EXPECT_NEAR(cka_value(x, y, KernelSpec::polynomial(3, 1.0)),
                oracle::cka(oracle::gram(x, oracle::Kernel::polynomial, 1.0, 3, 1.0),
                            oracle::gram(y, oracle::Kernel::polynomial, 1.0, 3, 1.0)),
                1e-10);
    Eigen::MatrixXd both(64, 4);
    both << x, y;
    const double sigma = oracle::median_distance(both);
    const auto r = cka(oracle::features(x), oracle::features(y), KernelSpec::rbf(), {}, 0);
    ASSERT_TRUE(r.bandwidth_used.has_value());
    EXPECT_NEAR(*r.bandwidth_used, sigma, 1e-12);
    EXPECT_NEAR(r.value,
                oracle::cka(oracle::gram(x, oracle::Kernel::rbf, sigma), oracle::gram(y, oracle::Kernel::rbf, sigma)),
                1e-10);
}

TEST(Cka, BoundedAndSymmetric) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto x = oracle::random_matrix(50, 6, seed);
        const auto y = oracle::random_matrix(50, 6, seed + 40, 0.5 + static_cast<double>(seed));
        for (const auto& k : kKernels) {
            const double xy = cka_value(x, y, k, seed);
            EXPECT_GE(xy, 0.0);
            EXPECT_LE(xy, 1.0 + 1e-12);
            EXPECT_NEAR(xy, cka_value(y, x, k, seed), 1e-12) << describe(k);
        }
    }
}

TEST(Cka, LinearOrthogonalAndIsotropicScaleInvariance) {
    const auto x = oracle::random_matrix(80, 6, 21);
    const auto y = oracle::random_matrix(80, 6, 22);
    const Eigen::MatrixXd q = oracle::random_orthogonal(6, 23);
    const double base = cka_value(x, y, KernelSpec::linear());
    EXPECT_NEAR(cka_value(x * q, y, KernelSpec::linear()), base, 1e-10);
    EXPECT_NEAR(cka_value(x, 3.5 * y * q, KernelSpec::linear()), base, 1e-10);
}

TEST(Cka, RbfTranslationAndRotationInvariance) {
    const auto x = oracle::random_matrix(70, 5, 31);
    const auto y = oracle::random_matrix(70, 5, 32, 1.3);
    const Eigen::RowVectorXd t = oracle::random_matrix(1, 5, 33, 4.0);
    const Eigen::MatrixXd q = oracle::random_orthogonal(5, 34);
    const double base = cka_value(x, y, KernelSpec::rbf());
    const Eigen::MatrixXd xt = (x * q).rowwise() + t;
    const Eigen::MatrixXd yt = (y * q).rowwise() + t;
    EXPECT_NEAR(cka_value(xt, yt, KernelSpec::rbf()), base, 1e-10);
}

TEST(Cka, UnequalSizesSubsampleTheLargerSet) {
    const auto x = oracle::random_matrix(50, 3, 41);
    const auto y = oracle::random_matrix(80, 3, 42);
    const auto r = cka(oracle::features(x), oracle::features(y), KernelSpec::linear(), {}, 5);
    EXPECT_EQ(r.n_real, 50u);
    EXPECT_EQ(r.n_syn, 50u);
    const auto idx = select_indices(80, 50, 5);
    Eigen::MatrixXd ys(50, 3);
    for (Eigen::Index i = 0; i < 50; ++i) ys.row(i) = y.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]));
    EXPECT_NEAR(r.value, oracle::cka(oracle::gram(x, oracle::Kernel::linear), oracle::gram(ys, oracle::Kernel::linear)),
                1e-10);
}

TEST(Cka, CapAddsWarningForGramKernels) {
    const auto x = oracle::features(oracle::random_matrix(40, 3, 51));
    const auto y = oracle::features(oracle::random_matrix(40, 3, 52));
    CkaOptions opts;
    opts.max_samples = 25;
    const auto r = cka(x, y, KernelSpec::rbf(), {}, 1, opts);
    EXPECT_EQ(r.n_real, 25u);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("25"), std::string::npos);
    const auto lin = cka(x, y, KernelSpec::linear(), {}, 1, opts);
    EXPECT_EQ(lin.n_real, 40u);
    EXPECT_TRUE(lin.warnings.empty());
}

TEST(Cka, SeededRunsAreBitIdentical) {
    const auto x = oracle::features(oracle::random_matrix(120, 4, 61));
    const auto y = oracle::features(oracle::random_matrix(150, 4, 62));
    const auto a = cka(x, y, KernelSpec::rbf(0.5), {}, 17);
    const auto b = cka(x, y, KernelSpec::rbf(0.5), {}, 17);
    EXPECT_EQ(a, b);
    CkaOptions threaded;
    threaded.compute = {16, 3};
    EXPECT_EQ(a.value, cka(x, y, KernelSpec::rbf(0.5), {}, 17, threaded).value);
}

TEST(Cka, BandwidthOverrideIsRecorded) {
    const auto x = oracle::features(oracle::random_matrix(20, 3, 71));
    const auto r = cka(x, x, KernelSpec::rbf(1.0, 2.5), {}, 0);
    ASSERT_TRUE(r.bandwidth_used.has_value());
    EXPECT_EQ(*r.bandwidth_used, 2.5);
}
