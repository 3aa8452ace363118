#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include "relspec/regression.hpp"

using namespace relspec;
using namespace relspec::eval;

namespace {

double boost_two_tailed(double t, double df) {
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

Dataset line_data(std::size_t n, double a, double b) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1), y(static_cast<Eigen::Index>(n), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        x(i, 0) = static_cast<double>(i) / 10.0;
        y(i, 0) = a + b * x(i, 0);
    }
    return make_dataset(x, y);
}

// y = 1 + x1 * x2 - x1^2 on uniform [0, 1] inputs
Dataset quadratic_data(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2), y(static_cast<Eigen::Index>(n), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        x(i, 0) = u(rng);
        x(i, 1) = u(rng);
        y(i, 0) = 1.0 + x(i, 0) * x(i, 1) - x(i, 0) * x(i, 0);
    }
    return make_dataset(x, y, {"a", "b"}, {"y"});
}

}  // namespace

TEST(LinearRegression, ZeroTargetsGiveZeroCoefficients) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    Eigen::MatrixXd x(20, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    const auto fit = fit_lr(make_dataset(x, Eigen::MatrixXd::Zero(20, 2)));
    EXPECT_TRUE(fit.coefficients.isZero(0.0));
    EXPECT_FALSE(fit.rank_deficient);
}

TEST(LinearRegression, RecoversExactLine) {
    const auto fit = fit_lr(line_data(30, 2.0, 3.0));
    EXPECT_NEAR(fit.coefficients(0, 0), 2.0, 1e-10);
    EXPECT_NEAR(fit.coefficients(1, 0), 3.0, 1e-10);
}

TEST(LinearRegression, ResidualOrthogonalToFeatures) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    Eigen::MatrixXd x(50, 4), y(50, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = n(rng);
    const auto d = make_dataset(x, y);
    const auto fit = fit_lr(d);
    const Eigen::MatrixXd res = d.targets - fit.predict(d.features);
    EXPECT_LT((d.features.transpose() * res).cwiseAbs().maxCoeff(), 1e-10);

    // no other coefficient vector does better in MSE
    const double best = res.squaredNorm();
    for (int k = 0; k < 50; ++k) {
        Eigen::MatrixXd other = fit.coefficients;
        for (Eigen::Index i = 0; i < other.size(); ++i) other.data()[i] += 0.01 * n(rng);
        EXPECT_GE((d.targets - d.features * other).squaredNorm(), best);
    }
}

TEST(LinearRegression, RankDeficiencyIsFlagged) {
    Eigen::MatrixXd x(10, 2), y(10, 1);
    for (Eigen::Index i = 0; i < 10; ++i) {
        x(i, 0) = static_cast<double>(i);
        x(i, 1) = 2.0 * static_cast<double>(i);
        y(i, 0) = static_cast<double>(i);
    }
    const auto d = make_dataset(x, y);
    const auto fit = fit_lr(d);
    EXPECT_TRUE(fit.rank_deficient);
    EXPECT_EQ(fit.rank, 2u);
    EXPECT_LT((fit.predict(d.features) - d.targets).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Metrics, RSquaredAndMse) {
    const std::vector<double> t = {0, 1, 2}, p = {0, 0, 2};
    EXPECT_DOUBLE_EQ(r_squared(t, p), 0.5);
    EXPECT_DOUBLE_EQ(r_squared(t, t), 1.0);
    const std::vector<double> flat = {1, 1, 1};
    EXPECT_THROW(r_squared(flat, t), ValidationError);

    const std::vector<double> a = {1, 2, 3, 4}, b = {2, 4, 6, 8};
    EXPECT_DOUBLE_EQ(mse(a, b), 7.5);
    const std::vector<double> c = {0, 0}, d = {1, 2};
    EXPECT_DOUBLE_EQ(mse(c, d), 2.5);
    std::vector<double> off(a);
    for (double& x : off) x += 0.25;
    EXPECT_DOUBLE_EQ(mse(a, off), 0.0625);
    EXPECT_THROW(mse(a, c), ValidationError);
}

TEST(KFold, SizesAndPartition) {
    const auto s = kfold(10, 3);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].test.size(), 4u);
    EXPECT_EQ(s[1].test.size(), 3u);
    EXPECT_EQ(s[2].test.size(), 3u);
    EXPECT_EQ(s[0].test, (std::vector<std::size_t>{0, 1, 2, 3}));

    for (auto scheme : {FoldScheme::contiguous, FoldScheme::seeded_random})
        for (std::size_t n : {5u, 17u, 100u})
            for (std::size_t k : {2u, 5u}) {
                const auto splits = kfold(n, k, scheme, 9);
                std::multiset<std::size_t> all;
                for (const auto& sp : splits) {
                    all.insert(sp.test.begin(), sp.test.end());
                    EXPECT_EQ(sp.test.size() + sp.train.size(), n);
                    for (auto r : sp.test) EXPECT_FALSE(std::binary_search(sp.train.begin(), sp.train.end(), r));
                }
                EXPECT_EQ(all.size(), n);
                EXPECT_EQ(std::set<std::size_t>(all.begin(), all.end()).size(), n);
            }

    const auto single = kfold(4, 4);
    for (const auto& sp : single) EXPECT_EQ(sp.test.size(), 1u);
    EXPECT_THROW(kfold(3, 5), ValidationError);
    EXPECT_EQ(kfold(20, 4, FoldScheme::seeded_random, 3)[0].test, kfold(20, 4, FoldScheme::seeded_random, 3)[0].test);
}

TEST(CrossValidate, LinearOnLinearData) {
    const auto r = cross_validate(line_data(40, -1.0, 0.5), 5, LinearSpec{});
    EXPECT_EQ(r.model, "LR");
    ASSERT_EQ(r.folds.size(), 5u);
    for (const auto& f : r.folds) EXPECT_NEAR(f.r2[0], 1.0, 1e-10);
    EXPECT_NEAR(r.r2_mean[0], 1.0, 1e-10);
    EXPECT_LT(r.mse_mean[0], 1e-20);
    EXPECT_EQ(r.fold_of_row.front(), 0u);
    EXPECT_EQ(r.fold_of_row.back(), 4u);
}

TEST(CrossValidate, DendriteBeatsLinearOnQuadraticData) {
    const auto d = quadratic_data(400, 5);
    DendriteSpec spec;
    spec.hidden_widths = {0};
    spec.train.learning_rate = 0.05;
    spec.train.epochs = 300;
    spec.train.batch_size = 16;
    const auto dd_res = cross_validate(d, 4, spec, FoldScheme::seeded_random, 1);
    const auto lr_res = cross_validate(d, 4, LinearSpec{}, FoldScheme::seeded_random, 1);
    EXPECT_EQ(dd_res.model, "DD");
    EXPECT_GT(dd_res.r2_mean[0], lr_res.r2_mean[0]);
    EXPECT_GT(dd_res.r2_mean[0], 0.99);
}

TEST(TTest, KnownDifferences) {
    // d = (1, 2, 3, 4): mean 2.5, sd sqrt(5/3), t = 2.5 / (sd / 2)
    const std::vector<double> a = {1, 2, 3, 4}, zero = {0, 0, 0, 0};
    const auto r = paired_t_test(a, zero);
    EXPECT_FALSE(r.degenerate);
    EXPECT_EQ(r.df, 3u);
    EXPECT_NEAR(r.t, 2.5 / (std::sqrt(5.0 / 3.0) / 2.0), 1e-12);
    EXPECT_NEAR(r.t, 3.872983346207417, 1e-12);
    // closed form for df = 3
    const double s3 = std::sqrt(3.0);
    const double u = r.t / s3;
    const double cdf = 0.5 + (u / (1 + u * u) + std::atan(u)) / std::numbers::pi;
    EXPECT_NEAR(r.p, 2 * (1 - cdf), 1e-12);
    EXPECT_NEAR(r.p, boost_two_tailed(r.t, 3), 1e-12);

    const auto flipped = paired_t_test(zero, a);
    EXPECT_NEAR(flipped.t, -r.t, 1e-12);
    EXPECT_NEAR(flipped.p, r.p, 1e-15);
}

TEST(TTest, SymmetricAndDegenerateCases) {
    const std::vector<double> a = {1, -1, 1, -1, 1, -1}, z(6, 0.0);
    const auto r = paired_t_test(a, z);
    EXPECT_EQ(r.t, 0.0);
    EXPECT_NEAR(r.p, 1.0, 1e-14);

    const std::vector<double> x = {1, 2, 3}, y = {0, 1, 2};
    const auto d = paired_t_test(x, y);
    EXPECT_TRUE(d.degenerate);
    EXPECT_TRUE(std::isnan(d.t));
    EXPECT_TRUE(to_json(d)["degenerate"].get<bool>());
    EXPECT_THROW(paired_t_test(std::vector<double>{1.0}, std::vector<double>{0.0}), ValidationError);
}

TEST(StudentT, AgreesWithBoost) {
    EXPECT_DOUBLE_EQ(stats::student_t_cdf(0.0, 4.0), 0.5);
    EXPECT_NEAR(stats::student_t_cdf(1.5, 5.0), 0.9030481598787634, 1e-13);
    EXPECT_NEAR(stats::student_t_two_tailed(2.0, 10.0), 0.07338803477074039, 1e-13);
    EXPECT_NEAR(stats::student_t_cdf(-0.7, 1.0), 0.3055998877857853, 1e-13);
    for (double df : {1.0, 2.0, 3.5, 9.0, 30.0, 200.0})
        for (double t : {-8.0, -2.5, -0.3, 0.1, 1.0, 4.0, 20.0}) {
            boost::math::students_t dist(df);
            EXPECT_NEAR(stats::student_t_cdf(t, df), boost::math::cdf(dist, t), 1e-12) << "t=" << t << " df=" << df;
            EXPECT_NEAR(stats::student_t_two_tailed(t, df), boost_two_tailed(t, df), 1e-12);
        }
}
