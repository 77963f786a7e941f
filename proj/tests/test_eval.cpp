#include <gtest/gtest.h>

#include "support.hpp"

using namespace ltpsid;
using ltpsid::testing::code_of;

TEST(Stats, QuantilesAndSlope)
{
    EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_DOUBLE_EQ(median({1.0, 2.0, 3.0, 4.0}), 2.5);
    EXPECT_DOUBLE_EQ(quantile({0.0, 10.0}, 0.25), 2.5);
    std::vector<double> x{10, 20, 40, 80};
    std::vector<double> y;
    for (double v : x) {
        y.push_back(3.0 / v);
    }
    EXPECT_NEAR(loglog_slope(x, y), -1.0, 1e-12);
}

TEST(Stats, SummaryFlagsManyFailures)
{
    auto s = summarize({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0}, 10);
    EXPECT_EQ(s.failures, 1U);
    EXPECT_FALSE(s.config_failed);
    EXPECT_DOUBLE_EQ(s.median, 5.0);
    EXPECT_DOUBLE_EQ(s.min, 1.0);
    EXPECT_DOUBLE_EQ(s.max, 9.0);
    s = summarize({1.0, 2.0}, 4);
    EXPECT_TRUE(s.config_failed);
}

TEST(Fit, IdenticalModelsScoreHundred)
{
    const auto report = fit_metric(fixtures::example1(), fixtures::example1());
    EXPECT_DOUBLE_EQ(report.W, 100.0);
    EXPECT_DOUBLE_EQ(report.mse, 0.0);
    EXPECT_EQ(report.errors.rows(), 2);
    EXPECT_EQ(report.errors.cols(), 50);
}

TEST(Fit, ZeroEstimateScoresByMeanRatio)
{
    const LtpModel truth = fixtures::example2();
    std::vector<Matrix> B;
    for (const auto& b : truth.B_seq()) {
        B.push_back(Matrix::Zero(b.rows(), b.cols()));
    }
    const LtpModel zero(truth.A_seq(), B, truth.C_seq());
    const auto g = impulse_response_table(truth, 50);
    double sum = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t r = 1; r <= 50; ++r) {
            sum += g.at(t, r)(0, 0);
            sq += g.at(t, r)(0, 0) * g.at(t, r)(0, 0);
        }
    }
    const double mean = sum / 150.0;
    const double expected = 100.0 * (1.0 - std::sqrt(sq / (sq - 150.0 * mean * mean)));
    const auto report = fit_metric(truth, zero);
    EXPECT_NEAR(report.W, expected, 1e-9);
    EXPECT_NEAR(report.mse, sq / 150.0, 1e-12);
}

TEST(Fit, InvariantUnderSimilarityOfEstimate)
{
    const LtpModel truth = fixtures::example1();
    const LtpModel perturbed(truth.A_seq(), {truth.B(0) * 1.01, truth.B(1)}, truth.C_seq());
    const LtpModel transformed = similarity_transform(perturbed, ltpsid::testing::random_transforms(3, 2, 2));
    EXPECT_NEAR(fit_metric(truth, perturbed).W, fit_metric(truth, transformed).W, 1e-8);
}

TEST(Fit, Errors)
{
    EXPECT_EQ(code_of([] { fit_metric(fixtures::example1(), fixtures::example2()); }), ErrorCode::DimensionMismatch);
    const LtpModel flat({Matrix::Constant(1, 1, 0.0)}, {Matrix::Zero(1, 1)}, {Matrix::Ones(1, 1)});
    EXPECT_EQ(code_of([&] { fit_metric(flat, flat); }), ErrorCode::DegenerateReference);
}

TEST(MonteCarlo, DeterministicAndJobIndependent)
{
    StudyConfig config;
    config.trials = 6;
    config.N = 20;
    config.seed = 5;
    const auto a = monte_carlo(fixtures::example1(), config);
    config.jobs = 3;
    const auto b = monte_carlo(fixtures::example1(), config);
    ASSERT_EQ(a.trials.size(), 6U);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(a.trials[i].seed, b.trials[i].seed);
        EXPECT_EQ(a.trials[i].W, b.trials[i].W);
        EXPECT_FALSE(a.trials[i].failed);
    }
    EXPECT_EQ(a.W.failures, 0U);
    EXPECT_GT(a.W.median, 80.0);
}

TEST(MonteCarlo, FitDegradesWithNoise)
{
    StudyConfig config;
    config.trials = 15;
    config.N = 20;
    config.seed = 2;
    double previous = 101.0;
    for (double sigma : {0.0, 0.3, 3.0}) {
        config.sigma = sigma;
        const double w = monte_carlo(fixtures::example2(), config).W.median;
        EXPECT_LT(w, previous) << "sigma=" << sigma;
        previous = w;
    }
}

TEST(MonteCarlo, FailuresAreRecordedNotThrown)
{
    StudyConfig config;
    config.trials = 3;
    config.N = 4;
    config.q = 2;
    config.r = 2;
    config.order = OrderSpec::known(2);
    const auto result = monte_carlo(fixtures::example2(), config);
    EXPECT_EQ(result.W.failures, 3U);
    EXPECT_TRUE(result.W.config_failed);
    EXPECT_NE(result.trials[0].failure.find("ShiftRankDeficient"), std::string::npos);
}

TEST(Sweep, ReportsPerLengthMedians)
{
    StudyConfig config;
    config.trials = 4;
    config.J = 20;
    config.seed = 3;
    const auto sweep = consistency_sweep(fixtures::example1(), {25, 50, 100}, config);
    ASSERT_EQ(sweep.median_mse.size(), 3U);
    EXPECT_GT(sweep.median_mse[0], sweep.median_mse[2]);
    EXPECT_LT(sweep.slope, 0.0);
    EXPECT_EQ(code_of([&] { consistency_sweep(fixtures::example1(), {}, config); }), ErrorCode::InvalidConfig);
}
