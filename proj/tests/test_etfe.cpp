#include <gtest/gtest.h>

#include "support.hpp"

using namespace ltpsid;
using ltpsid::testing::code_of;

TEST(Etfe, NoiseFreeRecoversTrueResponse)
{
    for (const auto& model : {fixtures::example1(), fixtures::example2(), ltpsid::testing::random_model(3, 2, 3, 2, 2)}) {
        const std::size_t N = 8;
        const Ensemble e = ltpsid::testing::noise_free_ensemble(model, N);
        const auto spectra = assemble_spectra(e);
        const auto estimate = etfe(spectra);
        const auto truth = true_lifted_frequency_response(model, N);
        double scale = 0.0;
        for (const auto& g : truth.values) {
            scale = std::max(scale, g.cwiseAbs().maxCoeff());
        }
        for (std::size_t k = 0; k < N; ++k) {
            EXPECT_LT((estimate.values[k] - truth.values[k]).cwiseAbs().maxCoeff(), 1e-9 * scale) << "k=" << k;
        }
        for (double r : residual_energy(spectra, estimate)) {
            EXPECT_LT(r, 1e-8 * scale);
        }
    }
}

TEST(Etfe, MinimalExperimentCountSuffices)
{
    const LtpModel model = fixtures::example2();
    const auto estimate = etfe(assemble_spectra(ltpsid::testing::noise_free_ensemble(model, 6, 3)));
    const auto truth = true_lifted_frequency_response(model, 6);
    for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_LT((estimate.values[k] - truth.values[k]).cwiseAbs().maxCoeff(), 1e-7);
    }
}

TEST(Etfe, RankDeficiency)
{
    const LtpModel model = fixtures::example2();
    auto spectra = assemble_spectra(ltpsid::testing::noise_free_ensemble(model, 4, 3));
    for (auto& U : spectra.U) {
        U.conservativeResize(Eigen::NoChange, 2);
    }
    EXPECT_EQ(code_of([&] { etfe(spectra); }), ErrorCode::RankDeficient);

    EnsembleOptions options;
    options.J = 4;
    options.N = 4;
    options.shared_input = true;
    const auto shared = assemble_spectra(collect_ensemble(model, options));
    try {
        etfe(shared);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
        EXPECT_NE(std::string(e.what()).find("smallest singular value"), std::string::npos);
    }
}

TEST(Etfe, LinearInOutputs)
{
    const LtpModel model = fixtures::example2();
    const Ensemble e = ltpsid::testing::noise_free_ensemble(model, 5);
    Ensemble scaled = e;
    for (auto& x : scaled.experiments) {
        x.output *= 3.0;
    }
    const auto a = etfe(assemble_spectra(e));
    const auto b = etfe(assemble_spectra(scaled));
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_LT((3.0 * a.values[k] - b.values[k]).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Etfe, ErrorStatisticsOnSmallStudy)
{
    EtfeStudyConfig config;
    config.trials = 120;
    config.N = 9;
    config.seed = 4;
    config.pairs = 20;
    const auto stats = etfe_error_stats(fixtures::example1(), config);
    EXPECT_EQ(stats.trials, 120U);
    EXPECT_EQ(stats.mean_error.size(), 9U);
    EXPECT_EQ(stats.pairs.size(), 20U);
    for (const auto& p : stats.pairs) {
        EXPECT_NE(p.k, p.m);
        EXPECT_NE((p.k + p.m) % 9, 0U);
    }
    EXPECT_GE(stats.bias_pass_fraction, 0.9);
    EXPECT_GE(stats.correlation_pass_fraction, 0.8);
    EXPECT_GT(stats.mean_variance, 0.0);
}
