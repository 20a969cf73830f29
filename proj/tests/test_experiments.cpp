/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#include "llcd/config.hpp"
#include "llcd/experiments.hpp"

#include <gtest/gtest.h>

using namespace llcd;

namespace {

ExperimentConfig small_power_config() {
    auto cfg = gaussian_power_defaults();
    cfg.dims = {1, 4};
    cfg.runs = 30;
    cfg.window = 200;
    cfg.mc_samples = 2000;
    cfg.base_seed = 7;
    return cfg;
}

}  // namespace

TEST(TrainingPolicy, ParseAndLabel) {
    EXPECT_EQ(parse_training_policy("known"), TrainingPolicy::known());
    EXPECT_EQ(parse_training_policy("per-dim:100").samples(8), 800u);
    EXPECT_EQ(parse_training_policy("fixed:100").samples(128), 100u);
    EXPECT_EQ(TrainingPolicy::per_dim(200).label(), "per-dim:200");
    EXPECT_EQ(parse_training_policy(TrainingPolicy::fixed(100).label()), TrainingPolicy::fixed(100));
    EXPECT_THROW(parse_training_policy("per-dim:"), std::invalid_argument);
    EXPECT_THROW(parse_training_policy("fixed:-3"), std::invalid_argument);
    EXPECT_THROW(parse_training_policy("sometimes"), std::invalid_argument);
    EXPECT_NE(TrainingPolicy::per_dim(100).seed_tag(), TrainingPolicy::fixed(100).seed_tag());
}

TEST(LikelihoodVariant, ParseRoundTrip) {
    for (auto v : {LikelihoodVariant::exact, LikelihoodVariant::upper, LikelihoodVariant::lower,
                   LikelihoodVariant::upper_conventional}) {
        EXPECT_EQ(parse_likelihood_variant(to_string(v)), v);
    }
    EXPECT_THROW(parse_likelihood_variant("middle"), std::invalid_argument);
}

TEST(ExperimentConfig, Validation) {
    auto cfg = small_power_config();
    EXPECT_NO_THROW(cfg.validate());
    cfg.mc_samples = 999;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = small_power_config();
    cfg.alpha = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = small_power_config();
    cfg.dims.clear();
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(GaussianPower, DeterministicAcrossWorkerCounts) {
    auto cfg = small_power_config();
    cfg.workers = 1;
    const auto a = gaussian_power_experiment(cfg);
    cfg.workers = 3;
    const auto b = gaussian_power_experiment(cfg);
    EXPECT_EQ(config::power_csv(a), config::power_csv(b));
    ASSERT_EQ(a.audit.size(), b.audit.size());
    for (std::size_t i = 0; i < a.audit.size(); ++i) {
        EXPECT_EQ(a.audit[i].seed, b.audit[i].seed);
        EXPECT_EQ(a.audit[i].achieved_skl, b.audit[i].achieved_skl);
    }
}

TEST(GaussianPower, EntriesAreConsistent) {
    const auto cfg = small_power_config();
    const auto curve = gaussian_power_experiment(cfg);
    EXPECT_EQ(curve.entries.size(), cfg.dims.size() * 2 * cfg.training.size());
    EXPECT_EQ(curve.audit.size(), cfg.dims.size() * cfg.runs);
    for (const auto& e : curve.entries) {
        EXPECT_GE(e.power, 0.0);
        EXPECT_LE(e.power, 1.0);
        const auto failed = std::count_if(curve.audit.begin(), curve.audit.end(),
                                          [&](const RunAudit& a) { return a.d == e.d && !a.ok; });
        EXPECT_EQ(e.runs + static_cast<std::size_t>(failed), cfg.runs);
        EXPECT_DOUBLE_EQ(e.std_error, binomial_std_error(e.power, e.runs));
    }
    for (const auto& a : curve.audit) {
        if (a.ok) {
            EXPECT_LT(std::abs(a.achieved_skl - cfg.target_skl), 1e-6);
        }
    }
    ASSERT_NE(curve.find(1, "t-test", "known"), nullptr);
    ASSERT_NE(curve.find(4, "lepage", "fixed:100"), nullptr);
    EXPECT_EQ(curve.find(2, "t-test", "known"), nullptr);
    // one dimension, one unit of sKL, windows of 200: the known-density t-test detects it
    EXPECT_GT(curve.find(1, "t-test", "known")->power, 0.8);
}

TEST(GaussianPower, SeedChangesResults) {
    auto cfg = small_power_config();
    const auto a = gaussian_power_experiment(cfg);
    cfg.base_seed = 8;
    const auto b = gaussian_power_experiment(cfg);
    EXPECT_NE(a.audit.front().seed, b.audit.front().seed);
}

TEST(GmmVariance, SingleComponentMatchesHalfDimension) {
    auto cfg = gmm_variance_defaults();
    cfg.dims = {1, 4, 16};
    cfg.runs = 40;
    cfg.mixture_k = 1;
    cfg.training = {TrainingPolicy::known()};
    cfg.variants = {LikelihoodVariant::exact, LikelihoodVariant::upper, LikelihoodVariant::lower};
    const auto curve = gmm_variance_experiment(cfg);
    EXPECT_EQ(curve.failures, 0u);
    for (auto d : cfg.dims) {
        for (const char* v : {"exact", "upper", "lower"}) {
            const auto* e = curve.find(d, v);
            ASSERT_NE(e, nullptr);
            EXPECT_NEAR(e->mean_sample_variance, static_cast<double>(d) / 2.0, 0.1 * static_cast<double>(d) / 2.0)
                << "d=" << d << " " << v;
            EXPECT_EQ(e->streams, cfg.runs);
        }
    }
}

TEST(GmmVariance, LabelsAndDeterminism) {
    auto cfg = gmm_variance_defaults();
    cfg.dims = {2};
    cfg.runs = 6;
    cfg.window = 100;
    cfg.workers = 1;
    const auto a = gmm_variance_experiment(cfg);
    cfg.workers = 2;
    const auto b = gmm_variance_experiment(cfg);
    EXPECT_EQ(config::variance_csv(a), config::variance_csv(b));
    for (const char* label : {"upper", "lower", "upper@per-dim:200", "lower@per-dim:200"}) {
        EXPECT_NE(a.find(2, label), nullptr) << label;
    }
}

TEST(RealData, RejectsInsufficientRowsAndExcessDims) {
    const auto data = synthetic_surrogate(3, 300, 2, 1);
    auto cfg = realdata_power_defaults();
    cfg.runs = 2;
    cfg.mixture_k = 2;
    cfg.dims = {1};
    EXPECT_THROW(realdata_power_experiment(data, cfg), DataError);
    cfg.window = 20;
    cfg.dims = {4};
    EXPECT_THROW(realdata_power_experiment(data, cfg), DataError);
    cfg.dims = {1};
    cfg.training = {TrainingPolicy::known()};
    EXPECT_THROW(realdata_power_experiment(data, cfg), std::invalid_argument);
}

TEST(RealData, SmallRunIsDeterministic) {
    const auto data = synthetic_surrogate(3, 1200, 2, 2);
    auto cfg = realdata_power_defaults();
    cfg.runs = 8;
    cfg.window = 100;
    cfg.mc_samples = 2000;
    cfg.k_candidates = {1, 2, 3};
    cfg.folds = 3;
    cfg.workers = 1;
    const auto a = realdata_power_experiment(data, cfg);
    cfg.workers = 2;
    const auto b = realdata_power_experiment(data, cfg);
    EXPECT_EQ(a.k, b.k);
    EXPECT_GE(a.k, 1u);
    EXPECT_EQ(a.selection.scores.size(), 3u);
    EXPECT_EQ(config::power_csv(a.curve), config::power_csv(b.curve));
    EXPECT_EQ(a.curve.entries.size(), 3u * 2u * 2u);
}

TEST(Surrogate, ShapeAndSeed) {
    const auto a = synthetic_surrogate(11, 500, 4, 3);
    EXPECT_EQ(a.rows(), 500);
    EXPECT_EQ(a.cols(), 11);
    EXPECT_EQ(a.values(), synthetic_surrogate(11, 500, 4, 3).values());
    EXPECT_NE(a.values(), synthetic_surrogate(11, 500, 4, 4).values());
}
