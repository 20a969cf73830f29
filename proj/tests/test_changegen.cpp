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
#include "llcd/changegen.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace llcd;

namespace {

GaussianModel anisotropic_2d() {
    return {Vector::Zero(2), (Vector(2) << 2.0, 0.5).finished().asDiagonal()};
}

}  // namespace

TEST(RotationSequence, OrthogonalAndShrinking) {
    Rng rng(1);
    for (Eigen::Index d : {2, 3, 10, 64}) {
        const auto seq = rotation_sequence(d, rng);
        const Matrix id = Matrix::Identity(d, d);
        for (std::size_t j = 0; j < 20; ++j) {
            const Matrix q = seq[j];
            EXPECT_LT(max_abs_orthogonality_error(q), 1e-10);
            EXPECT_NEAR(q.determinant(), 1.0, 1e-8);
            EXPECT_LE((q - id).norm(), 2.0 * RotationSequence::angle(j) + 1e-12);
            if (j > 0) {
                EXPECT_LT(RotationSequence::angle(j), RotationSequence::angle(j - 1));
            }
        }
        EXPECT_LT((seq[50] - id).norm(), 1e-13);
    }
}

TEST(RotationSequence, QuarterTurnInTwoDimensions) {
    Rng rng(2);
    const auto seq = rotation_sequence(2, rng);
    const Matrix q = seq[1];
    EXPECT_LT(max_abs_orthogonality_error(q), 1e-12);
    EXPECT_LT((q * q + Matrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(RotationSequence, MatchesPlaneFormula) {
    Rng rng(3);
    const auto seq = rotation_sequence(5, rng);
    const Vector& b1 = seq.plane_first();
    const Vector& b2 = seq.plane_second();
    EXPECT_NEAR(b1.norm(), 1.0, 1e-12);
    EXPECT_NEAR(b1.dot(b2), 0.0, 1e-12);
    const double th = RotationSequence::angle(2);
    // the plane rotates: Q b1 = cos b1 + sin b2
    EXPECT_LT((seq[2] * b1 - (std::cos(th) * b1 + std::sin(th) * b2)).norm(), 1e-12);
}

TEST(RotationSequence, OneDimensionIsIdentity) {
    Rng rng(4);
    const auto seq = rotation_sequence(1, rng);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(seq[j](0, 0), 1.0);
}

TEST(RandomUnitVector, NormAndSymmetry) {
    Rng rng(5);
    for (int t = 0; t < 100; ++t) EXPECT_NEAR(random_unit_vector(7, rng).norm(), 1.0, 1e-12);
    for (int t = 0; t < 20; ++t) EXPECT_EQ(std::abs(random_unit_vector(1, rng)(0)), 1.0);
    Vector sum = Vector::Zero(3);
    for (int t = 0; t < 10000; ++t) sum += random_unit_vector(3, rng);
    EXPECT_LT((sum / 1e4).norm(), 0.05);
}

TEST(SelectRotation, OneDimensionAndIsotropic) {
    Rng rng(6);
    const auto r1 = select_rotation(GaussianModel::standard(1), rotation_sequence(1, rng), 1.0, rng);
    EXPECT_EQ(r1.index, 0u);
    EXPECT_EQ(r1.skl.value, 0.0);
    const auto r5 = select_rotation(GaussianModel::standard(5), rotation_sequence(5, rng), 1.0, rng);
    EXPECT_EQ(r5.index, 0u);
    EXPECT_NEAR(r5.skl.value, 0.0, 1e-12);
}

TEST(SelectRotation, AnisotropicHaltsBelowTarget) {
    Rng rng(7);
    const auto g = anisotropic_2d();
    const auto seq = rotation_sequence(2, rng);
    const auto r = select_rotation(g, seq, 1.0, rng);
    const double at = skl_gaussian_transform(g, r.q, Vector::Zero(2)).value;
    EXPECT_GE(at, 0.0);
    EXPECT_LT(at, 1.0);
    if (r.index > 0) {
        EXPECT_GE(skl_gaussian_transform(g, seq[r.index - 1], Vector::Zero(2)).value, 1.0);
    }
}

TEST(SelectRotation, RejectsNonPositiveTarget) {
    Rng rng(8);
    EXPECT_THROW(select_rotation(GaussianModel::standard(2), rotation_sequence(2, rng), 0.0, rng), NumericError);
}

TEST(SolveTranslationGaussian, UnitVarianceShift) {
    const double rho = solve_translation_gaussian(GaussianModel::standard(1), Matrix::Identity(1, 1), Vector::Ones(1), 1.0);
    EXPECT_NEAR(rho, 1.0, 1e-12);
}

TEST(SolveTranslationGaussian, ScaledVarianceShift) {
    const GaussianModel g(Vector::Zero(1), Matrix::Constant(1, 1, 4.0));
    EXPECT_NEAR(solve_translation_gaussian(g, Matrix::Identity(1, 1), Vector::Ones(1), 1.0), 2.0, 1e-12);
}

TEST(SolveTranslationGaussian, RejectsRotationAboveTarget) {
    Rng rng(9);
    const auto g = anisotropic_2d();
    const Matrix q = rotation_sequence(2, rng)[1];
    const double rot = skl_gaussian_transform(g, q, Vector::Zero(2)).value;
    EXPECT_THROW(solve_translation_gaussian(g, q, Vector::Unit(2, 0), 0.5 * rot), NumericError);
}

TEST(SolveTranslationGaussian, GridMonotoneForPureTranslation) {
    Rng rng(10);
    for (int t = 0; t < 20; ++t) {
        const auto g = random_gaussian(1 + t % 8, rng);
        const Vector u = random_unit_vector(g.dim(), rng);
        const GaussianTransformSkl skl(g);
        const Matrix id = Matrix::Identity(g.dim(), g.dim());
        double prev = skl(id, Vector::Zero(g.dim()));
        for (int n = 1; n <= 30; ++n) {
            const double cur = skl(id, 0.1 * n * u);
            EXPECT_GE(cur, prev - 1e-12);
            prev = cur;
        }
    }
}

TEST(SolveTranslationGaussian, GridMonotonePastVertexWithSingleCrossing) {
    Rng rng(20);
    for (int t = 0; t < 50; ++t) {
        const auto g = random_gaussian(2 + t % 8, rng);
        const auto r = select_rotation(g, rotation_sequence(g.dim(), rng), 1.0, rng);
        const Vector u = random_unit_vector(g.dim(), rng);
        const GaussianTransformSkl skl(g);
        const auto quad = skl.along(r.q, u);
        ASSERT_GT(quad.a, 0.0);
        const double vertex = std::max(0.0, -quad.b / (2.0 * quad.a));
        double prev = skl(r.q, Vector::Zero(g.dim()));
        int crossings = 0;
        for (int n = 1; n <= 60; ++n) {
            const double rho = 0.1 * n;
            const double cur = skl(r.q, rho * u);
            if (rho - 0.1 >= vertex) {
                EXPECT_GE(cur, prev - 1e-12);
            }
            crossings += (prev < 1.0) != (cur < 1.0) ? 1 : 0;
            prev = cur;
        }
        EXPECT_LE(crossings, 1);
    }
}

TEST(SolveTranslationMc, TracksExactRootOnGaussians) {
    Rng rng(11);
    ChangeGenOptions opts;
    opts.mc_samples = 20000;
    for (int t = 0; t < 5; ++t) {
        const auto g = random_gaussian(2 + t, rng);
        const auto seq = rotation_sequence(g.dim(), rng);
        const auto r = select_rotation(g, seq, 1.0, rng);
        const Vector u = random_unit_vector(g.dim(), rng);
        const double exact = solve_translation_gaussian(g, r.q, u, 1.0);
        const auto mc = solve_translation_mc(g, r.q, u, 1.0, rng, opts);
        EXPECT_NEAR(mc.rho, exact, 0.05);
    }
}

TEST(SolveTranslationMc, ZeroTargetGivesZero) {
    Rng rng(12);
    const auto sol = solve_translation_mc(GaussianModel::standard(2), Matrix::Identity(2, 2), Vector::Unit(2, 0), 0.0, rng);
    EXPECT_EQ(sol.rho, 0.0);
}

TEST(SolveTranslationMc, UnreachableTargetErrors) {
    Rng rng(13);
    ChangeGenOptions opts;
    opts.mc_samples = 1000;
    opts.max_grid_steps = 3;
    try {
        solve_translation_mc(GaussianModel::standard(1), Matrix::Identity(1, 1), Vector::Ones(1), 50.0, rng, opts);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("target unreachable on grid"), std::string::npos);
    }
}

TEST(GenerateChange, ClosedFormCalibrationAcrossDimensions) {
    Rng rng(14);
    for (Eigen::Index d : {1, 2, 4, 8, 16, 32, 64, 128}) {
        const auto g = random_gaussian(d, rng);
        const auto c = generate_change(g, 1.0, rng);
        EXPECT_EQ(c.method, CalibrationMethod::closed_form);
        EXPECT_LT(std::abs(c.achieved_skl.value - 1.0), 1e-9) << "d=" << d;
        EXPECT_LT(std::abs(skl_gaussian_transform(g, c.q, c.v).value - 1.0), 1e-9);
        EXPECT_LT(max_abs_orthogonality_error(c.q), 1e-10);
        EXPECT_NEAR(c.q.determinant(), 1.0, 1e-8);
        EXPECT_LT(c.rotation_skl.value, 1.0);
        EXPECT_EQ(c.dim(), d);
        EXPECT_DOUBLE_EQ(c.target_skl, 1.0);
    }
}

TEST(GenerateChange, RotationThenTranslationProperty) {
    Rng rng(15);
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index d = 1 + t % 64;
        const auto g = random_gaussian(d, rng);
        const auto c = generate_change(g, 1.0, rng);
        EXPECT_LT(c.rotation_skl.unclipped, 1.0);
        EXPECT_LT(std::abs(c.achieved_skl.unclipped - 1.0), 1e-9);
        EXPECT_GE(c.rho, 0.0);
    }
}

TEST(GenerateChange, OneDimensionIsUnitShift) {
    Rng rng(16);
    const auto c = generate_change(GaussianModel::standard(1), 1.0, rng);
    EXPECT_EQ(c.q(0, 0), 1.0);
    EXPECT_NEAR(std::abs(c.v(0)), 1.0, 1e-12);
    EXPECT_EQ(c.rotation_index, 0u);
}

TEST(GenerateChange, ConfigurableTarget) {
    Rng rng(17);
    const auto g = random_gaussian(6, rng);
    const auto c = generate_change(g, 2.5, rng);
    EXPECT_LT(std::abs(c.achieved_skl.value - 2.5), 1e-9);
    EXPECT_THROW(generate_change(g, 0.0, rng), NumericError);
}

TEST(GenerateChange, MixtureWithinMonteCarloTolerance) {
    Rng rng(18);
    Vector w(2);
    w << 0.5, 0.5;
    ChangeGenOptions opts;
    opts.mc_samples = 20000;
    const DensityModel m = random_mixture(4, w, rng);
    const auto c = generate_change(m, 1.0, rng, opts);
    EXPECT_EQ(c.method, CalibrationMethod::monte_carlo);
    EXPECT_LT(std::abs(c.achieved_skl.value - 1.0), mc_calibration_tolerance(c.achieved_skl));
    EXPECT_LT(max_abs_orthogonality_error(c.q), 1e-10);
    // independent re-check with a fresh generator
    Rng fresh(999);
    const auto check = skl_monte_carlo(m, transform_model(m, c.q, c.v), 20000, fresh);
    EXPECT_LT(std::abs(check.value - 1.0), std::max(0.05, 3.0 * std::hypot(check.std_error, c.achieved_skl.std_error)));
}

TEST(GenerateChange, DeterministicForSeed) {
    Rng data_rng(19);
    const auto g = random_gaussian(8, data_rng);
    Rng a(5);
    Rng b(5);
    const auto ca = generate_change(g, 1.0, a);
    const auto cb = generate_change(g, 1.0, b);
    EXPECT_EQ(ca.q, cb.q);
    EXPECT_EQ(ca.v, cb.v);
}
