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
#include "llcd/divergence.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace llcd;

namespace {

Matrix rotation_2d(double theta) {
    Matrix q(2, 2);
    q << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return q;
}

// KL(N0 || N1) written out with explicit inverses.
double kl_oracle(const Vector& m0, const Matrix& s0, const Vector& m1, const Matrix& s1) {
    const double d = static_cast<double>(m0.size());
    const Matrix s1inv = s1.inverse();
    const Vector diff = m1 - m0;
    return 0.5 * ((s1inv * s0).trace() + diff.dot(s1inv * diff) - d + std::log(s1.determinant() / s0.determinant()));
}

// sKL between N(mu, S) and the density x -> N(Qx + v; mu, S), derived by
// change of variables without the closed-form transform helper.
double skl_transform_oracle(const GaussianModel& g, const Matrix& q, const Vector& v) {
    const Vector m1 = q.transpose() * (g.mean() - v);
    const Matrix s1 = q.transpose() * g.covariance() * q;
    return kl_oracle(g.mean(), g.covariance(), m1, s1) + kl_oracle(m1, s1, g.mean(), g.covariance());
}

}  // namespace

TEST(SklGaussianTransform, IdentityIsZero) {
    Rng rng(1);
    const auto g = random_gaussian(5, rng);
    EXPECT_EQ(skl_gaussian_transform(g, Matrix::Identity(5, 5), Vector::Zero(5)).value, 0.0);
}

TEST(SklGaussianTransform, UnitShiftOfStandardNormal) {
    const auto e = skl_gaussian_transform(GaussianModel::standard(1), Matrix::Identity(1, 1), Vector::Ones(1));
    EXPECT_NEAR(e.value, 1.0, 1e-15);
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_EQ(e.n_samples, 0u);
}

TEST(SklGaussianTransform, MatchesChangeOfVariablesOracle) {
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index d = 1 + t % 12;
        const auto g = random_gaussian(d, rng);
        const Matrix q = random_orthogonal(d, rng);
        const Vector v = 0.5 * rng.normal_vector(d);
        const double oracle = skl_transform_oracle(g, q, v);
        EXPECT_NEAR(skl_gaussian_transform(g, q, v).value, oracle, 1e-9 * std::max(1.0, oracle));
    }
}

TEST(SklGaussianTransform, AgreesWithGenericGaussianForm) {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto g = random_gaussian(6, rng);
        const Matrix q = random_orthogonal(6, rng);
        const Vector v = rng.normal_vector(6);
        const double a = skl_gaussian_transform(g, q, v).value;
        const double b = skl_gaussian(g, transform_gaussian(g, q, v)).value;
        EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, a));
    }
}

TEST(SklGaussianTransform, NinetyDegreeRotationMatchesMonteCarlo) {
    const Matrix s = (Vector(2) << 2.0, 0.5).finished().asDiagonal();
    const GaussianModel g(Vector::Zero(2), s);
    const Matrix q = rotation_2d(std::numbers::pi / 2.0);
    const auto exact = skl_gaussian_transform(g, q, Vector::Zero(2));
    Rng rng(4);
    const auto mc = skl_monte_carlo(g, transform_gaussian(g, q, Vector::Zero(2)), kDefaultMcSamples, rng);
    EXPECT_LT(std::abs(exact.value - mc.value), 3.0 * mc.std_error);
}

TEST(SklGaussianTransform, NonNegativeOnRandomDraws) {
    Rng rng(5);
    for (int t = 0; t < 1000; ++t) {
        const Eigen::Index d = 1 + t % 8;
        const auto g = random_gaussian(d, rng);
        const auto e = skl_gaussian_transform(g, random_orthogonal(d, rng), 0.1 * rng.normal_vector(d));
        EXPECT_GE(e.unclipped, -1e-9);
        EXPECT_GE(e.value, 0.0);
    }
}

TEST(SklGaussianTransform, RejectsNonOrthogonal) {
    Matrix q = Matrix::Identity(3, 3);
    q(0, 1) = 1e-6;
    EXPECT_THROW(skl_gaussian_transform(GaussianModel::standard(3), q, Vector::Zero(3)), NumericError);
    EXPECT_THROW(skl_gaussian_transform(GaussianModel::standard(3), Matrix::Identity(3, 3), Vector::Zero(2)),
                 DimensionError);
}

TEST(SklMonteCarlo, IdenticalModelsGiveExactZero) {
    Rng rng(6);
    const DensityModel p = random_gaussian(3, rng);
    const auto e = skl_monte_carlo(p, p, 2000, rng);
    EXPECT_EQ(e.value, 0.0);
    EXPECT_EQ(e.std_error, 0.0);
}

TEST(SklMonteCarlo, UnitShift) {
    Rng rng(7);
    const GaussianModel p = GaussianModel::standard(1);
    const GaussianModel q(Vector::Ones(1), Matrix::Identity(1, 1));
    const auto e = skl_monte_carlo(p, q, kDefaultMcSamples, rng);
    EXPECT_LT(std::abs(e.value - 1.0), 3.0 * e.std_error);
    EXPECT_EQ(e.n_samples, kDefaultMcSamples);
}

TEST(SklMonteCarlo, AgreesWithClosedFormOnRandomTransforms) {
    Rng rng(8);
    for (int t = 0; t < 10; ++t) {
        const Eigen::Index d = 1 + 3 * t;
        const auto g = random_gaussian(d, rng);
        const Matrix q = random_orthogonal(d, rng);
        const Vector v = 0.3 * rng.normal_vector(d);
        const auto exact = skl_gaussian_transform(g, q, v);
        const auto mc = skl_monte_carlo(g, transform_gaussian(g, q, v), 20000, rng);
        EXPECT_LT(std::abs(exact.value - mc.unclipped), 3.0 * mc.std_error) << "d=" << d;
    }
}

TEST(SklMonteCarlo, Symmetry) {
    Rng rng(9);
    Vector w(2);
    w << 0.3, 0.7;
    const DensityModel p = random_mixture(3, w, rng);
    const DensityModel q = random_mixture(3, w, rng);
    const auto a = skl_monte_carlo(p, q, 20000, rng);
    const auto b = skl_monte_carlo(q, p, 20000, rng);
    EXPECT_LT(std::abs(a.value - b.value), 3.0 * std::hypot(a.std_error, b.std_error));
}

TEST(SklMonteCarlo, Preconditions) {
    Rng rng(10);
    EXPECT_THROW(skl_monte_carlo(GaussianModel::standard(1), GaussianModel::standard(1), 999, rng), DataError);
    EXPECT_THROW(skl_monte_carlo(GaussianModel::standard(1), GaussianModel::standard(2), 1000, rng), DimensionError);
}

TEST(SklMonteCarlo, NonFiniteRatioIsReported) {
    Rng rng(11);
    const GaussianModel p = GaussianModel::standard(1);
    const GaussianModel q(Vector::Constant(1, 1e200), Matrix::Identity(1, 1));
    EXPECT_THROW(skl_monte_carlo(p, q, 1000, rng), NumericError);
}

TEST(TransformModel, IdentityLeavesModelUnchanged) {
    Rng rng(12);
    const auto g = random_gaussian(4, rng);
    const auto t = std::get<GaussianModel>(transform_model(g, Matrix::Identity(4, 4), Vector::Zero(4)));
    EXPECT_EQ(t.mean(), g.mean());
    EXPECT_EQ(t.covariance(), g.covariance());
}

TEST(TransformModel, UnitShiftMovesMeanToMinusOne) {
    const auto t = std::get<GaussianModel>(
        transform_model(GaussianModel::standard(1), Matrix::Identity(1, 1), Vector::Ones(1)));
    EXPECT_DOUBLE_EQ(t.mean()(0), -1.0);
    EXPECT_DOUBLE_EQ(t.covariance()(0, 0), 1.0);
}

TEST(TransformModel, MixtureTransformsComponentwise) {
    Rng rng(13);
    Vector w(2);
    w << 0.25, 0.75;
    const auto m = random_mixture(3, w, rng);
    const Matrix q = random_orthogonal(3, rng);
    const Vector v = rng.normal_vector(3);
    const auto t = std::get<GaussianMixtureModel>(transform_model(m, q, v));
    EXPECT_EQ(t.weights(), w);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto expected = transform_gaussian(m.component(i), q, v);
        EXPECT_LT((t.component(i).mean() - expected.mean()).norm(), 1e-12);
    }
}

TEST(TransformModel, DensityIdentityHolds) {
    // log phi1(x) == log phi0(Qx + v)
    Rng rng(14);
    Vector w(2);
    w << 0.5, 0.5;
    const DensityModel m = random_mixture(4, w, rng);
    const Matrix q = random_orthogonal(4, rng);
    const Vector v = rng.normal_vector(4);
    const auto t = transform_model(m, q, v);
    const Matrix x = rng.normal_matrix(10, 4);
    const Matrix mapped = (x * q.transpose()).rowwise() + v.transpose();
    EXPECT_LT((log_density(t, x) - log_density(m, mapped)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(TransformModel, TwoPathSamplingAgrees) {
    Rng rng(15);
    const auto g = random_gaussian(3, rng);
    const Matrix q = random_orthogonal(3, rng);
    const Vector v = rng.normal_vector(3);
    const auto direct = sample_gaussian(transform_gaussian(g, q, v), 100000, rng);
    const auto mapped = apply_inverse_transform(sample_gaussian(g, 100000, rng), q, v);
    const Vector m1 = direct.colwise().mean();
    const Vector m2 = mapped.colwise().mean();
    // 5 sigma on the difference of two means with variance <= 2 each
    EXPECT_LT((m1 - m2).cwiseAbs().maxCoeff(), 5.0 * std::sqrt(4.0 / 1e5));
    const Matrix c1 = (direct.rowwise() - m1.transpose()).transpose() * (direct.rowwise() - m1.transpose()) / 1e5;
    const Matrix c2 = (mapped.rowwise() - m2.transpose()).transpose() * (mapped.rowwise() - m2.transpose()) / 1e5;
    EXPECT_LT((c1 - c2).cwiseAbs().maxCoeff(), 0.05);
}

TEST(SklBound, ExceedsExpectedLoglikDrop) {
    Rng rng(16);
    for (int t = 0; t < 30; ++t) {
        const Eigen::Index d = 1 + t % 10;
        const auto g = random_gaussian(d, rng);
        const Matrix q = random_orthogonal(d, rng);
        const Vector v = 0.4 * rng.normal_vector(d);
        const double skl = skl_gaussian_transform(g, q, v).value;
        const auto [drop, se] = expected_loglik_drop(g, transform_gaussian(g, q, v), 20000, rng);
        EXPECT_LE(drop, skl + 3.0 * se);
    }
}
