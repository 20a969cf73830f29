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
#ifndef LLCD_CHANGEGEN_HPP_
#define LLCD_CHANGEGEN_HPP_

// Construction of changes phi1(x) = phi0(Qx + v) with a prescribed symmetric KL
// divergence. Q is the largest rotation of a halving-angle sequence whose sKL
// stays below the target; v = rho * u then closes the gap along a random
// direction u, exactly for Gaussians and by a Monte-Carlo grid search otherwise.

#include "llcd/core.hpp"
#include "llcd/divergence.hpp"
#include "llcd/models.hpp"

#include <numbers>
#include <optional>
#include <string>

namespace llcd {

enum class CalibrationMethod { closed_form, monte_carlo };

inline const char* to_string(CalibrationMethod m) {
    return m == CalibrationMethod::closed_form ? "closed_form" : "monte_carlo";
}

struct ChangeSpec {
    Matrix q;
    Vector v;
    double target_skl = 1.0;
    DivergenceEstimate achieved_skl;
    /// sKL of the rotation alone (v = 0)
    DivergenceEstimate rotation_skl;
    std::size_t rotation_index = 0;
    double rho = 0.0;
    CalibrationMethod method = CalibrationMethod::closed_form;

    Eigen::Index dim() const { return v.size(); }
};

/// Tolerance accepted for a Monte-Carlo calibrated change.
inline double mc_calibration_tolerance(const DivergenceEstimate& e) { return std::max(0.05, 3.0 * e.std_error); }

struct ChangeGenOptions {
    std::size_t mc_samples = kDefaultMcSamples;
    /// grid step as a fraction of the mean marginal standard deviation
    double grid_fraction = 0.1;
    std::size_t max_grid_steps = 1000;
    std::size_t max_rotation_index = 60;
    std::size_t bisection_steps = 10;
};

/// Planar rotations by theta_j = pi * 2^-j in a random 2-plane, identity on its
/// complement. In one dimension every element is (1).
class RotationSequence {
  public:
    RotationSequence(Eigen::Index d, Rng& rng) : d_(d) {
        if (d < 1) {
            throw DimensionError("RotationSequence: dimension must be at least 1");
        }
        if (d == 1) {
            return;
        }
        for (int attempt = 0; attempt < 100; ++attempt) {
            Vector z1 = rng.normal_vector(d);
            Vector z2 = rng.normal_vector(d);
            const double n1 = z1.norm();
            if (n1 < 1e-12) continue;
            b1_ = z1 / n1;
            z2 -= b1_.dot(z2) * b1_;
            const double n2 = z2.norm();
            if (n2 < 1e-8) continue;
            b2_ = z2 / n2;
            return;
        }
        throw NumericError("RotationSequence: could not draw a non-degenerate plane in 100 attempts");
    }

    Eigen::Index dim() const { return d_; }

    static double angle(std::size_t j) { return std::numbers::pi * std::ldexp(1.0, -static_cast<int>(j)); }

    Matrix operator[](std::size_t j) const {
        Matrix q = Matrix::Identity(d_, d_);
        if (d_ == 1) {
            return q;
        }
        const double theta = angle(j);
        q += (std::cos(theta) - 1.0) * (b1_ * b1_.transpose() + b2_ * b2_.transpose());
        q += std::sin(theta) * (b2_ * b1_.transpose() - b1_ * b2_.transpose());
        return q;
    }

    const Vector& plane_first() const { return b1_; }
    const Vector& plane_second() const { return b2_; }

  private:
    Eigen::Index d_;
    Vector b1_;
    Vector b2_;
};

inline RotationSequence rotation_sequence(Eigen::Index d, Rng& rng) { return {d, rng}; }

/// Uniform direction on the unit sphere.
inline Vector random_unit_vector(Eigen::Index d, Rng& rng) {
    if (d < 1) {
        throw DimensionError("random_unit_vector: dimension must be at least 1");
    }
    for (;;) {
        Vector z = rng.normal_vector(d);
        const double n = z.norm();
        if (n >= 1e-12) {
            return z / n;
        }
    }
}

struct RotationChoice {
    Matrix q;
    std::size_t index = 0;
    DivergenceEstimate skl;
};

namespace detail {

// sKL(phi0, phi0(Q . + v)) with common random numbers: the same seed is reused
// for every evaluation so that estimates vary smoothly in (Q, v).
class CommonRandomSkl {
  public:
    CommonRandomSkl(const DensityModel& model, std::size_t n, std::uint64_t seed)
        : model_(model), n_(n), seed_(seed) {}

    DivergenceEstimate operator()(const Matrix& q, const Vector& v) const {
        Rng g(seed_);
        return skl_monte_carlo(model_, transform_model(model_, q, v), n_, g);
    }

  private:
    const DensityModel& model_;
    std::size_t n_;
    std::uint64_t seed_;
};

inline double mean_marginal_std(const DensityModel& model) {
    return std::visit(
        [](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianModel>) {
                return m.covariance().diagonal().array().sqrt().mean();
            } else {
                return m.moments().second.diagonal().array().sqrt().mean();
            }
        },
        model);
}

}  // namespace detail

/// First rotation Q_j of the sequence with sKL(phi0, phi0(Q_j .)) < target.
inline RotationChoice select_rotation(const DensityModel& model, const RotationSequence& seq, double target, Rng& rng,
                                      const ChangeGenOptions& options = {}) {
    if (!(target > 0.0)) {
        throw NumericError("select_rotation: target must be positive");
    }
    require_dimension(dimension(model), seq.dim(), "select_rotation");
    const Vector zero = Vector::Zero(seq.dim());
    const auto* gaussian = std::get_if<GaussianModel>(&model);
    std::optional<GaussianTransformSkl> exact;
    std::optional<detail::CommonRandomSkl> mc;
    if (gaussian != nullptr) {
        exact.emplace(*gaussian);
    } else {
        mc.emplace(model, options.mc_samples, rng.next_seed());
    }
    for (std::size_t j = 0; j <= options.max_rotation_index; ++j) {
        Matrix q = seq[j];
        DivergenceEstimate e = exact ? detail::exact_estimate(exact->rotation_only(q)) : (*mc)(q, zero);
        const double value = exact ? e.unclipped : e.value;
        if (value < target) {
            return {std::move(q), j, e};
        }
    }
    throw NumericError("select_rotation: no rotation below target sKL within " +
                       std::to_string(options.max_rotation_index) + " halvings");
}

/// Positive root rho of sKL(phi0, phi0(Q . + rho u)) = target (Gaussian phi0).
inline double solve_translation_gaussian(const GaussianModel& model, const Matrix& q, const Vector& u, double target) {
    require_orthogonal(q, model.dim(), "solve_translation_gaussian");
    require_dimension(model.dim(), u.size(), "solve_translation_gaussian direction");
    const auto quad = GaussianTransformSkl(model).along(q, u);
    const double c = quad.c - target;
    if (c > 0.0) {
        throw NumericError("solve_translation_gaussian: rotation alone already exceeds the target sKL");
    }
    if (c == 0.0) {
        return std::max(0.0, -quad.b / quad.a);
    }
    const double disc = quad.b * quad.b - 4.0 * quad.a * c;
    if (!(quad.a > 0.0) || disc < 0.0) {
        throw NumericError("solve_translation_gaussian: quadratic has no positive root");
    }
    const double sq = std::sqrt(disc);
    // roots have opposite signs since a > 0 and c < 0; pick the stable formula
    return quad.b >= 0.0 ? (-2.0 * c) / (quad.b + sq) : (sq - quad.b) / (2.0 * quad.a);
}

struct TranslationSolution {
    double rho = 0.0;
    /// independent re-estimate at rho with a fresh seed
    DivergenceEstimate verification;
    std::size_t grid_index = 0;
    double grid_step = 0.0;
};

/// Grid search rho_n = n * delta with sKL estimated by Monte Carlo, then linear
/// interpolation between the bracketing grid points.
inline TranslationSolution solve_translation_mc(const DensityModel& model, const Matrix& q, const Vector& u,
                                                double target, Rng& rng, const ChangeGenOptions& options = {}) {
    const Eigen::Index d = dimension(model);
    require_orthogonal(q, d, "solve_translation_mc");
    require_dimension(d, u.size(), "solve_translation_mc direction");
    TranslationSolution out;
    if (target <= 0.0) {
        return out;
    }
    const detail::CommonRandomSkl skl(model, options.mc_samples, rng.next_seed());
    const double delta = options.grid_fraction * detail::mean_marginal_std(model);
    out.grid_step = delta;
    double lo_rho = 0.0;
    double lo_val = skl(q, Vector::Zero(d)).unclipped;
    if (lo_val >= target) {
        throw NumericError("solve_translation_mc: rotation alone already reaches the target sKL");
    }
    double hi_rho = 0.0;
    double hi_val = lo_val;
    std::size_t n = 1;
    for (; n <= options.max_grid_steps; ++n) {
        hi_rho = static_cast<double>(n) * delta;
        hi_val = skl(q, hi_rho * u).unclipped;
        if (hi_val >= target) break;
        lo_rho = hi_rho;
        lo_val = hi_val;
    }
    if (n > options.max_grid_steps) {
        throw NumericError("solve_translation_mc: target unreachable on grid (last rho=" + std::to_string(hi_rho) +
                           ", sKL=" + std::to_string(hi_val) + ")");
    }
    out.grid_index = n - 1;
    auto interpolate = [&] { return lo_rho + (target - lo_val) / (hi_val - lo_val) * (hi_rho - lo_rho); };
    auto verify = [&](double rho) {
        Rng fresh(rng.next_seed());
        return skl_monte_carlo(model, transform_model(model, q, rho * u), options.mc_samples, fresh);
    };
    out.rho = interpolate();
    out.verification = verify(out.rho);
    if (std::abs(out.verification.value - target) < mc_calibration_tolerance(out.verification)) {
        return out;
    }
    for (std::size_t i = 0; i < options.bisection_steps; ++i) {
        const double mid = 0.5 * (lo_rho + hi_rho);
        const double val = skl(q, mid * u).unclipped;
        if (val < target) {
            lo_rho = mid;
            lo_val = val;
        } else {
            hi_rho = mid;
            hi_val = val;
        }
    }
    out.rho = interpolate();
    out.verification = verify(out.rho);
    if (std::abs(out.verification.value - target) >= mc_calibration_tolerance(out.verification)) {
        throw NumericError("solve_translation_mc: calibration failed (target " + std::to_string(target) +
                           ", estimate " + std::to_string(out.verification.value) + " +/- " +
                           std::to_string(out.verification.std_error) + ")");
    }
    return out;
}

/// Builds a calibrated change with sKL(phi0, phi1) = target.
inline ChangeSpec generate_change(const DensityModel& model, double target, Rng& rng,
                                  const ChangeGenOptions& options = {}) {
    if (!(target > 0.0)) {
        throw NumericError("generate_change: target must be positive");
    }
    const Eigen::Index d = dimension(model);
    const RotationSequence seq(d, rng);
    RotationChoice rot = select_rotation(model, seq, target, rng, options);
    const Vector u = random_unit_vector(d, rng);

    ChangeSpec spec;
    spec.target_skl = target;
    spec.rotation_index = rot.index;
    spec.rotation_skl = rot.skl;
    if (const auto* g = std::get_if<GaussianModel>(&model)) {
        spec.method = CalibrationMethod::closed_form;
        spec.rho = solve_translation_gaussian(*g, rot.q, u, target);
        spec.v = spec.rho * u;
        spec.achieved_skl = detail::exact_estimate(GaussianTransformSkl(*g)(rot.q, spec.v));
        if (!(std::abs(spec.achieved_skl.unclipped - target) < 1e-9)) {
            throw NumericError("generate_change: closed-form calibration off by " +
                               std::to_string(spec.achieved_skl.unclipped - target));
        }
    } else {
        spec.method = CalibrationMethod::monte_carlo;
        const auto sol = solve_translation_mc(model, rot.q, u, target, rng, options);
        spec.rho = sol.rho;
        spec.v = spec.rho * u;
        spec.achieved_skl = sol.verification;
    }
    spec.q = std::move(rot.q);
    return spec;
}

}  // namespace llcd

#endif  // LLCD_CHANGEGEN_HPP_
