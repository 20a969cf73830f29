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
#ifndef LLCD_DIVERGENCE_HPP_
#define LLCD_DIVERGENCE_HPP_

#include "llcd/core.hpp"
#include "llcd/models.hpp"

#include <string>

namespace llcd {

/// Symmetric KL (Jeffreys) divergence, exact or estimated.
struct DivergenceEstimate {
    double value = 0.0;
    double std_error = 0.0;  // 0 for closed form
    std::size_t n_samples = 0;  // 0 for closed form
    double unclipped = 0.0;  // value before clipping small negatives to 0
};

inline constexpr double kOrthogonalityTolerance = 1e-8;

inline void require_orthogonal(const Matrix& q, Eigen::Index d, const char* what) {
    require_dimension(d, q.rows(), what);
    require_dimension(d, q.cols(), what);
    const double err = max_abs_orthogonality_error(q);
    if (!(err < kOrthogonalityTolerance)) {
        throw NumericError(std::string(what) + ": matrix is not orthogonal (max |Q'Q - I| = " + std::to_string(err) +
                           ")");
    }
}

namespace detail {

inline DivergenceEstimate exact_estimate(double value) {
    DivergenceEstimate e;
    e.unclipped = value;
    e.value = value < 0.0 ? 0.0 : value;
    return e;
}

}  // namespace detail

/// Closed-form sKL(phi0, phi1) for phi0 = N(mu, S) and phi1(x) = phi0(Qx + v),
/// i.e. phi1 = N(Q'(mu - v), Q'SQ). Caches S^-1 so that many (Q, v) pairs can be
/// scored against one model.
class GaussianTransformSkl {
  public:
    explicit GaussianTransformSkl(const GaussianModel& model)
        : mean_(model.mean()), cov_(model.covariance()), precision_(model.precision()) {
        precision_ = 0.5 * (precision_ + precision_.transpose()).eval();
    }

    Eigen::Index dim() const { return mean_.size(); }

    /// sKL with v = 0: Tr(Q' P Q S) + Tr(P Q' S Q) - 2d + mean terms, halved.
    double rotation_only(const Matrix& q) const {
        const auto d = static_cast<double>(dim());
        const Matrix id = Matrix::Identity(dim(), dim());
        const double trace1 = (q.transpose() * precision_ * q).cwiseProduct(cov_).sum();
        const double trace2 = precision_.cwiseProduct(q.transpose() * cov_ * q).sum();
        const Vector a = (id - q.transpose()) * mean_;  // (I - Q') mu
        const Vector b = (id - q) * mean_;              // (I - Q) mu
        const double mean_terms = a.dot(precision_ * a) + b.dot(precision_ * b);
        return 0.5 * (trace1 + trace2 - 2.0 * d + mean_terms);
    }

    /// Coefficients of sKL(rho) = a rho^2 + b rho + c along v = rho u.
    struct Quadratic {
        double a = 0.0;
        double b = 0.0;
        double c = 0.0;
        double operator()(double rho) const { return (a * rho + b) * rho + c; }
    };

    Quadratic along(const Matrix& q, const Vector& u) const {
        const Matrix id = Matrix::Identity(dim(), dim());
        const Vector qtu = q.transpose() * u;
        Quadratic out;
        out.a = 0.5 * (u.dot(precision_ * u) + qtu.dot(precision_ * qtu));
        // v' P (Q - I) mu + v' Q P (I - Q') mu
        out.b = u.dot(precision_ * ((q - id) * mean_)) + qtu.dot(precision_ * ((id - q.transpose()) * mean_));
        out.c = rotation_only(q);
        return out;
    }

    double operator()(const Matrix& q, const Vector& v) const {
        const double norm = v.norm();
        if (norm == 0.0) {
            return rotation_only(q);
        }
        return along(q, v / norm)(norm);
    }

  private:
    Vector mean_;
    Matrix cov_;
    Matrix precision_;
};

/// Exact sKL between N(mu, S) and its transform phi0(Qx + v).
inline DivergenceEstimate skl_gaussian_transform(const GaussianModel& model, const Matrix& q, const Vector& v) {
    require_orthogonal(q, model.dim(), "skl_gaussian_transform");
    require_dimension(model.dim(), v.size(), "skl_gaussian_transform translation");
    return detail::exact_estimate(GaussianTransformSkl(model)(q, v));
}

/// Exact sKL between two arbitrary Gaussians of equal dimension.
inline DivergenceEstimate skl_gaussian(const GaussianModel& p, const GaussianModel& q) {
    require_dimension(p.dim(), q.dim(), "skl_gaussian");
    const auto d = static_cast<double>(p.dim());
    const Matrix pp = p.precision();
    const Matrix pq = q.precision();
    const Vector diff = p.mean() - q.mean();
    const double value = 0.5 * (pq.cwiseProduct(p.covariance()).sum() + pp.cwiseProduct(q.covariance()).sum() -
                                2.0 * d + diff.dot((pp + pq) * diff));
    return detail::exact_estimate(value);
}

inline GaussianModel transform_gaussian(const GaussianModel& model, const Matrix& q, const Vector& v) {
    return {q.transpose() * (model.mean() - v), q.transpose() * model.covariance() * q};
}

/// Model of phi1(x) = phi0(Qx + v). Mixtures transform component-wise, weights unchanged.
inline DensityModel transform_model(const DensityModel& model, const Matrix& q, const Vector& v) {
    const Eigen::Index d = dimension(model);
    require_orthogonal(q, d, "transform_model");
    require_dimension(d, v.size(), "transform_model translation");
    return std::visit(
        [&](const auto& m) -> DensityModel {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianModel>) {
                return transform_gaussian(m, q, v);
            } else {
                std::vector<GaussianModel> comps;
                comps.reserve(m.size());
                for (const auto& c : m.components()) {
                    comps.push_back(transform_gaussian(c, q, v));
                }
                return GaussianMixtureModel(m.weights(), std::move(comps));
            }
        },
        model);
}

/// Maps phi0 samples (rows) to phi1 samples: x -> Q'(x - v).
inline Matrix apply_inverse_transform(const Matrix& x, const Matrix& q, const Vector& v) {
    return (x.rowwise() - v.transpose()) * q;
}

inline constexpr std::size_t kDefaultMcSamples = 100000;

/// Monte-Carlo sKL: E_p[log p - log q] + E_q[log q - log p] from n draws of each.
inline DivergenceEstimate skl_monte_carlo(const DensityModel& p, const DensityModel& q, std::size_t n, Rng& rng) {
    require_dimension(dimension(p), dimension(q), "skl_monte_carlo");
    if (n < 1000) {
        throw DataError("skl_monte_carlo: needs at least 1000 samples (got " + std::to_string(n) + ")");
    }
    const auto rows = static_cast<Eigen::Index>(n);
    const Matrix xp = sample(p, rows, rng).values();
    const Matrix xq = sample(q, rows, rng).values();
    const Vector r1 = log_density(p, xp) - log_density(q, xp);
    const Vector r2 = log_density(q, xq) - log_density(p, xq);
    const auto bad = (!r1.array().isFinite()).count() + (!r2.array().isFinite()).count();
    if (bad > 0) {
        throw NumericError("skl_monte_carlo: non-finite log-density ratio at " + std::to_string(bad) + " points");
    }
    const auto m1 = mean_variance(r1);
    const auto m2 = mean_variance(r2);
    DivergenceEstimate e;
    e.unclipped = m1.mean + m2.mean;
    e.value = e.unclipped < 0.0 ? 0.0 : e.unclipped;
    e.std_error = std::sqrt(m1.variance / static_cast<double>(n) + m2.variance / static_cast<double>(n));
    e.n_samples = n;
    return e;
}

/// Monte-Carlo estimate of E_p[l] - E_q[l] with l = log p, plus its standard error.
inline std::pair<double, double> expected_loglik_drop(const DensityModel& p, const DensityModel& q, std::size_t n,
                                                      Rng& rng) {
    const auto rows = static_cast<Eigen::Index>(n);
    const Vector lp = log_density(p, sample(p, rows, rng).values());
    const Vector lq = log_density(p, sample(q, rows, rng).values());
    const auto a = mean_variance(lp);
    const auto b = mean_variance(lq);
    return {a.mean - b.mean, std::sqrt(a.variance / static_cast<double>(n) + b.variance / static_cast<double>(n))};
}

}  // namespace llcd

#endif  // LLCD_DIVERGENCE_HPP_
