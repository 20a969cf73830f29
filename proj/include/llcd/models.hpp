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
#ifndef LLCD_MODELS_HPP_
#define LLCD_MODELS_HPP_

#include "llcd/core.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <variant>
#include <vector>

namespace llcd {

/// Multivariate normal with a cached Cholesky factor. Immutable once built.
class GaussianModel {
  public:
    GaussianModel(Vector mean, Matrix covariance) : mean_(std::move(mean)), covariance_(std::move(covariance)) {
        if (mean_.size() < 1) {
            throw DimensionError("GaussianModel: dimension must be at least 1");
        }
        require_dimension(mean_.size(), covariance_.rows(), "GaussianModel covariance rows");
        require_dimension(mean_.size(), covariance_.cols(), "GaussianModel covariance cols");
        if (!mean_.allFinite() || !covariance_.allFinite()) {
            throw NumericError("GaussianModel: non-finite parameters");
        }
        // Symmetrize away round-off from products like Q' S Q.
        covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
        llt_.compute(covariance_);
        if (llt_.info() != Eigen::Success) {
            throw NumericError("GaussianModel: covariance is not positive definite");
        }
        chol_ = llt_.matrixL();
        log_det_ = 2.0 * chol_.diagonal().array().log().sum();
    }

    /// Standard normal N(0, I_d).
    static GaussianModel standard(Eigen::Index d) { return {Vector::Zero(d), Matrix::Identity(d, d)}; }

    Eigen::Index dim() const { return mean_.size(); }
    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return covariance_; }
    const Matrix& chol() const { return chol_; }
    double log_det() const { return log_det_; }

    /// Squared Mahalanobis distance of every row of `x` (n x d) via a triangular solve.
    Vector mahalanobis_sq(const Matrix& x) const {
        require_dimension(dim(), x.cols(), "mahalanobis_sq");
        Matrix centered = (x.rowwise() - mean_.transpose()).transpose();
        llt_.matrixL().solveInPlace(centered);
        return centered.colwise().squaredNorm().transpose();
    }

    /// log N(x; mean, cov) for every row.
    Vector log_density(const Matrix& x) const {
        const double constant = -0.5 * (static_cast<double>(dim()) * kLog2Pi + log_det_);
        return (constant - 0.5 * mahalanobis_sq(x).array()).matrix();
    }

    /// Solves cov * X = B.
    Matrix solve(const Matrix& b) const { return llt_.solve(b); }

    Matrix precision() const { return llt_.solve(Matrix::Identity(dim(), dim())); }

  private:
    Vector mean_;
    Matrix covariance_;
    Eigen::LLT<Matrix> llt_;
    Matrix chol_;
    double log_det_ = 0.0;
};

/// Finite mixture of Gaussians sharing one dimension.
class GaussianMixtureModel {
  public:
    GaussianMixtureModel(Vector weights, std::vector<GaussianModel> components)
        : weights_(std::move(weights)), components_(std::move(components)) {
        if (components_.empty()) {
            throw DimensionError("GaussianMixtureModel: at least one component required");
        }
        require_dimension(static_cast<Eigen::Index>(components_.size()), weights_.size(), "mixture weights");
        for (const auto& c : components_) {
            require_dimension(components_.front().dim(), c.dim(), "mixture component");
        }
        if ((weights_.array() <= 0.0).any() || !weights_.allFinite()) {
            throw NumericError("GaussianMixtureModel: weights must be strictly positive");
        }
        if (std::abs(weights_.sum() - 1.0) > 1e-10) {
            throw NumericError("GaussianMixtureModel: weights must sum to 1");
        }
    }

    Eigen::Index dim() const { return components_.front().dim(); }
    std::size_t size() const { return components_.size(); }
    const Vector& weights() const { return weights_; }
    const std::vector<GaussianModel>& components() const { return components_; }
    const GaussianModel& component(std::size_t i) const { return components_[i]; }

    /// n x k matrix of log(w_i) + log N_i(x).
    Matrix weighted_log_densities(const Matrix& x) const {
        Matrix out(x.rows(), static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) {
            out.col(static_cast<Eigen::Index>(i)) =
                (components_[i].log_density(x).array() + std::log(weights_(static_cast<Eigen::Index>(i)))).matrix();
        }
        return out;
    }

    /// Overall mean and covariance of the mixture.
    std::pair<Vector, Matrix> moments() const {
        Vector mu = Vector::Zero(dim());
        Matrix second = Matrix::Zero(dim(), dim());
        for (std::size_t i = 0; i < size(); ++i) {
            const double w = weights_(static_cast<Eigen::Index>(i));
            const auto& c = components_[i];
            mu += w * c.mean();
            second += w * (c.covariance() + c.mean() * c.mean().transpose());
        }
        return {mu, second - mu * mu.transpose()};
    }

  private:
    Vector weights_;
    std::vector<GaussianModel> components_;
};

using DensityModel = std::variant<GaussianModel, GaussianMixtureModel>;

inline Eigen::Index dimension(const DensityModel& m) {
    return std::visit([](const auto& x) { return x.dim(); }, m);
}

/// Log-likelihood of each row under a Gaussian:
/// -1/2 log((2 pi)^d det S) - 1/2 (x - mu)' S^-1 (x - mu).
inline Vector gaussian_log_likelihood(const GaussianModel& model, const DataMatrix& data) {
    require_dimension(model.dim(), data.cols(), "gaussian_log_likelihood");
    return model.log_density(data.values());
}

/// Row-wise log-sum-exp.
inline Vector log_sum_exp_rows(const Matrix& a) {
    Vector out(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double m = a.row(i).maxCoeff();
        if (!std::isfinite(m)) {
            out(i) = m;
            continue;
        }
        out(i) = m + std::log((a.row(i).array() - m).exp().sum());
    }
    return out;
}

/// Exact mixture log-density, evaluated with log-sum-exp.
inline Vector mixture_log_density(const GaussianMixtureModel& model, const DataMatrix& data) {
    require_dimension(model.dim(), data.cols(), "mixture_log_density");
    return log_sum_exp_rows(model.weighted_log_densities(data.values()));
}

/// How the dominant-component approximation is scaled.
enum class UpperBoundForm {
    /// -(k * w_i* / 2) [log((2 pi)^d det S_i*) + maha^2], the scaled form.
    scaled,
    /// log(w_i*) + log N_i*(x), the plain largest weighted component.
    conventional,
};

/// Dominant-component log-likelihood approximation l_u.
inline Vector mixture_loglik_upper(const GaussianMixtureModel& model, const DataMatrix& data,
                                   UpperBoundForm form = UpperBoundForm::scaled) {
    require_dimension(model.dim(), data.cols(), "mixture_loglik_upper");
    const Matrix& x = data.values();
    const auto k = static_cast<double>(model.size());
    const double d = static_cast<double>(model.dim());
    Matrix maha(x.rows(), static_cast<Eigen::Index>(model.size()));
    Matrix weighted(x.rows(), static_cast<Eigen::Index>(model.size()));
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto& c = model.component(i);
        const auto col = static_cast<Eigen::Index>(i);
        maha.col(col) = c.mahalanobis_sq(x);
        weighted.col(col) =
            (std::log(model.weights()(col)) - 0.5 * (d * kLog2Pi + c.log_det()) - 0.5 * maha.col(col).array())
                .matrix();
    }
    Vector out(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Eigen::Index best = 0;
        weighted.row(r).maxCoeff(&best);
        if (form == UpperBoundForm::conventional) {
            out(r) = weighted(r, best);
        } else {
            const auto& c = model.component(static_cast<std::size_t>(best));
            out(r) = -0.5 * k * model.weights()(best) * (d * kLog2Pi + c.log_det() + maha(r, best));
        }
    }
    return out;
}

/// Jensen lower bound l_l = -1/2 sum_i w_i [log((2 pi)^d det S_i) + maha_i^2].
inline Vector mixture_loglik_lower(const GaussianMixtureModel& model, const DataMatrix& data) {
    require_dimension(model.dim(), data.cols(), "mixture_loglik_lower");
    const double d = static_cast<double>(model.dim());
    Vector out = Vector::Zero(data.rows());
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto& c = model.component(i);
        const double w = model.weights()(static_cast<Eigen::Index>(i));
        out.array() -= 0.5 * w * (d * kLog2Pi + c.log_det() + c.mahalanobis_sq(data.values()).array());
    }
    return out;
}

/// Exact log-density of either model kind.
inline Vector log_density(const DensityModel& model, const Matrix& x) {
    return std::visit(
        [&](const auto& m) -> Vector {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianModel>) {
                return m.log_density(x);
            } else {
                return log_sum_exp_rows(m.weighted_log_densities(x));
            }
        },
        model);
}

inline Matrix sample_gaussian(const GaussianModel& model, Eigen::Index n, Rng& rng) {
    Matrix z = rng.normal_matrix(model.dim(), n);
    return ((model.chol() * z).colwise() + model.mean()).transpose();
}

inline Matrix sample_mixture(const GaussianMixtureModel& model, Eigen::Index n, Rng& rng,
                             std::vector<std::size_t>* labels = nullptr) {
    std::vector<double> cdf(model.size());
    std::partial_sum(model.weights().begin(), model.weights().end(), cdf.begin());
    Matrix out(n, model.dim());
    if (labels != nullptr) {
        labels->resize(static_cast<std::size_t>(n));
    }
    for (Eigen::Index r = 0; r < n; ++r) {
        const double u = rng.uniform() * cdf.back();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const auto idx = std::min(static_cast<std::size_t>(it - cdf.begin()), model.size() - 1);
        const auto& c = model.component(idx);
        out.row(r) = (c.mean() + c.chol() * rng.normal_vector(model.dim())).transpose();
        if (labels != nullptr) {
            (*labels)[static_cast<std::size_t>(r)] = idx;
        }
    }
    return out;
}

/// Draws n observations; identical generator state gives identical rows.
inline DataMatrix sample(const DensityModel& model, Eigen::Index n, Rng& rng) {
    if (n < 1) {
        throw DataError("sample: n must be at least 1");
    }
    return std::visit(
        [&](const auto& m) -> DataMatrix {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianModel>) {
                return DataMatrix(sample_gaussian(m, n, rng));
            } else {
                return DataMatrix(sample_mixture(m, n, rng));
            }
        },
        model);
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// column signs fixed so that R has a positive diagonal.
inline Matrix random_orthogonal(Eigen::Index d, Rng& rng) {
    Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(d, d));
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) *= -1.0;
        }
    }
    return q;
}

struct RandomGaussianPolicy {
    double eigen_min = 0.5;
    double eigen_max = 2.0;
    double mean_scale = 1.0;
};

/// mean ~ N(0, scale^2 I); covariance = R diag(e) R' with e ~ U[eigen_min, eigen_max].
inline GaussianModel random_gaussian(Eigen::Index d, Rng& rng, const RandomGaussianPolicy& policy = {}) {
    Vector mean = policy.mean_scale * rng.normal_vector(d);
    const Matrix r = random_orthogonal(d, rng);
    Vector e(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        e(i) = rng.uniform(policy.eigen_min, policy.eigen_max);
    }
    Matrix cov = r * e.asDiagonal() * r.transpose();
    return {std::move(mean), std::move(cov)};
}

/// Mixture with the given weights and components drawn by random_gaussian.
inline GaussianMixtureModel random_mixture(Eigen::Index d, const Vector& weights, Rng& rng,
                                           const RandomGaussianPolicy& policy = {}) {
    std::vector<GaussianModel> comps;
    comps.reserve(static_cast<std::size_t>(weights.size()));
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        comps.push_back(random_gaussian(d, rng, policy));
    }
    return {weights, std::move(comps)};
}

namespace detail {

inline Matrix sample_covariance(const Matrix& x, const Vector& mean) {
    const Matrix centered = x.rowwise() - mean.transpose();
    return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

}  // namespace detail

/// Sample mean and unbiased covariance. A 1e-8 * (trace/d) ridge is added only
/// when the raw estimate is not positive definite.
inline GaussianModel fit_gaussian(const DataMatrix& data) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    if (n <= d) {
        throw DataError("fit_gaussian: insufficient samples (n=" + std::to_string(n) + ", d=" + std::to_string(d) +
                        ")");
    }
    Vector mean = data.values().colwise().mean().transpose();
    Matrix cov = detail::sample_covariance(data.values(), mean);
    const double trace = cov.trace();
    if (!(trace > 0.0)) {
        throw DataError("fit_gaussian: degenerate covariance (all rows identical)");
    }
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
        cov += 1e-8 * (trace / static_cast<double>(d)) * Matrix::Identity(d, d);
    }
    return {std::move(mean), std::move(cov)};
}

/// Ledoit-Wolf shrinkage toward (trace/d) I; positive definite for any n >= 2.
inline GaussianModel fit_gaussian_shrunk(const DataMatrix& data) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    if (n < 2) {
        throw DataError("fit_gaussian_shrunk: insufficient samples (n=" + std::to_string(n) + ")");
    }
    Vector mean = data.values().colwise().mean().transpose();
    const Matrix centered = data.values().rowwise() - mean.transpose();
    const Matrix s = (centered.transpose() * centered) / static_cast<double>(n);
    const double m = s.trace() / static_cast<double>(d);
    if (!(m > 0.0)) {
        throw DataError("fit_gaussian_shrunk: degenerate covariance (all rows identical)");
    }
    const Matrix target = m * Matrix::Identity(d, d);
    const double dispersion = (s - target).squaredNorm();
    // sum_i ||x_i x_i' - S||_F^2 = sum_i ||x_i||^4 - n ||S||_F^2
    const double fourth = centered.rowwise().squaredNorm().array().square().sum();
    const double spread =
        std::max(0.0, fourth - static_cast<double>(n) * s.squaredNorm()) / (static_cast<double>(n) * n);
    const double shrink = dispersion > 0.0 ? std::clamp(spread / dispersion, 0.0, 1.0) : 1.0;
    Matrix cov = shrink * target + (1.0 - shrink) * s;
    return {std::move(mean), std::move(cov)};
}

}  // namespace llcd

#endif  // LLCD_MODELS_HPP_
