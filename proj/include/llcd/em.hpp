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
#ifndef LLCD_EM_HPP_
#define LLCD_EM_HPP_

#include "llcd/core.hpp"
#include "llcd/models.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace llcd {

struct EmConfig {
    std::size_t max_iterations = 200;
    /// stop when the relative objective gain drops below this
    double tolerance = 1e-6;
    /// covariance ridge as a fraction of trace(S)/d of the global sample covariance
    double ridge = 1e-6;
    std::size_t max_restarts = 5;
};

struct GmmFit {
    GaussianMixtureModel model;
    /// penalized log-likelihood after every E-step; non-decreasing
    std::vector<double> objective_trace;
    std::size_t iterations = 0;
    std::size_t restarts = 0;
};

namespace detail {

// k-means++ seeding: the first center uniformly, then each next center with
// probability proportional to its squared distance to the closest chosen one.
inline Matrix kmeanspp_centers(const Matrix& x, std::size_t k, Rng& rng) {
    const Eigen::Index n = x.rows();
    Matrix centers(static_cast<Eigen::Index>(k), x.cols());
    centers.row(0) = x.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
    Vector dist2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (std::size_t c = 1; c < k; ++c) {
        const double total = dist2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            for (pick = 0; pick < n - 1; ++pick) {
                u -= dist2(pick);
                if (u < 0.0) break;
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
        }
        centers.row(static_cast<Eigen::Index>(c)) = x.row(pick);
        dist2 = dist2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
    }
    return centers;
}

// -1/2 sum_k tr(A Sigma_k^-1) with A = prior_scale * I
inline double ridge_penalty(const std::vector<GaussianModel>& comps, double prior_scale) {
    double p = 0.0;
    for (const auto& c : comps) {
        p -= 0.5 * prior_scale * c.precision().trace();
    }
    return p;
}

inline std::optional<GmmFit> run_em(const Matrix& x, std::size_t k, Rng& rng, const EmConfig& cfg,
                                    const Matrix& global_cov) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const auto kk = static_cast<Eigen::Index>(k);
    // The ridge is a fixed conjugate prior term A = ridge * (tr S / d) * (n / k) * I,
    // so each covariance update is (S_k + A) / N_k and the penalized objective
    // increases monotonically.
    const double prior_scale =
        cfg.ridge * (global_cov.trace() / static_cast<double>(d)) * (static_cast<double>(n) / static_cast<double>(k));

    const Matrix centers = kmeanspp_centers(x, k, rng);
    Matrix init_cov = global_cov;
    init_cov.diagonal().array() += cfg.ridge * global_cov.trace() / static_cast<double>(d);
    std::vector<GaussianModel> comps;
    comps.reserve(k);
    try {
        for (std::size_t c = 0; c < k; ++c) {
            comps.emplace_back(centers.row(static_cast<Eigen::Index>(c)).transpose(), init_cov);
        }
    } catch (const NumericError&) {
        return std::nullopt;
    }
    Vector weights = Vector::Constant(kk, 1.0 / static_cast<double>(k));

    GmmFit fit{GaussianMixtureModel(weights, comps), {}, 0, 0};
    const double min_mass = 1.0;
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        // E-step
        Matrix logr(n, kk);
        for (Eigen::Index c = 0; c < kk; ++c) {
            logr.col(c) = (comps[static_cast<std::size_t>(c)].log_density(x).array() + std::log(weights(c))).matrix();
        }
        const Vector lse = log_sum_exp_rows(logr);
        const double objective = lse.sum() + ridge_penalty(comps, prior_scale);
        fit.model = GaussianMixtureModel(weights, comps);
        fit.iterations = it;
        if (!fit.objective_trace.empty()) {
            const double prev = fit.objective_trace.back();
            fit.objective_trace.push_back(objective);
            if (objective - prev < cfg.tolerance * std::abs(prev)) {
                break;
            }
        } else {
            fit.objective_trace.push_back(objective);
        }
        const Matrix resp = (logr.colwise() - lse).array().exp().matrix();

        // M-step
        const Vector mass = resp.colwise().sum().transpose();
        if ((mass.array() < min_mass).any()) {
            return std::nullopt;
        }
        weights = mass / mass.sum();
        std::vector<GaussianModel> next;
        next.reserve(k);
        for (Eigen::Index c = 0; c < kk; ++c) {
            const Vector mu = (x.transpose() * resp.col(c)) / mass(c);
            const Matrix centered = x.rowwise() - mu.transpose();
            Matrix cov = centered.transpose() * (centered.array().colwise() * resp.col(c).array()).matrix();
            cov.diagonal().array() += prior_scale;
            cov /= mass(c);
            try {
                next.emplace_back(mu, std::move(cov));
            } catch (const NumericError&) {
                return std::nullopt;
            }
        }
        comps = std::move(next);
    }
    return fit;
}

}  // namespace detail

/// Gaussian mixture by EM with k-means++ initialization. k = 1 is the sample estimator.
inline GmmFit fit_gmm_em(const DataMatrix& data, std::size_t k, Rng& rng, const EmConfig& cfg = {}) {
    if (k < 1) {
        throw DataError("fit_gmm_em: k must be at least 1");
    }
    const auto need = static_cast<Eigen::Index>(k) * (data.cols() + 1);
    if (data.rows() < need) {
        throw DataError("fit_gmm_em: insufficient samples (n=" + std::to_string(data.rows()) + ", need " +
                        std::to_string(need) + ")");
    }
    if (k == 1) {
        GaussianModel g = fit_gaussian(data);
        GmmFit fit{GaussianMixtureModel(Vector::Ones(1), {g}), {}, 0, 0};
        fit.objective_trace.push_back(g.log_density(data.values()).sum());
        return fit;
    }
    const Matrix& x = data.values();
    const Vector mean = x.colwise().mean().transpose();
    const Matrix global_cov = detail::sample_covariance(x, mean);
    if (!(global_cov.trace() > 0.0)) {
        throw DataError("fit_gmm_em: degenerate covariance (all rows identical)");
    }
    for (std::size_t attempt = 0; attempt <= cfg.max_restarts; ++attempt) {
        if (auto fit = detail::run_em(x, k, rng, cfg, global_cov)) {
            fit->restarts = attempt;
            return std::move(*fit);
        }
    }
    throw NumericError("fit_gmm_em: component collapse persisted after " + std::to_string(cfg.max_restarts) +
                       " restarts (k=" + std::to_string(k) + ")");
}

struct KSelection {
    std::size_t k = 0;
    /// (candidate, mean held-out log-density); failed candidates are absent
    std::vector<std::pair<std::size_t, double>> scores;
};

/// Picks k by maximal mean held-out log-density over `folds` folds.
inline KSelection select_k_cv(const DataMatrix& data, const std::vector<std::size_t>& candidates, std::size_t folds,
                              Rng& rng, const EmConfig& cfg = {}) {
    if (folds < 2) {
        throw DataError("select_k_cv: folds must be at least 2");
    }
    if (candidates.empty()) {
        throw DataError("select_k_cv: no candidates");
    }
    const auto n = static_cast<std::size_t>(data.rows());
    if (n < folds) {
        throw DataError("select_k_cv: fewer rows than folds");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    const std::uint64_t base = rng.next_seed();

    const std::size_t smallest_train = n - (n + folds - 1) / folds;
    for (auto k : candidates) {
        if (smallest_train < k * static_cast<std::size_t>(data.cols() + 1)) {
            throw DataError("select_k_cv: candidate k=" + std::to_string(k) + " needs more rows than a training fold has");
        }
    }

    KSelection out;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> sorted = candidates;
    std::sort(sorted.begin(), sorted.end());
    for (auto k : sorted) {
        double total = 0.0;
        bool ok = true;
        for (std::size_t f = 0; f < folds && ok; ++f) {
            std::vector<std::size_t> train;
            std::vector<std::size_t> test;
            for (std::size_t i = 0; i < n; ++i) {
                (i % folds == f ? test : train).push_back(order[i]);
            }
            Rng fold_rng(derive_seed(base, k, f));
            try {
                const auto fit = fit_gmm_em(data.select_rows(train), k, fold_rng, cfg);
                const auto held = data.select_rows(test);
                total += mixture_log_density(fit.model, held).mean();
            } catch (const NumericError&) {
                ok = false;
            }
        }
        if (!ok) continue;
        const double score = total / static_cast<double>(folds);
        out.scores.emplace_back(k, score);
        if (score > best) {
            best = score;
            out.k = k;
        }
    }
    if (out.scores.empty()) {
        throw NumericError("select_k_cv: every candidate failed to fit");
    }
    return out;
}

}  // namespace llcd

#endif  // LLCD_EM_HPP_
