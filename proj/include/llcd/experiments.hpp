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
#ifndef LLCD_EXPERIMENTS_HPP_
#define LLCD_EXPERIMENTS_HPP_

// Power-vs-dimension and variance-vs-dimension experiments.
//
// Every repetition owns a seed taken from the tree base_seed -> d -> repetition,
// and writes only to its own result slot, so outputs are bit-identical for any
// worker count.

#include "llcd/changegen.hpp"
#include "llcd/core.hpp"
#include "llcd/divergence.hpp"
#include "llcd/em.hpp"
#include "llcd/models.hpp"
#include "llcd/parallel.hpp"
#include "llcd/window_tests.hpp"

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace llcd {

/// Where the reference log-likelihood comes from.
struct TrainingPolicy {
    enum class Kind { known, per_dim, fixed };
    Kind kind = Kind::known;
    /// factor c for per_dim (c * d samples) or the sample count for fixed
    double value = 0.0;

    static TrainingPolicy known() { return {Kind::known, 0.0}; }
    static TrainingPolicy per_dim(double c) { return {Kind::per_dim, c}; }
    static TrainingPolicy fixed(double n) { return {Kind::fixed, n}; }

    std::size_t samples(Eigen::Index d) const {
        switch (kind) {
            case Kind::per_dim:
                return static_cast<std::size_t>(std::llround(value * static_cast<double>(d)));
            case Kind::fixed:
                return static_cast<std::size_t>(std::llround(value));
            case Kind::known:
                break;
        }
        return 0;
    }

    std::string label() const {
        auto num = [](double x) {
            const auto r = std::llround(x);
            return static_cast<double>(r) == x ? std::to_string(r) : std::to_string(x);
        };
        switch (kind) {
            case Kind::per_dim:
                return "per-dim:" + num(value);
            case Kind::fixed:
                return "fixed:" + num(value);
            case Kind::known:
                break;
        }
        return "known";
    }

    std::uint64_t seed_tag() const { return 1000003ULL * (static_cast<std::uint64_t>(kind) + 1) + std::llround(value); }

    bool operator==(const TrainingPolicy&) const = default;
};

inline TrainingPolicy parse_training_policy(const std::string& s) {
    if (s == "known") return TrainingPolicy::known();
    auto number = [&](std::size_t pos) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s.substr(pos), &used);
            if (used != s.size() - pos || !(v > 0.0)) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("bad training policy '" + s + "'");
        }
    };
    if (s.rfind("per-dim:", 0) == 0) return TrainingPolicy::per_dim(number(8));
    if (s.rfind("fixed:", 0) == 0) return TrainingPolicy::fixed(number(6));
    throw std::invalid_argument("bad training policy '" + s + "' (expected known, per-dim:<c> or fixed:<n>)");
}

/// upper is the scaled dominant-component form, upper_conventional the plain one.
enum class LikelihoodVariant { exact, upper, lower, upper_conventional };

inline const char* to_string(LikelihoodVariant v) {
    switch (v) {
        case LikelihoodVariant::upper:
            return "upper";
        case LikelihoodVariant::lower:
            return "lower";
        case LikelihoodVariant::upper_conventional:
            return "upper-conventional";
        case LikelihoodVariant::exact:
            break;
    }
    return "exact";
}

inline LikelihoodVariant parse_likelihood_variant(const std::string& s) {
    if (s == "exact") return LikelihoodVariant::exact;
    if (s == "upper") return LikelihoodVariant::upper;
    if (s == "lower") return LikelihoodVariant::lower;
    if (s == "upper-conventional") return LikelihoodVariant::upper_conventional;
    throw std::invalid_argument("bad likelihood variant '" + s +
                                "' (expected exact, upper, lower or upper-conventional)");
}

/// Log-likelihood of each row under the chosen mixture approximation.
inline Vector mixture_loglik(const GaussianMixtureModel& model, const DataMatrix& x, LikelihoodVariant v) {
    switch (v) {
        case LikelihoodVariant::upper:
            return mixture_loglik_upper(model, x);
        case LikelihoodVariant::lower:
            return mixture_loglik_lower(model, x);
        case LikelihoodVariant::upper_conventional:
            return mixture_loglik_upper(model, x, UpperBoundForm::conventional);
        case LikelihoodVariant::exact:
            break;
    }
    return mixture_log_density(model, x);
}

struct ExperimentConfig {
    std::vector<Eigen::Index> dims;
    std::size_t runs = 1000;
    std::size_t window = 500;
    double alpha = 0.05;
    double target_skl = 1.0;
    std::vector<TrainingPolicy> training;
    std::size_t mc_samples = kDefaultMcSamples;
    std::uint64_t base_seed = 0;
    std::vector<LikelihoodVariant> variants;
    /// mixture components; 0 selects k by cross-validation where applicable
    std::size_t mixture_k = 0;
    std::vector<std::size_t> k_candidates = {1, 2, 3, 4, 5, 6};
    std::size_t folds = 5;
    unsigned workers = 0;

    void validate() const {
        if (runs < 1) throw std::invalid_argument("runs must be at least 1");
        if (window < 2) throw std::invalid_argument("window must be at least 2");
        if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
        if (!(target_skl > 0.0)) throw std::invalid_argument("target_skl must be positive");
        if (dims.empty()) throw std::invalid_argument("dims must not be empty");
        for (auto d : dims) {
            if (d < 1) throw std::invalid_argument("dims must be positive");
        }
        if (mc_samples < 1000) throw std::invalid_argument("mc_samples must be at least 1000");
    }
};

inline ExperimentConfig gaussian_power_defaults() {
    ExperimentConfig c;
    c.dims = {1, 2, 4, 8, 16, 32, 64, 128};
    c.runs = 1000;
    c.training = {TrainingPolicy::known(), TrainingPolicy::per_dim(100), TrainingPolicy::fixed(100)};
    c.variants = {LikelihoodVariant::exact};
    return c;
}

inline ExperimentConfig gmm_variance_defaults() {
    ExperimentConfig c;
    c.dims = {1, 2, 4, 8, 16, 32, 64, 128};
    c.runs = 200;
    c.training = {TrainingPolicy::known(), TrainingPolicy::per_dim(200)};
    c.variants = {LikelihoodVariant::upper, LikelihoodVariant::lower};
    c.mixture_k = 2;
    return c;
}

inline ExperimentConfig realdata_power_defaults() {
    ExperimentConfig c;
    c.runs = 500;
    c.training = {TrainingPolicy::per_dim(200)};
    c.variants = {LikelihoodVariant::upper, LikelihoodVariant::lower};
    c.mixture_k = 0;
    return c;
}

struct PowerEntry {
    Eigen::Index d = 0;
    std::string test;
    std::string variant;
    double power = 0.0;
    double std_error = 0.0;
    std::size_t runs = 0;
};

/// Calibration record of one repetition.
struct RunAudit {
    Eigen::Index d = 0;
    std::size_t run = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    bool reseeded = false;
    double achieved_skl = 0.0;
    double achieved_std_error = 0.0;
    std::size_t rotation_index = 0;
    std::string error;
};

struct PowerCurve {
    std::vector<PowerEntry> entries;
    std::vector<RunAudit> audit;

    const PowerEntry* find(Eigen::Index d, const std::string& test, const std::string& variant) const {
        for (const auto& e : entries) {
            if (e.d == d && e.test == test && e.variant == variant) return &e;
        }
        return nullptr;
    }

    std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(audit.begin(), audit.end(), [](const auto& a) { return !a.ok; }));
    }
};

struct VarianceEntry {
    Eigen::Index d = 0;
    std::string variant;
    double mean_sample_variance = 0.0;
    double std_error = 0.0;
    std::size_t streams = 0;
};

struct VarianceCurve {
    std::vector<VarianceEntry> entries;
    std::size_t failures = 0;

    const VarianceEntry* find(Eigen::Index d, const std::string& variant) const {
        for (const auto& e : entries) {
            if (e.d == d && e.variant == variant) return &e;
        }
        return nullptr;
    }
};

inline double binomial_std_error(double p, std::size_t runs) {
    return runs == 0 ? 0.0 : std::sqrt(p * (1.0 - p) / static_cast<double>(runs));
}

inline const char* const kTestNames[] = {"t-test", "lepage"};

namespace detail {

// Rejections of one repetition: [variant][test].
struct RunOutcome {
    bool ok = false;
    std::vector<std::array<bool, 2>> rejected;
    RunAudit audit;
};

inline std::array<bool, 2> run_tests(const Vector& loglik, std::size_t window, double alpha) {
    const WindowPair w = WindowPair::split(loglik, window);
    return {welch_t_one_sided(w, alpha).rejected, lepage_test(w, alpha).rejected};
}

// Runs `body(seed, audit)` once and, on a numerical or data failure, once more
// with a derived seed.
template <typename Body>
RunOutcome with_reseed(Eigen::Index d, std::size_t run, std::uint64_t seed, Body&& body) {
    RunOutcome out;
    out.audit.d = d;
    out.audit.run = run;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::uint64_t s = attempt == 0 ? seed : derive_seed(seed, 0xfeedULL);
        out.audit.seed = s;
        out.audit.reseeded = attempt > 0;
        try {
            out.rejected = body(s, out.audit);
            out.ok = true;
            out.audit.ok = true;
            out.audit.error.clear();
            return out;
        } catch (const NumericError& e) {
            out.audit.error = e.what();
        } catch (const DataError& e) {
            out.audit.error = e.what();
        }
    }
    return out;
}

inline PowerCurve aggregate(const ExperimentConfig& cfg, const std::vector<std::string>& variant_labels,
                            const std::vector<RunOutcome>& outcomes) {
    PowerCurve curve;
    for (std::size_t di = 0; di < cfg.dims.size(); ++di) {
        const Eigen::Index d = cfg.dims[di];
        for (std::size_t t = 0; t < 2; ++t) {
            for (std::size_t v = 0; v < variant_labels.size(); ++v) {
                std::size_t ok = 0;
                std::size_t hits = 0;
                for (std::size_t r = 0; r < cfg.runs; ++r) {
                    const auto& o = outcomes[di * cfg.runs + r];
                    if (!o.ok) continue;
                    ++ok;
                    hits += o.rejected[v][t] ? 1 : 0;
                }
                PowerEntry e;
                e.d = d;
                e.test = kTestNames[t];
                e.variant = variant_labels[v];
                e.runs = ok;
                e.power = ok > 0 ? static_cast<double>(hits) / static_cast<double>(ok) : 0.0;
                e.std_error = binomial_std_error(e.power, ok);
                curve.entries.push_back(std::move(e));
            }
        }
    }
    for (const auto& o : outcomes) curve.audit.push_back(o.audit);
    return curve;
}

// Sample estimator when it is defined, Ledoit-Wolf shrinkage when n <= d.
inline GaussianModel fit_reference(const DataMatrix& training) {
    if (training.rows() > training.cols()) {
        try {
            return fit_gaussian(training);
        } catch (const NumericError&) {
        }
    }
    return fit_gaussian_shrunk(training);
}

}  // namespace detail

/// Random Gaussian phi0, calibrated change, window tests on known or fitted l.
inline PowerCurve gaussian_power_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.training.empty()) throw std::invalid_argument("gaussian_power_experiment: no training policy");
    std::vector<std::string> labels;
    for (const auto& p : cfg.training) labels.push_back(p.label());

    ChangeGenOptions change_opts;
    change_opts.mc_samples = cfg.mc_samples;
    const auto w = static_cast<Eigen::Index>(cfg.window);
    std::vector<detail::RunOutcome> outcomes(cfg.dims.size() * cfg.runs);
    parallel_for(outcomes.size(), cfg.workers, [&](std::size_t idx) {
        const std::size_t di = idx / cfg.runs;
        const std::size_t r = idx % cfg.runs;
        const Eigen::Index d = cfg.dims[di];
        outcomes[idx] = detail::with_reseed(d, r, derive_seed(cfg.base_seed, d, r), [&](std::uint64_t seed, RunAudit& audit) {
            Rng rng(seed);
            const GaussianModel model = random_gaussian(d, rng);
            const ChangeSpec change = generate_change(model, cfg.target_skl, rng, change_opts);
            audit.achieved_skl = change.achieved_skl.value;
            audit.achieved_std_error = change.achieved_skl.std_error;
            audit.rotation_index = change.rotation_index;
            const GaussianModel post = transform_gaussian(model, change.q, change.v);
            Matrix stream(2 * w, d);
            stream.topRows(w) = sample_gaussian(model, w, rng);
            stream.bottomRows(w) = sample_gaussian(post, w, rng);
            const DataMatrix data(std::move(stream));

            std::vector<std::array<bool, 2>> rejected;
            for (const auto& policy : cfg.training) {
                Vector ll;
                if (policy.kind == TrainingPolicy::Kind::known) {
                    ll = gaussian_log_likelihood(model, data);
                } else {
                    Rng train_rng(derive_seed(seed, policy.seed_tag()));
                    const auto n = static_cast<Eigen::Index>(std::max<std::size_t>(2, policy.samples(d)));
                    const DataMatrix training(sample_gaussian(model, n, train_rng));
                    ll = gaussian_log_likelihood(detail::fit_reference(training), data);
                }
                rejected.push_back(detail::run_tests(ll, cfg.window, cfg.alpha));
            }
            return rejected;
        });
    });
    return detail::aggregate(cfg, labels, outcomes);
}

/// Average per-stream sample variance of mixture log-likelihood approximations.
inline VarianceCurve gmm_variance_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t k = cfg.mixture_k == 0 ? 2 : cfg.mixture_k;
    const Vector weights = Vector::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
    std::vector<TrainingPolicy> policies = cfg.training.empty() ? std::vector{TrainingPolicy::known()} : cfg.training;
    std::vector<LikelihoodVariant> variants =
        cfg.variants.empty() ? std::vector{LikelihoodVariant::upper, LikelihoodVariant::lower} : cfg.variants;
    std::vector<std::string> labels;
    for (const auto& p : policies) {
        for (auto v : variants) {
            labels.push_back(std::string(to_string(v)) + (p.kind == TrainingPolicy::Kind::known ? "" : "@" + p.label()));
        }
    }

    struct StreamResult {
        bool ok = false;
        std::vector<double> variances;
    };
    const auto w = static_cast<Eigen::Index>(cfg.window);
    std::vector<StreamResult> results(cfg.dims.size() * cfg.runs);
    parallel_for(results.size(), cfg.workers, [&](std::size_t idx) {
        const std::size_t di = idx / cfg.runs;
        const std::size_t s = idx % cfg.runs;
        const Eigen::Index d = cfg.dims[di];
        const std::uint64_t seed = derive_seed(cfg.base_seed, d, s);
        Rng rng(seed);
        const GaussianMixtureModel model = random_mixture(d, weights, rng);
        const DataMatrix stream(sample_mixture(model, w, rng));
        StreamResult res;
        try {
            for (const auto& policy : policies) {
                std::optional<GaussianMixtureModel> fitted;
                if (policy.kind != TrainingPolicy::Kind::known) {
                    Rng train_rng(derive_seed(seed, policy.seed_tag()));
                    const auto n = static_cast<Eigen::Index>(policy.samples(d));
                    const DataMatrix training(sample_mixture(model, n, train_rng));
                    fitted = fit_gmm_em(training, k, train_rng).model;
                }
                const GaussianMixtureModel& ref = fitted ? *fitted : model;
                for (auto v : variants) {
                    res.variances.push_back(mean_variance(mixture_loglik(ref, stream, v)).variance);
                }
            }
            res.ok = true;
        } catch (const NumericError&) {
        } catch (const DataError&) {
        }
        results[idx] = std::move(res);
    });

    VarianceCurve curve;
    for (std::size_t di = 0; di < cfg.dims.size(); ++di) {
        for (std::size_t v = 0; v < labels.size(); ++v) {
            std::vector<double> vals;
            for (std::size_t s = 0; s < cfg.runs; ++s) {
                const auto& r = results[di * cfg.runs + s];
                if (r.ok) vals.push_back(r.variances[v]);
            }
            const auto mv = mean_variance(vals);
            VarianceEntry e;
            e.d = cfg.dims[di];
            e.variant = labels[v];
            e.streams = vals.size();
            e.mean_sample_variance = mv.mean;
            e.std_error = vals.empty() ? 0.0 : std::sqrt(mv.variance / static_cast<double>(vals.size()));
            curve.entries.push_back(std::move(e));
        }
    }
    for (const auto& r : results) curve.failures += r.ok ? 0 : 1;
    return curve;
}

namespace detail {

// Reference mixtures fitted on column subsets of the full dataset. The fit
// depends only on the subset (its seed is derived from it), so memoizing does
// not change results.
class ReferenceCache {
  public:
    ReferenceCache(const DataMatrix& data, std::size_t k, std::uint64_t seed) : data_(data), k_(k), seed_(seed) {}

    std::shared_ptr<const GaussianMixtureModel> get(const std::vector<std::size_t>& cols) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache_.find(cols); it != cache_.end()) return it->second;
        }
        std::uint64_t s = seed_;
        for (auto c : cols) s = derive_seed(s, c);
        Rng rng(s);
        auto fit = std::make_shared<const GaussianMixtureModel>(fit_gmm_em(data_.select_cols(cols), k_, rng).model);
        std::lock_guard lock(mutex_);
        return cache_.emplace(cols, std::move(fit)).first->second;
    }

  private:
    const DataMatrix& data_;
    std::size_t k_;
    std::uint64_t seed_;
    std::mutex mutex_;
    std::map<std::vector<std::size_t>, std::shared_ptr<const GaussianMixtureModel>> cache_;
};

}  // namespace detail

struct RealDataResult {
    PowerCurve curve;
    std::size_t k = 0;
    KSelection selection;
};

/// Power on a real dataset: random column subsets, rows drawn without
/// replacement, change calibrated on a mixture fitted to the whole subset.
inline RealDataResult realdata_power_experiment(const DataMatrix& data, const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    const Eigen::Index full_dim = data.cols();
    if (cfg.dims.empty()) {
        for (Eigen::Index d = 1; d <= full_dim; ++d) cfg.dims.push_back(d);
    }
    cfg.validate();
    const TrainingPolicy policy = cfg.training.empty() ? TrainingPolicy::per_dim(200) : cfg.training.front();
    if (policy.kind == TrainingPolicy::Kind::known) {
        throw std::invalid_argument("realdata_power_experiment: the reference density must be fitted");
    }
    const std::vector<LikelihoodVariant> variants =
        cfg.variants.empty() ? std::vector{LikelihoodVariant::upper, LikelihoodVariant::lower} : cfg.variants;
    for (auto d : cfg.dims) {
        if (d > full_dim) {
            throw DataError("realdata_power_experiment: requested d=" + std::to_string(d) + " exceeds dataset dimension " +
                            std::to_string(full_dim));
        }
        const auto need = policy.samples(d) + 2 * cfg.window;
        if (static_cast<std::size_t>(data.rows()) < need) {
            throw DataError("realdata_power_experiment: need " + std::to_string(need) + " rows for d=" +
                            std::to_string(d) + ", dataset has " + std::to_string(data.rows()));
        }
    }

    RealDataResult out;
    if (cfg.mixture_k > 0) {
        out.k = cfg.mixture_k;
    } else {
        Rng cv_rng(derive_seed(cfg.base_seed, 0x6b5eULL));
        out.selection = select_k_cv(data, cfg.k_candidates, cfg.folds, cv_rng);
        out.k = out.selection.k;
    }
    detail::ReferenceCache references(data, out.k, derive_seed(cfg.base_seed, 0x4efULL));

    ChangeGenOptions change_opts;
    change_opts.mc_samples = cfg.mc_samples;
    std::vector<std::string> labels;
    for (auto v : variants) labels.emplace_back(to_string(v));
    const auto n_rows = static_cast<std::size_t>(data.rows());
    std::vector<detail::RunOutcome> outcomes(cfg.dims.size() * cfg.runs);
    parallel_for(outcomes.size(), cfg.workers, [&](std::size_t idx) {
        const std::size_t di = idx / cfg.runs;
        const std::size_t r = idx % cfg.runs;
        const Eigen::Index d = cfg.dims[di];
        outcomes[idx] = detail::with_reseed(d, r, derive_seed(cfg.base_seed, d, r), [&](std::uint64_t seed, RunAudit& audit) {
            Rng rng(seed);
            std::vector<std::size_t> cols(static_cast<std::size_t>(full_dim));
            std::iota(cols.begin(), cols.end(), 0);
            for (std::size_t i = 0; i < static_cast<std::size_t>(d); ++i) {
                std::swap(cols[i], cols[i + rng.index(cols.size() - i)]);
            }
            cols.resize(static_cast<std::size_t>(d));
            std::sort(cols.begin(), cols.end());

            const auto reference = references.get(cols);
            const ChangeSpec change = generate_change(DensityModel(*reference), cfg.target_skl, rng, change_opts);
            audit.achieved_skl = change.achieved_skl.value;
            audit.achieved_std_error = change.achieved_skl.std_error;
            audit.rotation_index = change.rotation_index;

            const std::size_t n_train = policy.samples(d);
            const std::size_t n_draw = n_train + 2 * cfg.window;
            std::vector<std::size_t> rows(n_rows);
            std::iota(rows.begin(), rows.end(), 0);
            for (std::size_t i = 0; i < n_draw; ++i) {
                std::swap(rows[i], rows[i + rng.index(n_rows - i)]);
            }
            const std::vector<std::size_t> train_rows(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
            const std::vector<std::size_t> stream_rows(rows.begin() + static_cast<std::ptrdiff_t>(n_train),
                                                       rows.begin() + static_cast<std::ptrdiff_t>(n_draw));
            const DataMatrix training = data.select_rows(train_rows).select_cols(cols);
            Matrix stream = data.select_rows(stream_rows).select_cols(cols).values();
            const auto w = static_cast<Eigen::Index>(cfg.window);
            stream.bottomRows(w) = apply_inverse_transform(stream.bottomRows(w), change.q, change.v);
            const DataMatrix stream_data(std::move(stream));

            const GaussianMixtureModel fitted = fit_gmm_em(training, out.k, rng).model;
            std::vector<std::array<bool, 2>> rejected;
            for (auto v : variants) {
                rejected.push_back(detail::run_tests(mixture_loglik(fitted, stream_data, v), cfg.window, cfg.alpha));
            }
            return rejected;
        });
    });
    out.curve = detail::aggregate(cfg, labels, outcomes);
    return out;
}

/// Stand-in for a real dataset: draws from a random mixture with k components.
inline DataMatrix synthetic_surrogate(Eigen::Index d, std::size_t rows, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    const Vector weights = Vector::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
    RandomGaussianPolicy policy;
    policy.mean_scale = 3.0;
    const auto model = random_mixture(d, weights, rng, policy);
    return DataMatrix(sample_mixture(model, static_cast<Eigen::Index>(rows), rng));
}

}  // namespace llcd

#endif  // LLCD_EXPERIMENTS_HPP_
