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
#include "llcd/llcd.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

using llcd::config::ConfigMap;

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

// Flags shared by the experiment subcommands; only the ones given on the
// command line end up in the map, so they override the config file.
struct ExperimentFlags {
    std::string config_path;
    std::string out;
    std::map<std::string, std::string> values;

    void add(CLI::App* app, bool realdata) {
        app->add_option("--config", config_path, "key = value config file or a run manifest");
        app->add_option("--out", out, "results CSV; the manifest is written next to it");
        const std::vector<std::pair<std::string, std::string>> flags = {
            {"dims", "dimensions, e.g. 1,2,4 or 1-11"},
            {"runs", "repetitions (streams) per dimension"},
            {"window", "points in each window"},
            {"alpha", "significance level"},
            {"target-skl", "sKL of the generated change"},
            {"seed", "base seed"},
            {"workers", "worker threads (0 = all cores)"},
            {"mc-samples", "Monte-Carlo samples per sKL estimate"},
            {"variant", "likelihood variants: exact, upper, lower, upper-conventional"},
            {"training", "reference policies: known, per-dim:<c>, fixed:<n>"},
            {"mixture-k", "mixture components (0 = cross-validated)"},
            {"k-candidates", "candidate k for cross-validation"},
            {"folds", "cross-validation folds"},
        };
        for (const auto& [name, help] : flags) {
            app->add_option("--" + name, values[name], help);
        }
        if (realdata) {
            app->add_option("--dataset", values["dataset"], "wine, miniboone, csv or surrogate");
            app->add_option("--path", values["path"], "dataset file");
        }
    }

    ConfigMap merged(CLI::App* app) {
        ConfigMap m;
        if (!config_path.empty()) m = llcd::config::load_config_file(config_path);
        for (const auto& [name, value] : values) {
            if (app->get_option("--" + name)->count() > 0) m[name] = value;
        }
        if (out.empty()) {
            if (auto it = m.find("out"); it != m.end()) out = it->second;
        }
        return m;
    }
};

std::string manifest_path(const std::string& csv) {
    const auto dot = csv.rfind('.');
    const auto slash = csv.find_last_of("/\\");
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    return (has_ext ? csv.substr(0, dot) : csv) + ".manifest.json";
}

void write_results(const std::string& out, const std::string& csv, const llcd::io::json& manifest) {
    llcd::io::write_text_file(out, csv);
    const auto mpath = manifest_path(out);
    llcd::io::write_text_file(mpath, manifest.dump(2) + "\n");
    std::cout << "wrote " << out << " and " << mpath << "\n";
}

llcd::DivergenceEstimate skl_between(const llcd::DensityModel& p, const llcd::DensityModel& q, std::size_t mc,
                                     std::uint64_t seed) {
    const auto* gp = std::get_if<llcd::GaussianModel>(&p);
    const auto* gq = std::get_if<llcd::GaussianModel>(&q);
    if (gp != nullptr && gq != nullptr) return llcd::skl_gaussian(*gp, *gq);
    llcd::Rng rng(seed);
    return llcd::skl_monte_carlo(p, q, mc, rng);
}

llcd::DensityModel load_model(const std::string& path) {
    try {
        return llcd::io::model_from_json(llcd::io::read_json_file(path));
    } catch (const llcd::DataError& e) {
        const std::string what = e.what();
        if (what.rfind(path, 0) == 0) throw;
        throw llcd::DataError(path + ": " + what);
    }
}

llcd::io::json outcome_json(const llcd::TestOutcome& t) {
    return {{"statistic", t.statistic}, {"threshold", t.threshold}, {"rejected", t.rejected}, {"alpha", t.alpha}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Log-likelihood change detection on multivariate datastreams"};
    app.set_version_flag("--version", std::string(llcd::kVersion));
    app.require_subcommand(1);

    std::string model_p;
    std::string model_q;
    std::size_t mc_samples = llcd::kDefaultMcSamples;
    std::uint64_t seed = 0;
    auto* skl = app.add_subcommand("skl", "symmetric KL divergence between two model files");
    skl->add_option("model_p", model_p, "first model (JSON)")->required();
    skl->add_option("model_q", model_q, "second model (JSON)")->required();
    skl->add_option("--mc-samples", mc_samples, "Monte-Carlo samples for mixtures");
    skl->add_option("--seed", seed, "seed for Monte-Carlo estimates");

    std::string change_model;
    std::string change_out;
    double change_target = 1.0;
    auto* change = app.add_subcommand("change-gen", "generate a change of given sKL for a model file");
    change->add_option("model", change_model, "model (JSON)")->required();
    change->add_option("--target-skl", change_target, "sKL of the change");
    change->add_option("--seed", seed, "seed");
    change->add_option("--mc-samples", mc_samples, "Monte-Carlo samples for mixtures");
    change->add_option("--out", change_out, "output file (default: stdout)");

    std::string past_path;
    std::string recent_path;
    double alpha = 0.05;
    auto* test = app.add_subcommand("test", "t-test and Lepage test on two scalar windows");
    test->add_option("past", past_path, "past window, one value per line")->required();
    test->add_option("recent", recent_path, "recent window, one value per line")->required();
    test->add_option("--alpha", alpha, "significance level");

    ExperimentFlags gp_flags;
    ExperimentFlags gv_flags;
    ExperimentFlags rd_flags;
    auto* gpower = app.add_subcommand("gaussian-power", "power vs dimension on random Gaussians");
    gp_flags.add(gpower, false);
    auto* gvar = app.add_subcommand("gmm-variance", "log-likelihood variance vs dimension on random mixtures");
    gv_flags.add(gvar, false);
    auto* rpower = app.add_subcommand("realdata-power", "power vs dimension on a dataset");
    rd_flags.add(rpower, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (skl->parsed()) {
            const auto p = load_model(model_p);
            const auto q = load_model(model_q);
            if (llcd::dimension(p) != llcd::dimension(q)) {
                throw llcd::DataError("models '" + model_p + "' and '" + model_q + "' differ in dimension");
            }
            std::cout << llcd::io::to_json(skl_between(p, q, mc_samples, seed)).dump() << "\n";
            return 0;
        }
        if (change->parsed()) {
            const auto model = load_model(change_model);
            llcd::Rng rng(seed);
            llcd::ChangeGenOptions opts;
            opts.mc_samples = mc_samples;
            const auto spec = llcd::generate_change(model, change_target, rng, opts);
            const auto text = llcd::io::to_json(spec).dump(2) + "\n";
            if (change_out.empty()) {
                std::cout << text;
            } else {
                llcd::io::write_text_file(change_out, text);
            }
            return 0;
        }
        if (test->parsed()) {
            if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
            const llcd::WindowPair w(llcd::io::read_window(past_path), llcd::io::read_window(recent_path));
            llcd::io::json j;
            j["t-test"] = outcome_json(llcd::welch_t_one_sided(w, alpha));
            j["lepage"] = outcome_json(llcd::lepage_test(w, alpha));
            std::cout << j.dump() << "\n";
            return 0;
        }
        if (gpower->parsed()) {
            auto cfg = llcd::gaussian_power_defaults();
            const auto m = gp_flags.merged(gpower);
            llcd::config::apply(m, cfg);
            const auto curve = llcd::gaussian_power_experiment(cfg);
            const auto out = gp_flags.out.empty() ? std::string("gaussian-power.csv") : gp_flags.out;
            write_results(out, llcd::config::power_csv(curve),
                          llcd::config::manifest("gaussian-power", llcd::config::to_map(cfg), cfg.base_seed, curve.audit));
            return 0;
        }
        if (gvar->parsed()) {
            auto cfg = llcd::gmm_variance_defaults();
            llcd::config::apply(gv_flags.merged(gvar), cfg);
            const auto curve = llcd::gmm_variance_experiment(cfg);
            const auto out = gv_flags.out.empty() ? std::string("gmm-variance.csv") : gv_flags.out;
            auto manifest = llcd::config::manifest("gmm-variance", llcd::config::to_map(cfg), cfg.base_seed);
            manifest["failed_streams"] = curve.failures;
            write_results(out, llcd::config::variance_csv(curve), manifest);
            return 0;
        }
        if (rpower->parsed()) {
            auto cfg = llcd::realdata_power_defaults();
            const auto m = rd_flags.merged(rpower);
            llcd::config::apply(m, cfg);
            const std::string dataset = m.contains("dataset") ? m.at("dataset") : "";
            const std::string path = m.contains("path") ? m.at("path") : "";
            llcd::DataMatrix data = [&] {
                if (dataset == "surrogate") {
                    return llcd::synthetic_surrogate(11, 3258, 4, llcd::derive_seed(cfg.base_seed, 0x5badULL));
                }
                if (dataset.empty() || path.empty()) {
                    throw std::invalid_argument("realdata-power needs --dataset and --path (or --dataset surrogate)");
                }
                return llcd::io::load_dataset(path, llcd::io::parse_dataset_format(dataset));
            }();
            const auto result = llcd::realdata_power_experiment(data, cfg);
            auto map = llcd::config::to_map(cfg);
            if (cfg.dims.empty()) map["dims"] = "1-" + std::to_string(data.cols());
            map["mixture-k"] = std::to_string(result.k);
            map["dataset"] = dataset;
            if (!path.empty()) map["path"] = path;
            auto manifest = llcd::config::manifest("realdata-power", map, cfg.base_seed, result.curve.audit);
            manifest["rows"] = data.rows();
            manifest["columns"] = data.cols();
            const auto out = rd_flags.out.empty() ? std::string("realdata-power.csv") : rd_flags.out;
            write_results(out, llcd::config::power_csv(result.curve), manifest);
            return 0;
        }
    } catch (const llcd::DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const llcd::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const llcd::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kDataError;
    }
    return kUsageError;
}
