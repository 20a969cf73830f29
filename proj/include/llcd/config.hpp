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
#ifndef LLCD_CONFIG_HPP_
#define LLCD_CONFIG_HPP_

// Run configuration files and experiment result files.
//
// A config file holds one `key = value` per line; `#` starts a comment. Keys
// use the long flag names (`target-skl` and `target_skl` are the same key).
// A run manifest (JSON) is also accepted: its "config" object is read with the
// same keys, so every manifest can be replayed.

#include "llcd/core.hpp"
#include "llcd/experiments.hpp"
#include "llcd/io.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace llcd::config {

using ConfigMap = std::map<std::string, std::string>;

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "dims",     "runs",      "window",  "alpha",  "target-skl", "seed",         "workers", "mc-samples",
        "variant",  "training",  "dataset", "path",   "mixture-k",  "k-candidates", "folds",   "out",
    };
    return keys;
}

inline std::string normalize_key(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

inline void check_key(const std::string& key, const std::string& where) {
    if (!known_keys().contains(key)) {
        throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
}

inline ConfigMap parse_config_text(std::istream& in, const std::string& name) {
    ConfigMap out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view body(line);
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = io::trim(body);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string where = name + ":" + std::to_string(lineno);
        if (eq == std::string_view::npos) {
            throw std::invalid_argument(where + ": expected 'key = value'");
        }
        const std::string key = normalize_key(std::string(io::trim(body.substr(0, eq))));
        const std::string value(io::trim(body.substr(eq + 1)));
        check_key(key, where);
        if (value.empty()) {
            throw std::invalid_argument(where + ": empty value for '" + key + "'");
        }
        if (!out.emplace(key, value).second) {
            throw std::invalid_argument(where + ": duplicate key '" + key + "'");
        }
    }
    return out;
}

inline ConfigMap config_from_json(const io::json& j, const std::string& name) {
    const io::json& obj = j.contains("config") ? j.at("config") : j;
    if (!obj.is_object()) {
        throw std::invalid_argument(name + ": config must be a JSON object");
    }
    ConfigMap out;
    for (const auto& [k, v] : obj.items()) {
        const std::string key = normalize_key(k);
        check_key(key, name);
        out[key] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    return out;
}

/// Reads a key-value config file or a JSON run manifest.
inline ConfigMap load_config_file(const std::string& path) {
    auto in = io::open_input(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        try {
            return config_from_json(io::json::parse(text), path);
        } catch (const io::json::exception& e) {
            throw DataError(path + ": " + e.what());
        }
    }
    std::istringstream is(text);
    return parse_config_text(is, path);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto tok : io::split(s, ',')) {
        tok = io::trim(tok);
        if (tok.empty()) throw std::invalid_argument("empty element in list '" + s + "'");
        out.emplace_back(tok);
    }
    return out;
}

inline std::size_t parse_count(const std::string& s, const char* what) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument(std::string("bad ") + what + " '" + s + "'");
    }
    return v;
}

inline double parse_real(const std::string& s, const char* what) {
    double v = 0.0;
    if (!io::parse_double(s, v)) {
        throw std::invalid_argument(std::string("bad ") + what + " '" + s + "'");
    }
    return v;
}

/// "1,2,4" or ranges such as "1-11", or both mixed.
inline std::vector<Eigen::Index> parse_dims(const std::string& s) {
    std::vector<Eigen::Index> out;
    for (const auto& tok : split_list(s)) {
        const auto dash = tok.find('-');
        if (dash == std::string::npos) {
            out.push_back(static_cast<Eigen::Index>(parse_count(tok, "dimension")));
            continue;
        }
        const auto lo = parse_count(tok.substr(0, dash), "dimension range");
        const auto hi = parse_count(tok.substr(dash + 1), "dimension range");
        if (lo > hi) throw std::invalid_argument("bad dimension range '" + tok + "'");
        for (auto d = lo; d <= hi; ++d) out.push_back(static_cast<Eigen::Index>(d));
    }
    for (auto d : out) {
        if (d < 1) throw std::invalid_argument("dimensions must be positive");
    }
    return out;
}

inline std::string join_dims(const std::vector<Eigen::Index>& dims) {
    std::string s;
    for (auto d : dims) s += (s.empty() ? "" : ",") + std::to_string(d);
    return s;
}

/// Overwrites the fields of cfg named in the map.
inline void apply(const ConfigMap& m, ExperimentConfig& cfg) {
    for (const auto& [key, value] : m) {
        if (key == "dims") {
            cfg.dims = parse_dims(value);
        } else if (key == "runs") {
            cfg.runs = parse_count(value, "runs");
        } else if (key == "window") {
            cfg.window = parse_count(value, "window");
        } else if (key == "alpha") {
            cfg.alpha = parse_real(value, "alpha");
        } else if (key == "target-skl") {
            cfg.target_skl = parse_real(value, "target-skl");
        } else if (key == "seed") {
            cfg.base_seed = parse_count(value, "seed");
        } else if (key == "workers") {
            cfg.workers = static_cast<unsigned>(parse_count(value, "workers"));
        } else if (key == "mc-samples") {
            cfg.mc_samples = parse_count(value, "mc-samples");
        } else if (key == "variant") {
            cfg.variants.clear();
            for (const auto& v : split_list(value)) cfg.variants.push_back(parse_likelihood_variant(v));
        } else if (key == "training") {
            cfg.training.clear();
            for (const auto& t : split_list(value)) cfg.training.push_back(parse_training_policy(t));
        } else if (key == "mixture-k") {
            cfg.mixture_k = parse_count(value, "mixture-k");
        } else if (key == "k-candidates") {
            cfg.k_candidates.clear();
            for (const auto& k : split_list(value)) cfg.k_candidates.push_back(parse_count(k, "k-candidates"));
        } else if (key == "folds") {
            cfg.folds = parse_count(value, "folds");
        }
    }
}

/// Config keys reproducing cfg; `workers` is omitted since results do not depend on it.
inline ConfigMap to_map(const ExperimentConfig& cfg) {
    ConfigMap m;
    m["dims"] = join_dims(cfg.dims);
    m["runs"] = std::to_string(cfg.runs);
    m["window"] = std::to_string(cfg.window);
    m["alpha"] = io::format_double(cfg.alpha);
    m["target-skl"] = io::format_double(cfg.target_skl);
    m["seed"] = std::to_string(cfg.base_seed);
    m["mc-samples"] = std::to_string(cfg.mc_samples);
    std::string variants;
    for (auto v : cfg.variants) variants += (variants.empty() ? "" : ",") + std::string(to_string(v));
    if (!variants.empty()) m["variant"] = variants;
    std::string training;
    for (const auto& t : cfg.training) training += (training.empty() ? "" : ",") + t.label();
    if (!training.empty()) m["training"] = training;
    m["mixture-k"] = std::to_string(cfg.mixture_k);
    std::string ks;
    for (auto k : cfg.k_candidates) ks += (ks.empty() ? "" : ",") + std::to_string(k);
    m["k-candidates"] = ks;
    m["folds"] = std::to_string(cfg.folds);
    return m;
}

inline std::string power_csv(const PowerCurve& curve) {
    std::string s = "d,test,variant,power_or_variance,std_error,runs\n";
    for (const auto& e : curve.entries) {
        s += std::to_string(e.d) + "," + e.test + "," + e.variant + "," + io::format_double(e.power) + "," +
             io::format_double(e.std_error) + "," + std::to_string(e.runs) + "\n";
    }
    return s;
}

inline std::string variance_csv(const VarianceCurve& curve) {
    std::string s = "d,test,variant,power_or_variance,std_error,runs\n";
    for (const auto& e : curve.entries) {
        s += std::to_string(e.d) + ",variance," + e.variant + "," + io::format_double(e.mean_sample_variance) + "," +
             io::format_double(e.std_error) + "," + std::to_string(e.streams) + "\n";
    }
    return s;
}

/// Run manifest: config echo, seed, version and per-run seeds.
inline io::json manifest(const std::string& subcommand, const ConfigMap& cfg, std::uint64_t seed,
                         const std::vector<RunAudit>& audit = {}) {
    io::json j;
    j["library"] = "llcd";
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["base_seed"] = seed;
    j["config"] = cfg;
    if (!audit.empty()) {
        io::json runs = io::json::array();
        for (const auto& a : audit) {
            runs.push_back({{"d", a.d},
                            {"run", a.run},
                            {"seed", a.seed},
                            {"ok", a.ok},
                            {"reseeded", a.reseeded},
                            {"achieved_skl", a.achieved_skl},
                            {"achieved_std_error", a.achieved_std_error},
                            {"rotation_index", a.rotation_index},
                            {"error", a.error}});
        }
        j["runs"] = std::move(runs);
    }
    return j;
}

}  // namespace llcd::config

#endif  // LLCD_CONFIG_HPP_
