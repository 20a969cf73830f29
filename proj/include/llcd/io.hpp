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
#ifndef LLCD_IO_HPP_
#define LLCD_IO_HPP_

// Text formats: headerless CSV for data matrices and windows, JSON for models
// and changes, and loaders for the Wine Quality and MiniBooNE files.
//
// Model schema:
//   {"type": "gaussian", "dim": d, "mean": [d], "covariance": [d*d row-major]}
//   {"type": "mixture", "dim": d, "weights": [k], "components": [gaussian...]}
// Change schema:
//   {"type": "change", "dim": d, "Q": [d*d row-major], "v": [d], "target_skl": t,
//    "achieved_skl": {"value", "std_error", "n_samples", "unclipped"},
//    "rotation_skl": {...}, "rotation_index": j, "rho": r, "method": "closed_form"|"monte_carlo"}

#include "llcd/changegen.hpp"
#include "llcd/core.hpp"
#include "llcd/models.hpp"

#include <json.hpp>

#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace llcd::io {

using json = nlohmann::json;

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return {buf, res.ptr};
}

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Parses one real; quotes around the token are tolerated.
inline bool parse_double(std::string_view token, double& out) {
    token = trim(token);
    if (token.size() >= 2 && token.front() == '"' && token.back() == '"') {
        token = token.substr(1, token.size() - 2);
    }
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    if (token.empty()) return false;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), out);
    return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    return in;
}

/// Headerless comma-separated reals, one observation per line. Blank lines are skipped.
inline DataMatrix read_csv(std::istream& in, const std::string& name = "<stream>") {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (auto tok : split(line, ',')) {
            double v = 0.0;
            if (!parse_double(tok, v)) {
                throw DataError(name + ":" + std::to_string(lineno) + ": malformed value '" + std::string(trim(tok)) +
                                "'");
            }
            if (!std::isfinite(v)) {
                throw DataError(name + ":" + std::to_string(lineno) + ": non-finite value");
            }
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(rows.front().size()) +
                            " columns, found " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw DataError(name + ": no data rows");
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return DataMatrix(std::move(m));
}

inline DataMatrix read_csv_file(const std::string& path) {
    auto in = open_input(path);
    return read_csv(in, path);
}

inline void write_csv(std::ostream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

/// Reads a scalar window: all values of a CSV file in row-major order.
inline std::vector<double> read_window(const std::string& path) {
    const auto m = read_csv_file(path);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.rows() * m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out.push_back(m.values()(i, j));
        }
    }
    return out;
}

enum class DatasetFormat { wine, miniboone, generic_csv };

inline DatasetFormat parse_dataset_format(std::string_view s) {
    if (s == "wine") return DatasetFormat::wine;
    if (s == "miniboone") return DatasetFormat::miniboone;
    if (s == "csv" || s == "generic_csv") return DatasetFormat::generic_csv;
    throw std::invalid_argument("unknown dataset format '" + std::string(s) + "'");
}

inline constexpr double kWineMinQuality = 6.0;
inline constexpr double kMiniBooNESentinel = -999.0;

/// White-wine file: semicolon separated with a header, 11 lab columns plus a
/// quality grade. Keeps the lab columns of rows with grade >= 6.
inline DataMatrix read_wine(std::istream& in, const std::string& name = "<wine>") {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw DataError(name + ": empty file");
    }
    ++lineno;
    const auto header = split(line, ';');
    if (header.size() != 12) {
        throw DataError(name + ":1: expected 12 header fields, found " + std::to_string(header.size()));
    }
    std::vector<std::array<double, 11>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ';');
        if (fields.size() != 12) {
            throw DataError(name + ":" + std::to_string(lineno) + ": expected 12 fields, found " +
                            std::to_string(fields.size()));
        }
        std::array<double, 12> v{};
        for (std::size_t j = 0; j < 12; ++j) {
            if (!parse_double(fields[j], v[j]) || !std::isfinite(v[j])) {
                throw DataError(name + ":" + std::to_string(lineno) + ": malformed value '" +
                                std::string(trim(fields[j])) + "'");
            }
        }
        if (v[11] >= kWineMinQuality) {
            std::array<double, 11> lab{};
            std::copy_n(v.begin(), 11, lab.begin());
            rows.push_back(lab);
        }
    }
    if (rows.empty()) {
        throw DataError(name + ": no rows with quality >= 6");
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), 11);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < 11; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return DataMatrix(std::move(m));
}

/// MiniBooNE PID file: first line "n_signal n_background", then whitespace
/// separated rows, signal block first. Keeps the background (muon) block and
/// drops rows carrying the -999 sentinel.
inline DataMatrix read_miniboone(std::istream& in, const std::string& name = "<miniboone>") {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw DataError(name + ": empty file");
    }
    ++lineno;
    const auto counts = split_whitespace(line);
    double n_signal = 0.0;
    double n_background = 0.0;
    if (counts.size() != 2 || !parse_double(counts[0], n_signal) || !parse_double(counts[1], n_background) ||
        n_signal < 0.0 || n_background < 1.0) {
        throw DataError(name + ":1: expected two counts (signal background)");
    }
    const auto signal = static_cast<std::size_t>(n_signal);
    const auto background = static_cast<std::size_t>(n_background);
    std::vector<std::vector<double>> rows;
    std::size_t seen = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::size_t index = seen++;
        const auto toks = split_whitespace(line);
        if (width == 0) width = toks.size();
        if (toks.size() != width) {
            throw DataError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                            " columns, found " + std::to_string(toks.size()));
        }
        if (index < signal) continue;
        std::vector<double> row(width);
        bool sentinel = false;
        for (std::size_t j = 0; j < width; ++j) {
            if (!parse_double(toks[j], row[j])) {
                throw DataError(name + ":" + std::to_string(lineno) + ": malformed value '" + std::string(toks[j]) +
                                "'");
            }
            if (row[j] == kMiniBooNESentinel) sentinel = true;
            if (!std::isfinite(row[j])) {
                throw DataError(name + ":" + std::to_string(lineno) + ": non-finite value");
            }
        }
        if (!sentinel) rows.push_back(std::move(row));
    }
    if (seen != signal + background) {
        throw DataError(name + ": header announces " + std::to_string(signal + background) + " rows, found " +
                        std::to_string(seen));
    }
    if (rows.empty()) {
        throw DataError(name + ": no usable background rows");
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return DataMatrix(std::move(m));
}

inline DataMatrix load_dataset(const std::string& path, DatasetFormat format) {
    auto in = open_input(path);
    switch (format) {
        case DatasetFormat::wine:
            return read_wine(in, path);
        case DatasetFormat::miniboone:
            return read_miniboone(in, path);
        case DatasetFormat::generic_csv:
            break;
    }
    return read_csv(in, path);
}

// ---- JSON ----------------------------------------------------------------

inline json matrix_to_json(const Matrix& m) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            arr.push_back(m(i, j));
        }
    }
    return arr;
}

inline json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Vector vector_from_json(const json& j, Eigen::Index expected, const char* what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected) {
        throw DataError(std::string(what) + ": expected an array of " + std::to_string(expected) + " numbers");
    }
    Vector v(expected);
    for (Eigen::Index i = 0; i < expected; ++i) {
        v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    }
    return v;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols) {
        throw DataError(std::string(what) + ": expected " + std::to_string(rows * cols) + " numbers (row-major)");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(i, c) = j.at(static_cast<std::size_t>(i * cols + c)).get<double>();
        }
    }
    return m;
}

inline json to_json(const GaussianModel& g) {
    return {{"type", "gaussian"},
            {"dim", g.dim()},
            {"mean", vector_to_json(g.mean())},
            {"covariance", matrix_to_json(g.covariance())}};
}

inline json to_json(const GaussianMixtureModel& m) {
    json comps = json::array();
    for (const auto& c : m.components()) comps.push_back(to_json(c));
    return {{"type", "mixture"}, {"dim", m.dim()}, {"weights", vector_to_json(m.weights())}, {"components", comps}};
}

inline json to_json(const DensityModel& m) {
    return std::visit([](const auto& x) { return to_json(x); }, m);
}

inline GaussianModel gaussian_from_json(const json& j) {
    const auto d = j.at("dim").get<Eigen::Index>();
    return {vector_from_json(j.at("mean"), d, "mean"), matrix_from_json(j.at("covariance"), d, d, "covariance")};
}

inline DensityModel model_from_json(const json& j) {
    try {
        const auto type = j.at("type").get<std::string>();
        if (type == "gaussian") {
            return gaussian_from_json(j);
        }
        if (type == "mixture") {
            const auto& comps_json = j.at("components");
            std::vector<GaussianModel> comps;
            for (const auto& c : comps_json) comps.push_back(gaussian_from_json(c));
            Vector weights = vector_from_json(j.at("weights"), static_cast<Eigen::Index>(comps.size()), "weights");
            return GaussianMixtureModel(std::move(weights), std::move(comps));
        }
        throw DataError("model: unknown type '" + type + "'");
    } catch (const json::exception& e) {
        throw DataError(std::string("model: ") + e.what());
    }
}

inline json to_json(const DivergenceEstimate& e) {
    return {{"value", e.value}, {"std_error", e.std_error}, {"n_samples", e.n_samples}, {"unclipped", e.unclipped}};
}

inline DivergenceEstimate divergence_from_json(const json& j) {
    DivergenceEstimate e;
    e.value = j.at("value").get<double>();
    e.std_error = j.at("std_error").get<double>();
    e.n_samples = j.at("n_samples").get<std::size_t>();
    e.unclipped = j.value("unclipped", e.value);
    return e;
}

inline json to_json(const ChangeSpec& c) {
    return {{"type", "change"},
            {"dim", c.dim()},
            {"Q", matrix_to_json(c.q)},
            {"v", vector_to_json(c.v)},
            {"target_skl", c.target_skl},
            {"achieved_skl", to_json(c.achieved_skl)},
            {"rotation_skl", to_json(c.rotation_skl)},
            {"rotation_index", c.rotation_index},
            {"rho", c.rho},
            {"method", to_string(c.method)}};
}

inline ChangeSpec change_from_json(const json& j) {
    try {
        if (j.at("type").get<std::string>() != "change") {
            throw DataError("change: wrong type tag");
        }
        ChangeSpec c;
        const auto d = j.at("dim").get<Eigen::Index>();
        c.q = matrix_from_json(j.at("Q"), d, d, "Q");
        c.v = vector_from_json(j.at("v"), d, "v");
        c.target_skl = j.at("target_skl").get<double>();
        c.achieved_skl = divergence_from_json(j.at("achieved_skl"));
        c.rotation_skl = divergence_from_json(j.at("rotation_skl"));
        c.rotation_index = j.at("rotation_index").get<std::size_t>();
        c.rho = j.at("rho").get<double>();
        const auto method = j.at("method").get<std::string>();
        if (method != "closed_form" && method != "monte_carlo") {
            throw DataError("change: unknown method '" + method + "'");
        }
        c.method = method == "closed_form" ? CalibrationMethod::closed_form : CalibrationMethod::monte_carlo;
        return c;
    } catch (const json::exception& e) {
        throw DataError(std::string("change: ") + e.what());
    }
}

inline json read_json_file(const std::string& path) {
    auto in = open_input(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write '" + path + "'");
    }
    out << text;
}

}  // namespace llcd::io

#endif  // LLCD_IO_HPP_
