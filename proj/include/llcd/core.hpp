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
#ifndef LLCD_CORE_HPP_
#define LLCD_CORE_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace llcd {

inline constexpr const char* kVersion = "1.0.0";

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Raised when operands disagree on dimension.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or degenerate input data (files, windows, samples).
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to produce a valid result.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline void require_dimension(Eigen::Index expected, Eigen::Index actual, const char* what) {
    if (expected != actual) {
        throw DimensionError(std::string(what) + ": dimension mismatch (expected " + std::to_string(expected) +
                             ", got " + std::to_string(actual) + ")");
    }
}

/// Observations stacked one per row. Always at least 1x1 and finite.
class DataMatrix {
  public:
    explicit DataMatrix(Matrix values) : values_(std::move(values)) {
        if (values_.rows() < 1 || values_.cols() < 1) {
            throw DataError("DataMatrix: needs at least one row and one column");
        }
        if (!values_.allFinite()) {
            throw DataError("DataMatrix: non-finite entry");
        }
    }

    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }
    const Matrix& values() const { return values_; }
    auto row(Eigen::Index i) const { return values_.row(i); }

    /// Rows picked by index, in the given order.
    template <typename Indices>
    DataMatrix select_rows(const Indices& idx) const {
        Matrix out(static_cast<Eigen::Index>(idx.size()), values_.cols());
        Eigen::Index r = 0;
        for (auto i : idx) {
            out.row(r++) = values_.row(static_cast<Eigen::Index>(i));
        }
        return DataMatrix(std::move(out));
    }

    template <typename Indices>
    DataMatrix select_cols(const Indices& idx) const {
        Matrix out(values_.rows(), static_cast<Eigen::Index>(idx.size()));
        Eigen::Index c = 0;
        for (auto j : idx) {
            out.col(c++) = values_.col(static_cast<Eigen::Index>(j));
        }
        return DataMatrix(std::move(out));
    }

  private:
    Matrix values_;
};

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for a node of the seed tree: parent -> child(index).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
    return mix_seed(mix_seed(parent) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index, Rest... rest) {
    return derive_seed(derive_seed(parent, index), static_cast<std::uint64_t>(rest)...);
}

/// Seeded generator. Not thread-safe; give each worker its own.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

    double normal() { return normal_(engine_); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> dist(0, n - 1);
        return dist(engine_);
    }

    Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Matrix z(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j) {
            for (Eigen::Index i = 0; i < rows; ++i) {
                z(i, j) = normal();
            }
        }
        return z;
    }

    Vector normal_vector(Eigen::Index n) {
        Vector z(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            z(i) = normal();
        }
        return z;
    }

    std::uint64_t next_seed() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

struct MeanVariance {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
};

/// Two-pass sample mean and unbiased variance.
template <typename Range>
MeanVariance mean_variance(const Range& xs) {
    MeanVariance mv;
    double n = 0.0;
    for (double x : xs) {
        mv.mean += x;
        n += 1.0;
    }
    if (n == 0.0) {
        return mv;
    }
    mv.mean /= n;
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mv.mean) * (x - mv.mean);
    }
    mv.variance = n > 1.0 ? ss / (n - 1.0) : 0.0;
    return mv;
}

inline double max_abs_orthogonality_error(const Matrix& q) {
    return (q.transpose() * q - Matrix::Identity(q.rows(), q.cols())).cwiseAbs().maxCoeff();
}

}  // namespace llcd

#endif  // LLCD_CORE_HPP_
