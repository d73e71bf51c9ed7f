// SPDX-License-Identifier: Apache-2.0
//
// sparse-csi: sparsity-inspired CSI acquisition toolkit for massive MIMO
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef SPARSE_CSI_CORE_HPP
#define SPARSE_CSI_CORE_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparse_csi
{
    using Complex = std::complex<double>;
    using Index = Eigen::Index;
    using CVec = Eigen::VectorXcd;
    using CMat = Eigen::MatrixXcd;
    using RVec = Eigen::VectorXd;
    using RMat = Eigen::MatrixXd;

    inline constexpr double kPi = std::numbers::pi;
    inline constexpr Complex kI{0.0, 1.0};

    // Relative tolerance used for every numeric-rank decision in the library.
    inline constexpr double kRankTolerance = 1e-8;

    // ---------- ERRORS ----------
    // Argument violations use std::invalid_argument; numerical failures derive from std::runtime_error.

    struct RankDeficientError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct InfeasibleError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct IllPosedError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct DivergenceError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct ConfigError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    // ---------- RANDOM STREAMS ----------

    // Seeded random stream. Substreams are keyed by integer tuples so that Monte-Carlo trials draw
    // the same numbers regardless of execution order.
    class RandomStream
    {
    public:
        explicit RandomStream(std::uint64_t seed) : RandomStream(seed, {}) {}

        RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys)
            : seed_(seed), keys_(keys)
        {
            reseed();
        }

        // Independent child stream; same (seed, keys...) always yields the same child.
        RandomStream substream(std::initializer_list<std::uint64_t> extra) const
        {
            RandomStream child(*this);
            child.keys_.insert(child.keys_.end(), extra.begin(), extra.end());
            child.reseed();
            return child;
        }

        std::uint64_t seed() const { return seed_; }

        double uniform(double lo, double hi)
        {
            return std::uniform_real_distribution<double>(lo, hi)(engine_);
        }

        Index uniform_index(Index n) // [0, n)
        {
            return static_cast<Index>(std::uniform_int_distribution<long long>(0, static_cast<long long>(n) - 1)(engine_));
        }

        double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

        // Circularly-symmetric complex normal with E|x|^2 = variance.
        Complex complex_normal(double variance = 1.0)
        {
            const double s = std::sqrt(variance / 2.0);
            const double re = normal();
            const double im = normal();
            return {s * re, s * im};
        }

        CVec complex_normal_vector(Index n, double variance = 1.0)
        {
            CVec v(n);
            for (Index i = 0; i < n; ++i)
                v[i] = complex_normal(variance);
            return v;
        }

        CMat complex_normal_matrix(Index rows, Index cols, double variance = 1.0)
        {
            CMat m(rows, cols);
            for (Index j = 0; j < cols; ++j)
                for (Index i = 0; i < rows; ++i)
                    m(i, j) = complex_normal(variance);
            return m;
        }

        // k distinct indices from [0, n), in draw order (partial Fisher-Yates).
        std::vector<Index> sample_without_replacement(Index n, Index k)
        {
            if (k > n || k < 0)
                throw std::invalid_argument("sample_without_replacement: k must lie in [0, n].");
            std::vector<Index> pool(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i)
                pool[static_cast<std::size_t>(i)] = i;
            for (Index i = 0; i < k; ++i)
            {
                const Index j = i + uniform_index(n - i);
                std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            }
            pool.resize(static_cast<std::size_t>(k));
            return pool;
        }

        std::mt19937_64 &engine() { return engine_; }

    private:
        void reseed()
        {
            std::vector<std::uint32_t> words;
            words.reserve(2 + 2 * keys_.size());
            auto push = [&](std::uint64_t v)
            {
                words.push_back(static_cast<std::uint32_t>(v & 0xffffffffULL));
                words.push_back(static_cast<std::uint32_t>(v >> 32));
            };
            push(seed_);
            for (auto k : keys_)
                push(k);
            std::seed_seq seq(words.begin(), words.end());
            engine_.seed(seq);
        }

        std::uint64_t seed_;
        std::vector<std::uint64_t> keys_;
        std::mt19937_64 engine_;
    };

    // ---------- SMALL NUMERIC HELPERS ----------

    // Number of singular values above kRankTolerance * sigma_max.
    inline Index numeric_rank(const CMat &m, double rel_tol = kRankTolerance)
    {
        if (m.size() == 0)
            return 0;
        Eigen::JacobiSVD<CMat> svd(m);
        const RVec &sv = svd.singularValues();
        if (sv.size() == 0 || sv[0] == 0.0)
            return 0;
        Index r = 0;
        for (Index i = 0; i < sv.size(); ++i)
            if (sv[i] > rel_tol * sv[0])
                ++r;
        return r;
    }

    inline double spectral_norm(const CMat &m)
    {
        if (m.size() == 0)
            return 0.0;
        Eigen::JacobiSVD<CMat> svd(m);
        return svd.singularValues()[0];
    }

    inline double max_abs_hermitian_defect(const CMat &m)
    {
        return (m - m.adjoint()).cwiseAbs().maxCoeff();
    }

} // namespace sparse_csi

#endif
