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


#ifndef SPARSE_CSI_TEST_ORACLES_HPP
#define SPARSE_CSI_TEST_ORACLES_HPP

// Brute-force reference solutions, independent of the library solvers.

#include <sparse_csi/core.hpp>

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace oracle
{
    using sparse_csi::CMat;
    using sparse_csi::CVec;
    using sparse_csi::Index;

    struct SparseSolution
    {
        CVec x;
        std::vector<Index> support;
        int solutions_at_min_size = 0; // > 1 means the sparsest solution is not unique
    };

    inline void for_each_subset(Index n, Index k, const std::function<void(const std::vector<Index> &)> &f)
    {
        std::vector<Index> idx(static_cast<std::size_t>(k));
        for (Index i = 0; i < k; ++i)
            idx[static_cast<std::size_t>(i)] = i;
        if (k == 0)
        {
            f(idx);
            return;
        }
        for (;;)
        {
            f(idx);
            Index i = k - 1;
            while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i)
                --i;
            if (i < 0)
                return;
            ++idx[static_cast<std::size_t>(i)];
            for (Index j = i + 1; j < k; ++j)
                idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    }

    // Sparsest x with A x = y, by trying every support of size 0, 1, ..., s_max.
    inline std::optional<SparseSolution> sparsest_solution(const CMat &A, const CVec &y, Index s_max,
                                                           double rel_tol = 1e-9)
    {
        const double tol = rel_tol * std::max(1.0, y.norm());
        for (Index k = 0; k <= s_max; ++k)
        {
            SparseSolution best;
            for_each_subset(A.cols(), k, [&](const std::vector<Index> &supp)
                            {
                CMat As(A.rows(), k);
                for (Index j = 0; j < k; ++j)
                    As.col(j) = A.col(supp[static_cast<std::size_t>(j)]);
                const CVec c = k > 0 ? CVec(As.colPivHouseholderQr().solve(y)) : CVec();
                const double r = k > 0 ? (As * c - y).norm() : y.norm();
                if (r > tol)
                    return;
                if (k > 0 && c.cwiseAbs().minCoeff() < 1e-9)
                    return; // a smaller support already explains y
                ++best.solutions_at_min_size;
                if (best.solutions_at_min_size == 1)
                {
                    best.x = CVec::Zero(A.cols());
                    for (Index j = 0; j < k; ++j)
                        best.x[supp[static_cast<std::size_t>(j)]] = c[j];
                    best.support = supp;
                } });
            if (best.solutions_at_min_size > 0)
                return best;
        }
        return std::nullopt;
    }

    // Best fit of Y by S G B with G: n x r and B: r x m, by alternating least squares from
    // `restarts` random starts. Returns H = G B of the best run.
    inline CMat rank_constrained_als(const CMat &Y, const CMat &S, Index n, Index r, sparse_csi::RandomStream &rng,
                                     int restarts = 5, int sweeps = 500)
    {
        const Index tau = S.rows(), m = Y.cols();
        CMat best;
        double best_fit = std::numeric_limits<double>::infinity();
        for (int rs = 0; rs < restarts; ++rs)
        {
            CMat B = rng.complex_normal_matrix(r, m, 1.0);
            CMat G(n, r);
            for (int it = 0; it < sweeps; ++it)
            {
                // vec(S G B) = (B^T kron S) vec(G)
                CMat K(tau * m, n * r);
                for (Index j = 0; j < m; ++j)
                    for (Index c = 0; c < r; ++c)
                        K.block(j * tau, c * n, tau, n) = B(c, j) * S;
                const CVec y = Eigen::Map<const CVec>(Y.data(), Y.size());
                const CVec g = K.completeOrthogonalDecomposition().solve(y);
                G = Eigen::Map<const CMat>(g.data(), n, r);
                B = (S * G).completeOrthogonalDecomposition().solve(Y);
            }
            const double fit = (Y - S * G * B).norm();
            if (fit < best_fit)
            {
                best_fit = fit;
                best = G * B;
            }
        }
        return best;
    }
} // namespace oracle

#endif
