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

#ifndef SPARSE_CSI_JOINT_OMP_HPP
#define SPARSE_CSI_JOINT_OMP_HPP

#include "recovery_config.hpp"

#include <span>
#include <string>
#include <vector>

namespace sparse_csi
{
    namespace detail
    {
        // LS fit of y on the columns `support`; returns the coefficients and overwrites `residual`.
        inline CVec ls_on_support(const CMat &A, const CVec &y, const std::vector<Index> &support, CVec &residual)
        {
            if (support.empty())
            {
                residual = y;
                return CVec();
            }
            CMat As(A.rows(), static_cast<Index>(support.size()));
            for (std::size_t j = 0; j < support.size(); ++j)
                As.col(static_cast<Index>(j)) = A.col(support[j]);
            const CVec c = As.colPivHouseholderQr().solve(y);
            residual = y - As * c;
            return c;
        }

        // argmax_j sum_k |a_j^H r_k|^2 / ||a_j||^2 over j not in `taken`; lowest index wins ties.
        inline Index best_atom(const CMat &A, const RVec &col_norm2, std::span<const CVec> residuals,
                               const std::vector<char> &taken)
        {
            RVec score = RVec::Zero(A.cols());
            for (const auto &r : residuals)
                score += (A.adjoint() * r).cwiseAbs2();
            Index best = -1;
            double best_score = -1.0;
            for (Index j = 0; j < A.cols(); ++j)
            {
                if (taken[static_cast<std::size_t>(j)] || col_norm2[j] == 0.0)
                    continue;
                const double s = score[j] / col_norm2[j];
                if (s > best_score)
                {
                    best_score = s;
                    best = j;
                }
            }
            return best;
        }
    } // namespace detail

    // Two-phase simultaneous OMP. Phase 1 grows a shared support of s_common atoms from the summed
    // residual correlations of all UEs; phase 2 extends each UE's support alone up to s atoms.
    inline std::vector<EstimateReport> joint_omp_recover(std::span<const CVec> measurements, const CMat &A, Index s,
                                                         Index s_common)
    {
        const Index N = A.rows();
        const Index M = A.cols();
        if (measurements.empty())
            throw std::invalid_argument("joint_omp_recover: at least one UE measurement is required.");
        for (const auto &y : measurements)
            if (y.size() != N)
                throw std::invalid_argument("joint_omp_recover: every UE must share the training matrix (length N).");
        if (s < 0 || s_common < 0 || s_common > s)
            throw std::invalid_argument("joint_omp_recover: budgets must satisfy 0 <= s_common <= s.");
        if (s > M)
            throw std::invalid_argument("joint_omp_recover: sparsity budget exceeds M.");
        if (s > N)
            throw IllPosedError("joint_omp_recover: sparsity budget s = " + std::to_string(s) +
                                " exceeds the number of measurements N = " + std::to_string(N) + ".");

        const RVec col_norm2 = A.colwise().squaredNorm().transpose();
        const std::size_t K = measurements.size();
        std::vector<CVec> residuals(measurements.begin(), measurements.end());
        std::vector<Index> common;
        std::vector<char> taken(static_cast<std::size_t>(M), 0);

        for (Index t = 0; t < s_common; ++t)
        {
            const Index j = detail::best_atom(A, col_norm2, residuals, taken);
            if (j < 0)
                break;
            common.push_back(j);
            taken[static_cast<std::size_t>(j)] = 1;
            for (std::size_t k = 0; k < K; ++k)
                detail::ls_on_support(A, measurements[k], common, residuals[k]);
        }

        std::vector<EstimateReport> out;
        out.reserve(K);
        for (std::size_t k = 0; k < K; ++k)
        {
            std::vector<Index> support = common;
            std::vector<char> mine = taken;
            CVec r = residuals[k];
            CVec coeffs = detail::ls_on_support(A, measurements[k], support, r);
            for (Index t = static_cast<Index>(support.size()); t < s; ++t)
            {
                const Index j = detail::best_atom(A, col_norm2, std::span<const CVec>(&r, 1), mine);
                if (j < 0)
                    break;
                support.push_back(j);
                mine[static_cast<std::size_t>(j)] = 1;
                coeffs = detail::ls_on_support(A, measurements[k], support, r);
            }
            EstimateReport rep;
            rep.method = "joint_omp";
            rep.estimate = CMat::Zero(M, 1);
            for (std::size_t j = 0; j < support.size(); ++j)
                rep.estimate(support[j], 0) = coeffs[static_cast<Index>(j)];
            rep.residual_norm = r.norm();
            rep.iterations = static_cast<int>(support.size());
            out.push_back(std::move(rep));
        }
        return out;
    }

    inline std::vector<EstimateReport> joint_omp_recover(std::span<const CVec> measurements, const TrainingMatrix &S,
                                                         const CMat &U, Index s, Index s_common)
    {
        if (S.matrix.cols() != U.rows())
            throw std::invalid_argument("joint_omp_recover: training width does not match the basis size.");
        return joint_omp_recover(measurements, CMat(S.matrix * U), s, s_common);
    }

    // Single-UE OMP.
    inline EstimateReport omp_recover(const CVec &y, const CMat &A, Index s)
    {
        auto reps = joint_omp_recover(std::span<const CVec>(&y, 1), A, s, 0);
        reps.front().method = "omp";
        return reps.front();
    }

} // namespace sparse_csi

#endif
