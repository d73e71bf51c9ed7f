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

#ifndef SPARSE_CSI_ESTIMATORS_HPP
#define SPARSE_CSI_ESTIMATORS_HPP

#include "channel.hpp"
#include "training.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sparse_csi
{
    // One row of a solver convergence trace.
    struct TraceRow
    {
        int iteration = 0;
        double objective = 0.0;
        double residual = 0.0;
        double aux = 0.0; // solver specific: fixed-point residual (ADMM), relative change (SVT), tau_r (AMP)
    };

    struct EstimateReport
    {
        CMat estimate;           // vectors are stored as n x 1
        std::string method;
        double residual_norm = 0.0;
        std::optional<double> nmse_db;
        int iterations = 0;
        bool converged = true;
        std::optional<double> noise_variance;
        std::vector<TraceRow> trace;

        CVec vector() const { return estimate.col(0); }
    };

    // 10 log10(||est - truth||^2 / ||truth||^2), floored at -300 dB.
    inline double nmse_db(const CMat &estimate, const CMat &truth)
    {
        if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
            throw std::invalid_argument("nmse: estimate and truth shapes differ.");
        const double denom = truth.squaredNorm();
        if (!(denom > 0.0))
            throw std::invalid_argument("nmse: truth must be nonzero.");
        const double ratio = (estimate - truth).squaredNorm() / denom;
        if (ratio <= 1e-30)
            return -300.0;
        return std::max(-300.0, 10.0 * std::log10(ratio));
    }

    // ---------- LEAST SQUARES ----------

    // H = (S^H S)^{-1} S^H Y for a TDD measurement.
    inline EstimateReport ls_estimate(const MeasurementBatch &measurement, const PilotSet &pilots)
    {
        if (!measurement.is_tdd())
            throw std::invalid_argument("ls_estimate: a TDD measurement matrix is required.");
        const CMat &Y = measurement.tdd();
        const CMat &S = pilots.matrix;
        if (S.rows() != Y.rows())
            throw std::invalid_argument("ls_estimate: pilot length does not match the measurement rows.");

        const CMat gram = S.adjoint() * S;
        Eigen::ColPivHouseholderQR<CMat> qr(gram);
        qr.setThreshold(1e-10);
        if (qr.rank() < gram.cols())
        {
            // name a pair of columns that are linearly dependent when one exists
            std::string detail;
            for (Index a = 0; a < S.cols() && detail.empty(); ++a)
                for (Index b = a + 1; b < S.cols(); ++b)
                    if (std::abs(std::abs(S.col(a).dot(S.col(b))) - S.col(a).norm() * S.col(b).norm()) <
                        1e-12 * std::max(1.0, S.col(a).norm() * S.col(b).norm()))
                    {
                        detail = " (columns " + std::to_string(a) + " and " + std::to_string(b) + " are collinear)";
                        break;
                    }
            throw RankDeficientError("ls_estimate: pilot Gram matrix of the " + std::string(to_string(pilots.scheme)) +
                                     " pilot set is singular, rank " + std::to_string(qr.rank()) + " < " +
                                     std::to_string(gram.cols()) + detail + ".");
        }
        EstimateReport rep;
        rep.method = "ls";
        rep.estimate = qr.solve(S.adjoint() * Y);
        rep.residual_norm = (Y - S * rep.estimate).norm();
        return rep;
    }

    // ---------- COORDINATED MMSE ----------

    // F = R_d (sigma^2 I + sum_all R)^{-1}; the sum includes the desired covariance. Precomputing F
    // lets Monte-Carlo loops reuse it across trials.
    class MmseFilter
    {
    public:
        MmseFilter(const CovarianceModel &desired, std::span<const CovarianceModel> interferers, double noise_var)
        {
            const Index M = desired.matrix.rows();
            if (desired.matrix.cols() != M)
                throw std::invalid_argument("mmse_decontaminate: desired covariance must be square.");
            if (noise_var < 0.0)
                throw std::invalid_argument("mmse_decontaminate: noise variance must be nonnegative.");
            CMat total = desired.matrix + noise_var * CMat::Identity(M, M);
            for (const auto &c : interferers)
            {
                if (c.matrix.rows() != M || c.matrix.cols() != M)
                    throw std::invalid_argument("mmse_decontaminate: covariance dimension mismatch.");
                total += c.matrix;
            }
            Eigen::LDLT<CMat> ldlt(total);
            const double trace = total.trace().real();
            const bool ill = ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12;
            if (ill)
            {
                ridge_ = 1e-10 * trace / static_cast<double>(M);
                total += ridge_ * CMat::Identity(M, M);
                ldlt.compute(total);
            }
            // F = R_d T^{-1} = (T^{-1} R_d)^H since both are Hermitian
            filter_ = ldlt.solve(desired.matrix).adjoint();
        }

        CVec apply(const CVec &h) const
        {
            if (h.size() != filter_.cols())
                throw std::invalid_argument("mmse_decontaminate: estimate length does not match the covariances.");
            return filter_ * h;
        }

        const CMat &matrix() const { return filter_; }
        double ridge() const { return ridge_; }

    private:
        CMat filter_;
        double ridge_ = 0.0;
    };

    inline EstimateReport mmse_decontaminate(const CVec &ls_row, const CovarianceModel &desired,
                                             std::span<const CovarianceModel> interferers, double noise_var)
    {
        MmseFilter f(desired, interferers, noise_var);
        EstimateReport rep;
        rep.method = "coordinated_mmse";
        rep.estimate = f.apply(ls_row);
        rep.residual_norm = (ls_row - rep.estimate.col(0)).norm();
        return rep;
    }

    // ---------- AoA-BASED PILOT ALLOCATION ----------

    struct PilotAllocation
    {
        // assignment[cell][ue] = pilot index
        std::vector<std::vector<Index>> assignment;
        Index conflict_count = 0;
    };

    // Number of cross-cell co-pilot pairs with overlapping AoA ranges.
    inline Index count_pilot_conflicts(const std::vector<std::vector<AoaRange>> &ranges,
                                       const std::vector<std::vector<Index>> &assignment)
    {
        Index conflicts = 0;
        const std::size_t L = ranges.size();
        for (std::size_t a = 0; a < L; ++a)
            for (std::size_t b = a + 1; b < L; ++b)
                for (std::size_t i = 0; i < ranges[a].size(); ++i)
                    for (std::size_t j = 0; j < ranges[b].size(); ++j)
                        if (assignment[a][i] == assignment[b][j] && ranges[a][i].overlaps(ranges[b][j]))
                            ++conflicts;
        return conflicts;
    }

    // Welsh-Powell greedy coloring of the cross-cell overlap graph: UEs are visited by descending AoA
    // width (ties by cell, then UE) and take the lowest pilot that is free in their cell and unused by
    // overlapping UEs of other cells; if none is, the in-cell free pilot with fewest conflicts.
    // The better of that and the identity assignment is then refined by in-cell swaps.
    inline PilotAllocation allocate_pilots_by_aoa(const std::vector<std::vector<AoaRange>> &ranges, Index tau, Index L,
                                                  Index K)
    {
        if (K > tau)
            throw std::invalid_argument("allocate_pilots_by_aoa: K = " + std::to_string(K) +
                                        " exceeds the number of pilots tau = " + std::to_string(tau) + ".");
        if (static_cast<Index>(ranges.size()) != L)
            throw std::invalid_argument("allocate_pilots_by_aoa: need one range list per cell.");
        for (const auto &cell : ranges)
            if (static_cast<Index>(cell.size()) != K)
                throw std::invalid_argument("allocate_pilots_by_aoa: need K ranges per cell.");

        std::vector<std::pair<Index, Index>> order;
        for (Index l = 0; l < L; ++l)
            for (Index k = 0; k < K; ++k)
                order.emplace_back(l, k);
        std::stable_sort(order.begin(), order.end(), [&](const auto &a, const auto &b)
                         { return ranges[static_cast<std::size_t>(a.first)][static_cast<std::size_t>(a.second)].width() >
                                  ranges[static_cast<std::size_t>(b.first)][static_cast<std::size_t>(b.second)].width(); });

        PilotAllocation out;
        out.assignment.assign(static_cast<std::size_t>(L), std::vector<Index>(static_cast<std::size_t>(K), -1));
        for (const auto &[l, k] : order)
        {
            const auto &mine = ranges[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)];
            Index best = -1;
            Index best_conflicts = std::numeric_limits<Index>::max();
            for (Index p = 0; p < tau; ++p)
            {
                const auto &cell = out.assignment[static_cast<std::size_t>(l)];
                if (std::find(cell.begin(), cell.end(), p) != cell.end())
                    continue;
                Index c = 0;
                for (Index l2 = 0; l2 < L; ++l2)
                {
                    if (l2 == l)
                        continue;
                    for (Index k2 = 0; k2 < K; ++k2)
                        if (out.assignment[static_cast<std::size_t>(l2)][static_cast<std::size_t>(k2)] == p &&
                            mine.overlaps(ranges[static_cast<std::size_t>(l2)][static_cast<std::size_t>(k2)]))
                            ++c;
                }
                if (c < best_conflicts)
                {
                    best = p;
                    best_conflicts = c;
                    if (c == 0)
                        break;
                }
            }
            out.assignment[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] = best;
        }
        out.conflict_count = count_pilot_conflicts(ranges, out.assignment);

        std::vector<std::vector<Index>> identity(static_cast<std::size_t>(L), std::vector<Index>(static_cast<std::size_t>(K)));
        for (auto &cell : identity)
            std::iota(cell.begin(), cell.end(), Index{0});
        const Index identity_conflicts = count_pilot_conflicts(ranges, identity);
        if (identity_conflicts < out.conflict_count)
        {
            out.assignment = identity;
            out.conflict_count = identity_conflicts;
        }

        // swap descent: exchange two pilots within a cell (or move to an unused one) while that helps
        for (bool improved = true; improved && out.conflict_count > 0;)
        {
            improved = false;
            for (Index l = 0; l < L && !improved; ++l)
            {
                auto &cell = out.assignment[static_cast<std::size_t>(l)];
                for (Index k = 0; k < K && !improved; ++k)
                    for (Index p = 0; p < tau && !improved; ++p)
                    {
                        const Index old = cell[static_cast<std::size_t>(k)];
                        if (p == old)
                            continue;
                        const auto other = std::find(cell.begin(), cell.end(), p);
                        if (other != cell.end())
                            *other = old;
                        cell[static_cast<std::size_t>(k)] = p;
                        const Index c = count_pilot_conflicts(ranges, out.assignment);
                        if (c < out.conflict_count)
                        {
                            out.conflict_count = c;
                            improved = true;
                        }
                        else
                        {
                            cell[static_cast<std::size_t>(k)] = old;
                            if (other != cell.end())
                                *other = p;
                        }
                    }
            }
        }
        return out;
    }

} // namespace sparse_csi

#endif
