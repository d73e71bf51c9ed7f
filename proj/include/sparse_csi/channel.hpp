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

#ifndef SPARSE_CSI_CHANNEL_HPP
#define SPARSE_CSI_CHANNEL_HPP

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

// Channel synthesis: angular-domain sparse channels, multipath steering-vector channels, AoA covariance
// models and low-rank multi-user channel matrices. Uniform linear array, phase reference at element 0.

namespace sparse_csi
{
    struct SystemGeometry
    {
        Index cells = 1;              // L
        Index ues_per_cell = 1;       // K
        Index antennas = 1;           // M
        double antenna_spacing = 0.5; // in carrier wavelengths

        void validate() const
        {
            if (cells < 1 || ues_per_cell < 1 || antennas < 1)
                throw std::invalid_argument("SystemGeometry: L, K and M must all be at least 1.");
            if (!(antenna_spacing > 0.0))
                throw std::invalid_argument("SystemGeometry: antenna_spacing must be positive.");
        }
    };

    // Closed AoA interval in radians, inside [-pi/2, pi/2].
    struct AoaRange
    {
        double min = 0.0;
        double max = 0.0;

        double width() const { return max - min; }
        double center() const { return 0.5 * (min + max); }
        bool overlaps(const AoaRange &o) const { return min <= o.max && o.min <= max; }
        bool contains(double theta) const { return theta >= min && theta <= max; }

        void validate() const
        {
            if (min > max)
                throw std::invalid_argument("AoaRange: empty range (min > max).");
            if (min < -kPi / 2 - 1e-12 || max > kPi / 2 + 1e-12)
                throw std::invalid_argument("AoaRange: angles must lie in [-pi/2, pi/2].");
        }
    };

    struct AngularChannel
    {
        CVec coeffs;                // h^a
        std::vector<Index> support; // ascending indices of nonzero coeffs

        Index size() const { return coeffs.size(); }
        Index sparsity() const { return static_cast<Index>(support.size()); }

        static AngularChannel from_coeffs(CVec c)
        {
            AngularChannel ch;
            ch.coeffs = std::move(c);
            for (Index i = 0; i < ch.coeffs.size(); ++i)
                if (std::abs(ch.coeffs[i]) > 0.0)
                    ch.support.push_back(i);
            return ch;
        }
    };

    struct MultipathChannel
    {
        CVec gains; // length P
        RVec aoas;  // length P, radians
        AoaRange aoa_range;

        Index path_count() const { return gains.size(); }
    };

    struct CovarianceModel
    {
        CMat matrix; // M x M Hermitian PSD, trace M
        AoaRange aoa_range;
        Index numeric_rank = 0;
    };

    // Rows of `matrix` are UE-to-BS channels. When present, matrix = gains * steering.
    struct MultiUserChannelMatrix
    {
        CMat matrix;                   // KL x M
        std::optional<CMat> gains;     // G, KL x r
        std::optional<CMat> steering;  // A, r x M
        Index rank_param = 0;          // r
    };

    // ---------- BASES AND STEERING ----------

    // Unitary DFT matrix; column j holds exp(-i 2 pi j m / M) / sqrt(M).
    inline CMat dft_basis(Index M)
    {
        if (M < 1)
            throw std::invalid_argument("dft_basis: M must be at least 1.");
        CMat U(M, M);
        const double scale = 1.0 / std::sqrt(static_cast<double>(M));
        for (Index j = 0; j < M; ++j)
            for (Index m = 0; m < M; ++m)
            {
                // reduce j*m mod M first to keep the phase argument small
                const double k = static_cast<double>((j * m) % M);
                U(m, j) = std::polar(scale, -2.0 * kPi * k / static_cast<double>(M));
            }
        return U;
    }

    inline CVec steering_vector(double theta, Index M, double spacing = 0.5)
    {
        CVec a(M);
        const double phase = -2.0 * kPi * spacing * std::sin(theta);
        for (Index m = 0; m < M; ++m)
            a[m] = std::polar(1.0, phase * static_cast<double>(m));
        return a;
    }

    // ---------- ANGULAR-DOMAIN CHANNELS ----------

    inline AngularChannel synthesize_angular_channel(Index M, Index s, RandomStream &rng)
    {
        if (M < 1)
            throw std::invalid_argument("synthesize_angular_channel: M must be at least 1.");
        if (s < 0 || s > M)
            throw std::invalid_argument("synthesize_angular_channel: sparsity s must lie in [0, M].");
        auto support = rng.sample_without_replacement(M, s);
        std::sort(support.begin(), support.end());
        AngularChannel ch;
        ch.coeffs = CVec::Zero(M);
        for (Index i : support)
        {
            Complex c = rng.complex_normal(1.0);
            while (c == Complex(0.0, 0.0))
                c = rng.complex_normal(1.0);
            ch.coeffs[i] = c;
        }
        ch.support = std::move(support);
        return ch;
    }

    inline CVec to_dense(const AngularChannel &ch, const CMat &U)
    {
        if (U.rows() != ch.size() || U.cols() != ch.size())
            throw std::invalid_argument("to_dense: basis dimension does not match the channel.");
        return U * ch.coeffs;
    }

    inline CVec to_dense(const AngularChannel &ch)
    {
        return to_dense(ch, dft_basis(ch.size()));
    }

    // One shared support of size s_common, plus s - s_common private indices per UE, all private
    // blocks disjoint from each other and from the shared set.
    inline std::vector<AngularChannel> synthesize_common_support_group(Index M, Index K, Index s, Index s_common,
                                                                       RandomStream &rng)
    {
        if (K < 1)
            throw std::invalid_argument("synthesize_common_support_group: K must be at least 1.");
        if (s_common < 0 || s_common > s || s > M)
            throw std::invalid_argument("synthesize_common_support_group: need 0 <= s_common <= s <= M.");
        const Index needed = K * (s - s_common) + s_common;
        if (needed > M)
            throw std::invalid_argument("synthesize_common_support_group: K*(s - s_common) + s_common = " +
                                        std::to_string(needed) + " exceeds M = " + std::to_string(M) + ".");

        const auto order = rng.sample_without_replacement(M, needed);
        const std::vector<Index> common(order.begin(), order.begin() + s_common);

        std::vector<AngularChannel> group;
        group.reserve(static_cast<std::size_t>(K));
        for (Index k = 0; k < K; ++k)
        {
            std::vector<Index> support = common;
            const auto first = order.begin() + s_common + k * (s - s_common);
            support.insert(support.end(), first, first + (s - s_common));
            std::sort(support.begin(), support.end());

            AngularChannel ch;
            ch.coeffs = CVec::Zero(M);
            for (Index i : support)
            {
                Complex c = rng.complex_normal(1.0);
                while (c == Complex(0.0, 0.0))
                    c = rng.complex_normal(1.0);
                ch.coeffs[i] = c;
            }
            ch.support = std::move(support);
            group.push_back(std::move(ch));
        }
        return group;
    }

    // ---------- MULTIPATH CHANNELS ----------

    // h = (1/sqrt(P)) sum_p gains[p] a(aoas[p]); E||h||^2 = M.
    inline CVec multipath_to_dense(const MultipathChannel &mp, Index M, double spacing = 0.5)
    {
        CVec h = CVec::Zero(M);
        for (Index p = 0; p < mp.path_count(); ++p)
            h += mp.gains[p] * steering_vector(mp.aoas[p], M, spacing);
        if (mp.path_count() > 0)
            h /= std::sqrt(static_cast<double>(mp.path_count()));
        return h;
    }

    inline std::pair<MultipathChannel, CVec> synthesize_multipath_channel(Index P, const AoaRange &range, Index M,
                                                                           double spacing, RandomStream &rng)
    {
        if (P < 1)
            throw std::invalid_argument("synthesize_multipath_channel: path count must be at least 1.");
        if (M < 1)
            throw std::invalid_argument("synthesize_multipath_channel: M must be at least 1.");
        range.validate();
        MultipathChannel mp;
        mp.aoa_range = range;
        mp.gains = rng.complex_normal_vector(P, 1.0);
        mp.aoas.resize(P);
        for (Index p = 0; p < P; ++p)
            mp.aoas[p] = range.width() > 0.0 ? rng.uniform(range.min, range.max) : range.min;
        CVec h = multipath_to_dense(mp, M, spacing);
        return {std::move(mp), std::move(h)};
    }

    // ---------- SECOND-ORDER STATISTICS ----------

    inline Index hermitian_numeric_rank(const CMat &R, double rel_tol = kRankTolerance)
    {
        Eigen::SelfAdjointEigenSolver<CMat> es(R, Eigen::EigenvaluesOnly);
        const RVec &ev = es.eigenvalues();
        const double top = ev.cwiseAbs().maxCoeff();
        if (top == 0.0)
            return 0;
        Index r = 0;
        for (Index i = 0; i < ev.size(); ++i)
            if (ev[i] > rel_tol * top)
                ++r;
        return r;
    }

    // R = E[a(theta) a(theta)^H] for theta uniform on the range, by trapezoidal quadrature on a
    // uniform grid; trace(R) = M.
    inline CovarianceModel covariance_from_aoa_range(const AoaRange &range, Index M, double spacing = 0.5,
                                                     Index grid_points = 512)
    {
        if (range.min > range.max)
            throw std::invalid_argument("covariance_from_aoa_range: empty range (min > max).");
        range.validate();
        if (grid_points < 2)
            throw std::invalid_argument("covariance_from_aoa_range: grid_points must be at least 2.");
        if (M < 1)
            throw std::invalid_argument("covariance_from_aoa_range: M must be at least 1.");

        // R depends only on the lag: R(m, n) = E exp(-i 2 pi d (m - n) sin theta). Build the M lag
        // values by quadrature, then fill the Toeplitz matrix.
        CVec lag = CVec::Zero(M);
        const double step = range.width() / static_cast<double>(grid_points - 1);
        double weight_sum = 0.0;
        for (Index g = 0; g < grid_points; ++g)
        {
            const double theta = range.min + step * static_cast<double>(g);
            const double w = (g == 0 || g == grid_points - 1) ? 0.5 : 1.0;
            weight_sum += w;
            const double phase = -2.0 * kPi * spacing * std::sin(theta);
            for (Index d = 0; d < M; ++d)
                lag[d] += w * std::polar(1.0, phase * static_cast<double>(d));
        }
        lag /= weight_sum;

        CovarianceModel cov;
        cov.aoa_range = range;
        cov.matrix.resize(M, M);
        for (Index n = 0; n < M; ++n)
            for (Index m = 0; m < M; ++m)
                cov.matrix(m, n) = (m >= n) ? lag[m - n] : std::conj(lag[n - m]);
        // trace is exactly M by construction (lag[0] == 1)
        cov.matrix *= static_cast<double>(M) / cov.matrix.trace().real();
        cov.numeric_rank = hermitian_numeric_rank(cov.matrix);
        return cov;
    }

    // ---------- LOW-RANK MULTI-USER MATRICES ----------

    inline MultiUserChannelMatrix synthesize_lowrank_multiuser(Index KL, Index M, std::span<const double> aoas,
                                                               RandomStream &rng, double spacing = 0.5)
    {
        const Index r = static_cast<Index>(aoas.size());
        if (r < 1 || r > std::min(KL, M))
            throw std::invalid_argument("synthesize_lowrank_multiuser: need 1 <= r <= min(KL, M).");
        for (Index i = 0; i < r; ++i)
            for (Index j = i + 1; j < r; ++j)
                if (aoas[static_cast<std::size_t>(i)] == aoas[static_cast<std::size_t>(j)])
                    throw std::invalid_argument("synthesize_lowrank_multiuser: AoAs must be distinct.");

        MultiUserChannelMatrix out;
        out.rank_param = r;
        CMat A(r, M);
        const double scale = 1.0 / std::sqrt(static_cast<double>(M));
        for (Index i = 0; i < r; ++i)
            A.row(i) = scale * steering_vector(aoas[static_cast<std::size_t>(i)], M, spacing).transpose();
        CMat G = rng.complex_normal_matrix(KL, r, 1.0);
        out.matrix = G * A;
        out.gains = std::move(G);
        out.steering = std::move(A);
        return out;
    }

} // namespace sparse_csi

#endif
