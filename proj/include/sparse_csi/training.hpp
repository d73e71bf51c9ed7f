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

#ifndef SPARSE_CSI_TRAINING_HPP
#define SPARSE_CSI_TRAINING_HPP

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

// Pilot and training matrices (orthogonal, Welch-bound-equality, generalized WBE, finite orthogonal
// sequences, Gaussian/Toeplitz FDD training) and synthesis of the received training signals.

namespace sparse_csi
{
    enum class PilotScheme
    {
        Orthogonal,
        Wbe,
        Gwbe,
        Fos
    };

    inline const char *to_string(PilotScheme s)
    {
        switch (s)
        {
        case PilotScheme::Orthogonal:
            return "orthogonal";
        case PilotScheme::Wbe:
            return "wbe";
        case PilotScheme::Gwbe:
            return "gwbe";
        case PilotScheme::Fos:
            return "fos";
        }
        return "unknown";
    }

    // tau x K; column k is the unit-norm pilot sequence of UE k.
    struct PilotSet
    {
        CMat matrix;
        PilotScheme scheme = PilotScheme::Orthogonal;
        std::optional<RVec> powers; // GWBE weights

        Index length() const { return matrix.rows(); } // tau
        Index users() const { return matrix.cols(); }  // K
    };

    enum class TrainingKind
    {
        Gaussian,
        Toeplitz,
        OrthonormalRows
    };

    inline const char *to_string(TrainingKind k)
    {
        switch (k)
        {
        case TrainingKind::Gaussian:
            return "gaussian";
        case TrainingKind::Toeplitz:
            return "toeplitz";
        case TrainingKind::OrthonormalRows:
            return "orthonormal_rows";
        }
        return "unknown";
    }

    // N x M downlink training matrix.
    struct TrainingMatrix
    {
        CMat matrix;
        TrainingKind kind = TrainingKind::Gaussian;

        Index length() const { return matrix.rows(); }   // N
        Index antennas() const { return matrix.cols(); } // M
    };

    // Either per-UE FDD measurement vectors or one TDD tau x M matrix.
    struct MeasurementBatch
    {
        std::variant<std::vector<CVec>, CMat> payload;
        double noise_std = 0.0;
        std::vector<double> noise_bounds; // realized ||z||_2 per FDD UE, filled in bounded-noise mode

        bool is_fdd() const { return std::holds_alternative<std::vector<CVec>>(payload); }
        bool is_tdd() const { return std::holds_alternative<CMat>(payload); }
        const std::vector<CVec> &fdd() const { return std::get<std::vector<CVec>>(payload); }
        const CMat &tdd() const { return std::get<CMat>(payload); }
    };

    // ---------- ORTHOGONAL AND FINITE ORTHOGONAL SEQUENCES ----------

    // First K columns of the unitary tau-point DFT.
    inline PilotSet make_orthogonal_pilots(Index tau, Index K)
    {
        if (tau < 1 || K < 1)
            throw std::invalid_argument("make_orthogonal_pilots: tau and K must be at least 1.");
        if (K > tau)
            throw std::invalid_argument("make_orthogonal_pilots: K = " + std::to_string(K) +
                                        " orthogonal sequences do not fit in length tau = " + std::to_string(tau) + ".");
        PilotSet ps;
        ps.scheme = PilotScheme::Orthogonal;
        ps.matrix.resize(tau, K);
        const double scale = 1.0 / std::sqrt(static_cast<double>(tau));
        for (Index k = 0; k < K; ++k)
            for (Index t = 0; t < tau; ++t)
                ps.matrix(t, k) = std::polar(scale, 2.0 * kPi * static_cast<double>((t * k) % tau) / static_cast<double>(tau));
        return ps;
    }

    // Pilots drawn from the standard basis of C^tau, so every cross-correlation is exactly 0 or 1.
    inline PilotSet make_fos_pilots(Index tau, std::span<const Index> assignment)
    {
        if (tau < 1)
            throw std::invalid_argument("make_fos_pilots: tau must be at least 1.");
        PilotSet ps;
        ps.scheme = PilotScheme::Fos;
        ps.matrix = CMat::Zero(tau, static_cast<Index>(assignment.size()));
        for (std::size_t k = 0; k < assignment.size(); ++k)
        {
            const Index seq = assignment[k];
            if (seq < 0 || seq >= tau)
                throw std::invalid_argument("make_fos_pilots: sequence index " + std::to_string(seq) + " of UE " +
                                            std::to_string(k) + " is outside [0, tau).");
            ps.matrix(seq, static_cast<Index>(k)) = 1.0;
        }
        return ps;
    }

    inline std::vector<Index> round_robin_assignment(Index tau, Index K)
    {
        std::vector<Index> a(static_cast<std::size_t>(K));
        for (Index k = 0; k < K; ++k)
            a[static_cast<std::size_t>(k)] = k % tau;
        return a;
    }

    // ---------- WELCH-BOUND-EQUALITY SEQUENCES ----------

    namespace detail
    {
        // Evenly spaced DFT frequencies floor(t K / tau). Any tau distinct rows of the K-point DFT
        // give a tight frame; even spacing keeps cross-correlation inside small groups of UEs.
        inline std::vector<Index> harmonic_frame_rows(Index tau, Index K)
        {
            std::vector<Index> rows(static_cast<std::size_t>(tau));
            for (Index t = 0; t < tau; ++t)
                rows[static_cast<std::size_t>(t)] = (t * K) / tau;
            return rows;
        }

        // Rotates rows i and j of V (a unitary mixing of the two rows) so that ||row i||^2 becomes
        // `target`, which must lie between the two current squared row norms. The phase is chosen to
        // cancel the cross term, so ||row i||^2 + ||row j||^2 is preserved.
        inline void rotate_rows_to_norm(CMat &V, Index i, Index j, double target)
        {
            const double a = V.row(i).squaredNorm();
            const double b = V.row(j).squaredNorm();
            if (a == b)
                return;
            double c2 = (target - b) / (a - b);
            c2 = std::clamp(c2, 0.0, 1.0);
            const double c = std::sqrt(c2);
            const double s = std::sqrt(1.0 - c2);
            const Complex g = V.row(i).dot(V.row(j)); // conj(v_i) . v_j
            // cross term is 2 c s Re(e^{-i psi} v_i v_j^H); v_i v_j^H = conj(g)
            const double psi = std::arg(std::conj(g)) + kPi / 2.0;
            const Complex e = std::polar(1.0, psi);
            const Eigen::RowVectorXcd vi = V.row(i);
            const Eigen::RowVectorXcd vj = V.row(j);
            V.row(i) = c * vi + s * e * vj;
            V.row(j) = -s * std::conj(e) * vi + c * vj;
        }

        // Rows of the returned K x dim matrix V have squared norms p and V^H V = (sum p / dim) I.
        // Requires max(p) <= sum(p)/dim. Chan-Li: start from the spectral form (dim rows at the
        // level, the rest zero), then fix the largest remaining target by rotating the two adjacent
        // sorted row norms that bracket it. Majorization guarantees the bracket exists at every step.
        inline CMat prescribed_diagonal_frame(std::span<const double> p, Index dim)
        {
            const Index K = static_cast<Index>(p.size());
            const double total = std::accumulate(p.begin(), p.end(), 0.0);
            const double level = total / static_cast<double>(dim);
            CMat V = CMat::Zero(K, dim);
            for (Index t = 0; t < dim; ++t)
                V(t, t) = std::sqrt(level);

            std::vector<Index> users(static_cast<std::size_t>(K));
            std::iota(users.begin(), users.end(), Index{0});
            std::stable_sort(users.begin(), users.end(), [&](Index a, Index b)
                             { return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)]; });

            std::vector<Index> free_rows(static_cast<std::size_t>(K));
            std::iota(free_rows.begin(), free_rows.end(), Index{0});
            CMat out(K, dim);
            for (Index u : users)
            {
                const double target = p[static_cast<std::size_t>(u)];
                std::stable_sort(free_rows.begin(), free_rows.end(), [&](Index a, Index b)
                                 { return V.row(a).squaredNorm() > V.row(b).squaredNorm(); });
                std::size_t j = 0;
                while (j + 1 < free_rows.size() && V.row(free_rows[j + 1]).squaredNorm() >= target)
                    ++j;
                const Index row = free_rows[j];
                if (j + 1 < free_rows.size())
                    rotate_rows_to_norm(V, row, free_rows[j + 1], target);
                out.row(u) = V.row(row);
                free_rows.erase(free_rows.begin() + static_cast<std::ptrdiff_t>(j));
            }
            for (Index k = 0; k < K; ++k)
                if (std::abs(out.row(k).squaredNorm() - p[static_cast<std::size_t>(k)]) > 1e-9 * std::max(1.0, level))
                    throw std::logic_error("prescribed_diagonal_frame: row norms did not reach their targets.");
            return out;
        }

        // Unit-norm columns s_k = V_k^H / sqrt(p_k) laid into `rows` of a tau x K matrix.
        inline void place_frame(CMat &S, const CMat &V, std::span<const double> p, std::span<const Index> users,
                                Index first_row)
        {
            for (std::size_t u = 0; u < users.size(); ++u)
            {
                const Index k = users[u];
                const double pk = p[u];
                S.col(k).segment(first_row, V.cols()) = V.row(static_cast<Index>(u)).adjoint() / std::sqrt(pk);
            }
        }
    } // namespace detail

    // Harmonic tight frame: S S^H = (K / tau) I, unit-norm columns. Requires K >= tau.
    inline PilotSet make_wbe_pilots(Index tau, Index K)
    {
        if (tau < 1)
            throw std::invalid_argument("make_wbe_pilots: tau must be at least 1.");
        if (K < tau)
            throw std::invalid_argument("make_wbe_pilots: a tight frame needs K >= tau (got K = " + std::to_string(K) +
                                        ", tau = " + std::to_string(tau) + ").");
        const auto rows = detail::harmonic_frame_rows(tau, K);
        PilotSet ps;
        ps.scheme = PilotScheme::Wbe;
        ps.matrix.resize(tau, K);
        const double scale = 1.0 / std::sqrt(static_cast<double>(tau));
        for (Index k = 0; k < K; ++k)
            for (Index t = 0; t < tau; ++t)
                ps.matrix(t, k) = std::polar(scale, 2.0 * kPi * static_cast<double>((rows[static_cast<std::size_t>(t)] * k) % K) /
                                                        static_cast<double>(K));
        return ps;
    }

    // Users whose weight reaches the equal share of the remaining dimensions.
    enum class OversizedUsers
    {
        Reject,   // strict GWBE: infeasible profile is an error
        Dedicate, // oversized users get dedicated orthogonal dimensions; GWBE on the rest
    };

    // Generalized WBE: sum_k p_k s_k s_k^H = (sum p / tau) I with unit-norm s_k.
    // With OversizedUsers::Dedicate the identity holds on the dimensions shared by non-oversized users.
    inline PilotSet make_gwbe_pilots(Index tau, std::span<const double> powers,
                                     OversizedUsers policy = OversizedUsers::Reject)
    {
        const Index K = static_cast<Index>(powers.size());
        if (tau < 1)
            throw std::invalid_argument("make_gwbe_pilots: tau must be at least 1.");
        for (double p : powers)
            if (!(p > 0.0))
                throw std::invalid_argument("make_gwbe_pilots: every power must be positive.");

        PilotSet ps;
        ps.scheme = PilotScheme::Gwbe;
        ps.powers = RVec::Map(powers.data(), K);
        ps.matrix = CMat::Zero(tau, K);

        if (policy == OversizedUsers::Reject)
        {
            if (K < tau)
                throw std::invalid_argument("make_gwbe_pilots: need K >= tau (got K = " + std::to_string(K) +
                                            ", tau = " + std::to_string(tau) + ").");
            const double level = std::accumulate(powers.begin(), powers.end(), 0.0) / static_cast<double>(tau);
            for (Index k = 0; k < K; ++k)
                if (!(powers[static_cast<std::size_t>(k)] < level))
                {
                    std::ostringstream msg;
                    msg << "make_gwbe_pilots: infeasible power profile, majorization condition p[" << k
                        << "] < sum(p)/tau violated (" << powers[static_cast<std::size_t>(k)] << " >= " << level << ").";
                    throw std::invalid_argument(msg.str());
                }
            const CMat V = detail::prescribed_diagonal_frame(powers, tau);
            std::vector<Index> users(static_cast<std::size_t>(K));
            std::iota(users.begin(), users.end(), Index{0});
            detail::place_frame(ps.matrix, V, powers, users, 0);
            return ps;
        }

        // Peel off oversized users (largest first) onto dedicated standard-basis dimensions.
        std::vector<Index> order(static_cast<std::size_t>(K));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b)
                         { return powers[static_cast<std::size_t>(a)] > powers[static_cast<std::size_t>(b)]; });
        double rest_total = std::accumulate(powers.begin(), powers.end(), 0.0);
        Index dims_left = tau;
        std::size_t next = 0;
        Index dedicated = 0;
        while (next < order.size() && dims_left > 0)
        {
            const Index users_left = K - static_cast<Index>(next);
            const double pk = powers[static_cast<std::size_t>(order[next])];
            const bool oversized = users_left <= dims_left || pk >= rest_total / static_cast<double>(dims_left) * (1.0 - 1e-12);
            if (!oversized)
                break;
            ps.matrix(dedicated, order[next]) = 1.0;
            ++dedicated;
            --dims_left;
            rest_total -= pk;
            ++next;
        }
        if (next == order.size())
            return ps;
        if (dims_left == 0)
            throw std::invalid_argument("make_gwbe_pilots: no dimensions left for the remaining users.");

        std::vector<Index> users(order.begin() + static_cast<std::ptrdiff_t>(next), order.end());
        std::vector<double> p;
        for (Index k : users)
            p.push_back(powers[static_cast<std::size_t>(k)]);
        const CMat V = detail::prescribed_diagonal_frame(p, dims_left);
        detail::place_frame(ps.matrix, V, p, users, dedicated);
        return ps;
    }

    // Downlink power allocation P_k proportional to gamma_k / (1 + gamma_k), normalized to `total`.
    inline RVec sinr_proportional_powers(std::span<const double> gammas, double total = 1.0)
    {
        RVec p(static_cast<Index>(gammas.size()));
        for (std::size_t k = 0; k < gammas.size(); ++k)
        {
            if (!(gammas[k] > 0.0))
                throw std::invalid_argument("sinr_proportional_powers: SINR targets must be positive.");
            p[static_cast<Index>(k)] = gammas[k] / (1.0 + gammas[k]);
        }
        return p * (total / p.sum());
    }

    // ---------- FDD TRAINING MATRICES ----------

    // i.i.d. CN(0, 1/N) entries.
    inline TrainingMatrix make_gaussian_training(Index N, Index M, RandomStream &rng)
    {
        if (N < 1 || M < 1)
            throw std::invalid_argument("make_gaussian_training: N and M must be at least 1.");
        return {rng.complex_normal_matrix(N, M, 1.0 / static_cast<double>(N)), TrainingKind::Gaussian};
    }

    // Entry (i, j) = g[i - j + M - 1] from N + M - 1 i.i.d. CN(0, 1/N) generators.
    inline TrainingMatrix make_toeplitz_training(Index N, Index M, RandomStream &rng)
    {
        if (N < 1 || M < 1)
            throw std::invalid_argument("make_toeplitz_training: N and M must be at least 1.");
        const CVec g = rng.complex_normal_vector(N + M - 1, 1.0 / static_cast<double>(N));
        CMat S(N, M);
        for (Index j = 0; j < M; ++j)
            for (Index i = 0; i < N; ++i)
                S(i, j) = g[i - j + M - 1];
        return {std::move(S), TrainingKind::Toeplitz};
    }

    // N <= M rows of a Haar-distributed unitary.
    inline TrainingMatrix make_orthonormal_rows_training(Index N, Index M, RandomStream &rng)
    {
        if (N < 1 || M < 1 || N > M)
            throw std::invalid_argument("make_orthonormal_rows_training: need 1 <= N <= M.");
        const CMat G = rng.complex_normal_matrix(M, N, 1.0);
        Eigen::HouseholderQR<CMat> qr(G);
        CMat Q = qr.householderQ() * CMat::Identity(M, N);
        // fix the phase ambiguity of QR so the distribution is Haar
        const CMat R = qr.matrixQR().topRows(N).triangularView<Eigen::Upper>();
        for (Index k = 0; k < N; ++k)
        {
            const Complex d = R(k, k);
            if (std::abs(d) > 0.0)
                Q.col(k) *= d / std::abs(d);
        }
        return {Q.adjoint(), TrainingKind::OrthonormalRows};
    }

    // ---------- MEASUREMENTS ----------

    // h_{l,i,k} for every cell l, for one UE k in cell i.
    struct FddUeLinks
    {
        std::vector<CVec> from_cell;
    };

    // y = sum_l S_l h_{l,i,k} + z for every UE. In bounded-noise mode the realized ||z||_2 is recorded.
    inline MeasurementBatch fdd_downlink_measure(std::span<const TrainingMatrix> training,
                                                 std::span<const FddUeLinks> ues, double noise_std, RandomStream &rng,
                                                 bool bounded_noise = false)
    {
        if (training.empty())
            throw std::invalid_argument("fdd_downlink_measure: at least one training matrix is required.");
        if (noise_std < 0.0)
            throw std::invalid_argument("fdd_downlink_measure: noise_std must be nonnegative.");
        const Index N = training[0].length();
        const Index M = training[0].antennas();
        for (const auto &t : training)
            if (t.length() != N || t.antennas() != M)
                throw std::invalid_argument("fdd_downlink_measure: training matrices must share N and M.");

        MeasurementBatch batch;
        batch.noise_std = noise_std;
        std::vector<CVec> ys;
        ys.reserve(ues.size());
        for (const auto &ue : ues)
        {
            if (ue.from_cell.size() != training.size())
                throw std::invalid_argument("fdd_downlink_measure: each UE needs one channel per training matrix.");
            CVec y = CVec::Zero(N);
            for (std::size_t l = 0; l < training.size(); ++l)
            {
                if (ue.from_cell[l].size() != M)
                    throw std::invalid_argument("fdd_downlink_measure: channel length does not match M.");
                y += training[l].matrix * ue.from_cell[l];
            }
            if (noise_std > 0.0)
            {
                const CVec z = rng.complex_normal_vector(N, noise_std * noise_std);
                y += z;
                if (bounded_noise)
                    batch.noise_bounds.push_back(z.norm());
            }
            else if (bounded_noise)
                batch.noise_bounds.push_back(0.0);
            ys.push_back(std::move(y));
        }
        batch.payload = std::move(ys);
        return batch;
    }

    // Y_i = sum_l S_l diag(sqrt(q_l)) H_{i,l} + Z_i. Pilot powers q_l default to one.
    inline MeasurementBatch tdd_uplink_measure(std::span<const PilotSet> pilots, std::span<const CMat> blocks,
                                               double noise_std, RandomStream &rng,
                                               std::span<const RVec> pilot_powers = {})
    {
        if (pilots.empty() || pilots.size() != blocks.size())
            throw std::invalid_argument("tdd_uplink_measure: need one pilot set per channel block.");
        if (!pilot_powers.empty() && pilot_powers.size() != pilots.size())
            throw std::invalid_argument("tdd_uplink_measure: need one power vector per pilot set.");
        if (noise_std < 0.0)
            throw std::invalid_argument("tdd_uplink_measure: noise_std must be nonnegative.");
        const Index tau = pilots[0].length();
        const Index M = blocks[0].cols();
        CMat Y = CMat::Zero(tau, M);
        for (std::size_t l = 0; l < pilots.size(); ++l)
        {
            const auto &S = pilots[l].matrix;
            const auto &H = blocks[l];
            if (S.rows() != tau)
                throw std::invalid_argument("tdd_uplink_measure: pilot sets must share tau.");
            if (H.rows() != S.cols() || H.cols() != M)
                throw std::invalid_argument("tdd_uplink_measure: channel block " + std::to_string(l) +
                                            " must be K x M with K matching its pilot set.");
            if (pilot_powers.empty())
                Y.noalias() += S * H;
            else
            {
                if (pilot_powers[l].size() != S.cols())
                    throw std::invalid_argument("tdd_uplink_measure: pilot power vector has the wrong length.");
                Y.noalias() += S * (pilot_powers[l].cwiseSqrt().asDiagonal() * H);
            }
        }
        if (noise_std > 0.0)
            Y += rng.complex_normal_matrix(tau, M, noise_std * noise_std);
        MeasurementBatch batch;
        batch.noise_std = noise_std;
        batch.payload = std::move(Y);
        return batch;
    }

} // namespace sparse_csi

#endif
