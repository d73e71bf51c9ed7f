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

#ifndef SPARSE_CSI_EXPERIMENTS_HPP
#define SPARSE_CSI_EXPERIMENTS_HPP

#include "analysis.hpp"
#include "channel.hpp"
#include "estimators.hpp"
#include "sparse_recovery.hpp"
#include "training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace sparse_csi
{
    enum class ExperimentKind
    {
        PhaseTransition,
        SinrVsAntennas,
        UserCapacity,
        Decontaminate,
        Recover,
    };

    inline const char *to_string(ExperimentKind k)
    {
        switch (k)
        {
        case ExperimentKind::PhaseTransition: return "phase-transition";
        case ExperimentKind::SinrVsAntennas: return "sinr-vs-antennas";
        case ExperimentKind::UserCapacity: return "user-capacity";
        case ExperimentKind::Decontaminate: return "decontaminate";
        case ExperimentKind::Recover: return "recover";
        }
        return "unknown";
    }

    struct Sweep
    {
        std::string name;
        std::vector<double> values;
    };

    inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

    // One Monte-Carlo study. Fields unused by an experiment kind are ignored.
    struct ExperimentSpec
    {
        ExperimentKind kind = ExperimentKind::PhaseTransition;
        SystemGeometry geometry{1, 1, 100, 0.5};
        Sweep sweep;
        int trials = 1;
        std::uint64_t seed = 42;
        std::vector<std::string> methods;

        // sinr-vs-antennas: downlink noise variance; decontaminate: training noise variance;
        // phase-transition: measurement noise standard deviation
        double noise_level = 0.0;

        // angular-domain recovery (phase-transition and recover/angular)
        Index sparsity = 10;
        Index prior_size = 10;
        std::vector<double> alphas{1.0};
        Index measurements = 20;
        std::string training = "gaussian"; // gaussian | toeplitz
        std::string epsilon_mode = "oracle"; // oracle | blind
        Index common_support = 0;
        double snr_db = kNoiseless;

        // recover
        std::string family = "angular";  // angular | tdd
        std::string truth = "lowrank";    // lowrank | bernoulli_gaussian
        Index rank = 2;
        double sparsity_rate = 0.1;
        Index pilot_length = 8;
        double gamma_scale = 1e-3;        // nuclear gamma = gamma_scale * ||S^H Y||_2

        // decontaminate
        double aoa_width = 0.2;
        double aoa_separation = 0.8;
        bool overlapping = false;
        Index paths = 20;

        // sinr-vs-antennas
        double training_noise_var = 0.0;

        // user-capacity
        UserCapacityOptions capacity;
    };

    struct MetricRecord
    {
        std::string sweep_name;
        double sweep_value = 0.0;
        std::string method;
        int trials = 0;
        std::optional<double> nmse_db_mean;
        std::optional<double> nmse_db_median;
        std::optional<double> success_rate;
        std::optional<double> sinr_db_mean;
        std::vector<double> sinr_db; // per tagged UE
        std::optional<double> interference_power_mean;
        std::optional<Index> admissible_users;
        std::uint64_t seed = 0;
    };

    // ---------- VALIDATION ----------

    inline std::vector<std::string> allowed_sweeps(const ExperimentSpec &s)
    {
        switch (s.kind)
        {
        case ExperimentKind::PhaseTransition: return {"N", "alpha"};
        case ExperimentKind::SinrVsAntennas: return {"M"};
        case ExperimentKind::UserCapacity: return {"tau"};
        case ExperimentKind::Decontaminate: return {"M"};
        case ExperimentKind::Recover:
            if (s.family == "tdd")
                return {"tau", "snr_db"};
            return {"N", "s_common", "snr_db"};
        }
        return {};
    }

    inline std::vector<std::string> allowed_methods(const ExperimentSpec &s)
    {
        switch (s.kind)
        {
        case ExperimentKind::PhaseTransition: return {"weighted_l1", "l1"};
        case ExperimentKind::SinrVsAntennas: return {"contaminated_ls_mrt", "perfect_csi_mrt"};
        case ExperimentKind::UserCapacity: return {"gwbe", "wbe", "fos"};
        case ExperimentKind::Decontaminate: return {"ls", "coordinated_mmse"};
        case ExperimentKind::Recover:
            if (s.family == "tdd")
                return {"nuclear_norm", "gm_amp_em", "bg_amp_em", "ls"};
            return {"joint_omp", "omp", "weighted_l1", "l1"};
        }
        return {};
    }

    inline bool is_integer_sweep(const std::string &name)
    {
        return name == "N" || name == "M" || name == "tau" || name == "s_common";
    }

    // Throws ConfigError naming the offending field.
    inline void validate_spec(const ExperimentSpec &s)
    {
        auto fail = [](const std::string &m) { throw ConfigError(m); };
        if (s.trials < 1)
            fail("trials: must be at least 1");
        if (s.kind == ExperimentKind::Recover && s.family != "angular" && s.family != "tdd")
            fail("family: unknown recovery family \"" + s.family + "\" (expected angular or tdd)");
        const auto sweeps = allowed_sweeps(s);
        if (std::find(sweeps.begin(), sweeps.end(), s.sweep.name) == sweeps.end())
        {
            std::string list;
            for (const auto &n : sweeps)
                list += (list.empty() ? "" : ", ") + n;
            fail("sweep.parameter: unknown sweep parameter \"" + s.sweep.name + "\" for " + to_string(s.kind) +
                 " (expected one of: " + list + ")");
        }
        if (s.sweep.values.empty())
            fail("sweep.values: at least one value is required");
        for (std::size_t i = 0; i < s.sweep.values.size(); ++i)
        {
            const double v = s.sweep.values[i];
            if (!std::isfinite(v))
                fail("sweep.values: values must be finite");
            if (i > 0 && !(v > s.sweep.values[i - 1]))
                fail("sweep.values: values must be strictly increasing");
            if (is_integer_sweep(s.sweep.name) && (v != std::floor(v) || v < (s.sweep.name == "s_common" ? 0 : 1)))
                fail("sweep.values: \"" + s.sweep.name + "\" takes positive integers");
            if (s.sweep.name == "alpha" && (v < 0.0 || v > 1.0))
                fail("sweep.values: alpha must lie in [0, 1]");
        }
        if (s.methods.empty())
            fail("methods: at least one method is required");
        const auto methods = allowed_methods(s);
        for (const auto &m : s.methods)
            if (std::find(methods.begin(), methods.end(), m) == methods.end())
                fail("methods: unknown method \"" + m + "\" for " + to_string(s.kind));
        for (double a : s.alphas)
            if (a < 0.0 || a > 1.0)
                fail("alphas: prior accuracies must lie in [0, 1]");
        if (s.geometry.antennas < 1 || s.geometry.cells < 1 || s.geometry.ues_per_cell < 1)
            fail("geometry: cells, ues_per_cell and antennas must be positive");
        if (s.training != "gaussian" && s.training != "toeplitz")
            fail("training: unknown training matrix \"" + s.training + "\" (expected gaussian or toeplitz)");
        if (s.epsilon_mode != "oracle" && s.epsilon_mode != "blind")
            fail("epsilon_mode: expected oracle or blind");
        if (s.truth != "lowrank" && s.truth != "bernoulli_gaussian")
            fail("truth: expected lowrank or bernoulli_gaussian");
        if (s.noise_level < 0.0)
            fail("noise_level: must be nonnegative");
        if (s.training_noise_var < 0.0)
            fail("training_noise_var: must be nonnegative");
        for (const auto &[name, v] : {std::pair<const char *, Index>{"sparsity", s.sparsity}, {"prior_size", s.prior_size},
                                      {"common_support", s.common_support}})
            if (v < 0)
                fail(std::string(name) + ": must be nonnegative");
        for (const auto &[name, v] : {std::pair<const char *, Index>{"measurements", s.measurements},
                                      {"pilot_length", s.pilot_length}, {"rank", s.rank}, {"paths", s.paths}})
            if (v < 1)
                fail(std::string(name) + ": must be positive");
        if (!(s.sparsity_rate > 0.0 && s.sparsity_rate <= 1.0))
            fail("sparsity_rate: must lie in (0, 1]");
        if (!(s.gamma_scale > 0.0))
            fail("gamma_scale: must be positive");
        if (!(s.aoa_width > 0.0))
            fail("aoa_width: must be positive");
    }

    // ---------- DETERMINISTIC PARALLEL MAP ----------

    // Resolves a requested thread count: explicit > SPARSE_CSI_THREADS > 1.
    inline unsigned resolve_threads(unsigned requested)
    {
        if (requested > 0)
            return requested;
        if (const char *env = std::getenv("SPARSE_CSI_THREADS"))
        {
            const long v = std::strtol(env, nullptr, 10);
            if (v > 0)
                return static_cast<unsigned>(v);
        }
        return 1;
    }

    // out[i] = f(i). Results land in fixed slots, so the output is independent of scheduling. The
    // exception of the lowest failing index is rethrown.
    template <class F>
    auto parallel_map(std::size_t n, unsigned threads, F f) -> std::vector<decltype(f(std::size_t{0}))>
    {
        using R = decltype(f(std::size_t{0}));
        std::vector<R> out(n);
        std::vector<std::exception_ptr> errors(n);
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        auto worker = [&]()
        {
            for (;;)
            {
                const std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load())
                    return;
                try
                {
                    out[i] = f(i);
                }
                catch (...)
                {
                    errors[i] = std::current_exception();
                    failed.store(true);
                }
            }
        };
        const unsigned t = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
        if (t == 1)
            worker();
        else
        {
            std::vector<std::thread> pool;
            for (unsigned k = 0; k < t; ++k)
                pool.emplace_back(worker);
            for (auto &th : pool)
                th.join();
        }
        for (auto &e : errors)
            if (e)
                std::rethrow_exception(e);
        return out;
    }

    // ---------- PER-TRIAL SAMPLES ----------

    struct MethodSample
    {
        double nmse_db = std::numeric_limits<double>::quiet_NaN();
        double success = std::numeric_limits<double>::quiet_NaN();
        double signal = std::numeric_limits<double>::quiet_NaN();
        double interference = std::numeric_limits<double>::quiet_NaN();
        double noise = std::numeric_limits<double>::quiet_NaN();
        Index admissible = -1;
    };

    namespace detail
    {
        inline std::string alpha_label(const std::string &method, double alpha)
        {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%s[alpha=%.10g]", method.c_str(), alpha);
            return buf;
        }

        // Labels in output order; weighted_l1 expands to one label per alpha unless alpha is swept.
        inline std::vector<std::string> method_labels(const ExperimentSpec &s)
        {
            std::vector<std::string> labels;
            for (const auto &m : s.methods)
            {
                if (m == "weighted_l1" && s.sweep.name != "alpha")
                    for (double a : s.alphas)
                        labels.push_back(alpha_label(m, a));
                else
                    labels.push_back(m);
            }
            return labels;
        }

        inline TrainingMatrix make_training(const std::string &kind, Index N, Index M, RandomStream &rng)
        {
            if (kind == "toeplitz")
                return make_toeplitz_training(N, M, rng);
            return make_gaussian_training(N, M, rng);
        }

        inline double snr_noise_var(double signal_power, double snr_db)
        {
            if (std::isinf(snr_db) && snr_db > 0)
                return 0.0;
            return signal_power * std::pow(10.0, -snr_db / 10.0);
        }

        inline std::uint64_t key(std::size_t v) { return static_cast<std::uint64_t>(v); }

        // Prior-aware l1 for one UE; alpha = 0 or an empty prior gives plain l1.
        inline EstimateReport solve_weighted(const CVec &y, const CMat &A, const AngularChannel &truth, double alpha,
                                             Index prior_size, double eps, RandomStream &prior_rng)
        {
            RecoveryConfig cfg = RecoveryConfig::weighted_l1(eps);
            if (alpha > 0.0)
            {
                const auto prior = make_support_prior(truth.support, prior_size, alpha, A.cols(), prior_rng);
                cfg.weights = build_weights(prior, A.cols());
            }
            return weighted_l1_recover(y, A, cfg);
        }

        // ----- phase transition -----
        inline std::vector<MethodSample> phase_transition_trial(const ExperimentSpec &s, const CMat &U, std::size_t si,
                                                                std::size_t trial)
        {
            const double value = s.sweep.values[si];
            const Index M = s.geometry.antennas;
            const Index N = s.sweep.name == "N" ? static_cast<Index>(value) : s.measurements;
            RandomStream rng(s.seed, {key(si), key(trial)});
            const auto ch = synthesize_angular_channel(M, s.sparsity, rng);
            const auto S = make_training(s.training, N, M, rng);
            const CMat A = S.matrix * U;
            CVec y = A * ch.coeffs;
            double eps = 0.0;
            if (s.noise_level > 0.0)
            {
                const CVec z = rng.complex_normal_vector(N, s.noise_level * s.noise_level);
                y += z;
                eps = s.epsilon_mode == "oracle" ? z.norm() : s.noise_level * std::sqrt(static_cast<double>(N)) * 1.1;
            }

            std::vector<MethodSample> out;
            std::size_t slot = 0;
            auto record = [&](const EstimateReport &rep)
            {
                MethodSample m;
                m.nmse_db = nmse_db(rep.estimate, ch.coeffs);
                m.success = exact_recovery(rep.vector(), ch.coeffs) ? 1.0 : 0.0;
                out.push_back(m);
            };
            for (const auto &method : s.methods)
            {
                if (method == "l1")
                {
                    RandomStream unused(s.seed, {key(si), key(trial), 999});
                    record(solve_weighted(y, A, ch, 0.0, s.prior_size, eps, unused));
                    ++slot;
                    continue;
                }
                const std::vector<double> alphas = s.sweep.name == "alpha" ? std::vector<double>{value} : s.alphas;
                for (std::size_t ai = 0; ai < alphas.size(); ++ai)
                {
                    RandomStream prior_rng(s.seed, {key(si), key(trial), 1000 + key(ai)});
                    record(solve_weighted(y, A, ch, alphas[ai], s.prior_size, eps, prior_rng));
                    ++slot;
                }
            }
            return out;
        }

        // ----- SINR versus antennas -----
        // L cells with K UEs each reuse the same K orthogonal pilots (tau = K). The tagged UE is UE 0
        // of cell 0; every BS serves its own UEs with MRT at P = 1/K per UE.
        inline std::vector<MethodSample> sinr_trial(const ExperimentSpec &s, std::size_t si, std::size_t trial)
        {
            const Index L = s.geometry.cells;
            const Index K = s.geometry.ues_per_cell;
            const Index M = static_cast<Index>(s.sweep.values[si]);
            RandomStream rng(s.seed, {key(si), key(trial)});
            // H[i][l]: K x M block of channels from BS i to the UEs of cell l
            std::vector<std::vector<CMat>> H(static_cast<std::size_t>(L));
            for (Index i = 0; i < L; ++i)
                for (Index l = 0; l < L; ++l)
                    H[static_cast<std::size_t>(i)].push_back(rng.complex_normal_matrix(K, M, 1.0));

            const PilotSet pilots = make_orthogonal_pilots(K, K);
            const std::vector<PilotSet> reuse(static_cast<std::size_t>(L), pilots);
            std::vector<CMat> est(static_cast<std::size_t>(L));
            for (Index i = 0; i < L; ++i)
            {
                const auto batch = tdd_uplink_measure(reuse, H[static_cast<std::size_t>(i)],
                                                      std::sqrt(s.training_noise_var), rng);
                est[static_cast<std::size_t>(i)] = ls_estimate(batch, pilots).estimate;
            }
            const double P = 1.0 / static_cast<double>(K);

            std::vector<MethodSample> out;
            for (const auto &method : s.methods)
            {
                const bool perfect = method == "perfect_csi_mrt";
                MethodSample m;
                m.signal = 0.0;
                m.interference = 0.0;
                m.noise = s.noise_level;
                for (Index i = 0; i < L; ++i)
                {
                    const CVec victim = H[static_cast<std::size_t>(i)][0].row(0).transpose(); // BS i -> tagged UE
                    for (Index k = 0; k < K; ++k)
                    {
                        const CMat &src = perfect ? H[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)]
                                                  : est[static_cast<std::size_t>(i)];
                        const CVec w = mrt_precoder(CVec(src.row(k).transpose()));
                        const double g = P * std::norm(victim.cwiseProduct(w).sum());
                        if (i == 0 && k == 0)
                            m.signal += g;
                        else
                            m.interference += g;
                    }
                }
                out.push_back(m);
            }
            return out;
        }

        // ----- coordinated MMSE decontamination -----
        struct DecontaminationSetup
        {
            AoaRange desired;
            AoaRange interferer;
            std::vector<MmseFilter> filters; // one per sweep value
        };

        inline DecontaminationSetup decontamination_setup(const ExperimentSpec &s)
        {
            DecontaminationSetup d;
            const double half = s.aoa_width / 2.0;
            const double c = s.overlapping ? 0.0 : s.aoa_separation / 2.0;
            d.desired = {-c - half, -c + half};
            d.interferer = s.overlapping ? d.desired : AoaRange{c - half, c + half};
            d.desired.validate();
            d.interferer.validate();
            for (double v : s.sweep.values)
            {
                const Index M = static_cast<Index>(v);
                const auto Rd = covariance_from_aoa_range(d.desired, M, s.geometry.antenna_spacing);
                const std::vector<CovarianceModel> Ri{covariance_from_aoa_range(d.interferer, M, s.geometry.antenna_spacing)};
                d.filters.emplace_back(Rd, Ri, s.noise_level);
            }
            return d;
        }

        inline std::vector<MethodSample> decontaminate_trial(const ExperimentSpec &s, const DecontaminationSetup &d,
                                                             std::size_t si, std::size_t trial)
        {
            const Index M = static_cast<Index>(s.sweep.values[si]);
            RandomStream rng(s.seed, {key(si), key(trial)});
            const CVec hd = synthesize_multipath_channel(s.paths, d.desired, M, s.geometry.antenna_spacing, rng).second;
            const CVec hi = synthesize_multipath_channel(s.paths, d.interferer, M, s.geometry.antenna_spacing, rng).second;
            CVec ls = hd + hi;
            if (s.noise_level > 0.0)
                ls += rng.complex_normal_vector(M, s.noise_level);
            std::vector<MethodSample> out;
            for (const auto &method : s.methods)
            {
                MethodSample m;
                m.nmse_db = method == "ls" ? nmse_db(ls, hd) : nmse_db(d.filters[si].apply(ls), hd);
                out.push_back(m);
            }
            return out;
        }

        // ----- angular-domain multi-UE recovery -----
        inline std::vector<MethodSample> angular_recover_trial(const ExperimentSpec &s, const CMat &U, std::size_t si,
                                                               std::size_t trial)
        {
            const double value = s.sweep.values[si];
            const Index M = s.geometry.antennas;
            const Index K = s.geometry.ues_per_cell;
            const Index N = s.sweep.name == "N" ? static_cast<Index>(value) : s.measurements;
            const Index sc = s.sweep.name == "s_common" ? static_cast<Index>(value) : s.common_support;
            const double snr = s.sweep.name == "snr_db" ? value : s.snr_db;
            RandomStream rng(s.seed, {key(si), key(trial)});
            const auto group = synthesize_common_support_group(M, K, s.sparsity, sc, rng);
            const auto S = make_training(s.training, N, M, rng);
            const CMat A = S.matrix * U;
            std::vector<CVec> ys;
            std::vector<double> eps;
            CMat truth(M, K);
            for (Index k = 0; k < K; ++k)
            {
                const auto &h = group[static_cast<std::size_t>(k)].coeffs;
                truth.col(k) = h;
                CVec y = A * h;
                const double nv = snr_noise_var(y.squaredNorm() / static_cast<double>(N), snr);
                double e = 0.0;
                if (nv > 0.0)
                {
                    const CVec z = rng.complex_normal_vector(N, nv);
                    y += z;
                    e = s.epsilon_mode == "oracle" ? z.norm() : std::sqrt(nv * static_cast<double>(N)) * 1.1;
                }
                ys.push_back(std::move(y));
                eps.push_back(e);
            }

            std::vector<MethodSample> out;
            auto record = [&](const CMat &est)
            {
                MethodSample m;
                m.nmse_db = nmse_db(est, truth);
                bool all = true;
                for (Index k = 0; k < K; ++k)
                    all = all && exact_recovery(CVec(est.col(k)), CVec(truth.col(k)));
                m.success = all ? 1.0 : 0.0;
                out.push_back(m);
            };
            for (const auto &method : s.methods)
            {
                if (method == "joint_omp" || method == "omp")
                {
                    CMat est(M, K);
                    if (method == "joint_omp")
                    {
                        const auto reps = joint_omp_recover(ys, A, s.sparsity, sc);
                        for (Index k = 0; k < K; ++k)
                            est.col(k) = reps[static_cast<std::size_t>(k)].vector();
                    }
                    else
                        for (Index k = 0; k < K; ++k)
                            est.col(k) = omp_recover(ys[static_cast<std::size_t>(k)], A, s.sparsity).vector();
                    record(est);
                    continue;
                }
                const std::vector<double> alphas = method == "l1" ? std::vector<double>{0.0} : s.alphas;
                for (std::size_t ai = 0; ai < alphas.size(); ++ai)
                {
                    CMat est(M, K);
                    for (Index k = 0; k < K; ++k)
                    {
                        RandomStream prior_rng(s.seed, {key(si), key(trial), 1000 + key(ai), key(static_cast<std::size_t>(k))});
                        est.col(k) = solve_weighted(ys[static_cast<std::size_t>(k)], A, group[static_cast<std::size_t>(k)],
                                                    alphas[ai], s.prior_size, eps[static_cast<std::size_t>(k)], prior_rng)
                                         .vector();
                    }
                    record(est);
                }
            }
            return out;
        }

        // ----- TDD multi-cell channel-matrix recovery -----
        inline std::vector<MethodSample> tdd_recover_trial(const ExperimentSpec &s, std::size_t si, std::size_t trial)
        {
            const double value = s.sweep.values[si];
            const Index KL = s.geometry.cells * s.geometry.ues_per_cell;
            const Index M = s.geometry.antennas;
            const Index tau = s.sweep.name == "tau" ? static_cast<Index>(value) : s.pilot_length;
            const double snr = s.sweep.name == "snr_db" ? value : s.snr_db;
            RandomStream rng(s.seed, {key(si), key(trial)});
            CMat H;
            if (s.truth == "lowrank")
            {
                std::vector<double> aoas;
                for (Index r = 0; r < s.rank; ++r)
                    aoas.push_back(rng.uniform(-kPi / 3.0, kPi / 3.0));
                H = synthesize_lowrank_multiuser(KL, M, aoas, rng, s.geometry.antenna_spacing).matrix;
            }
            else
            {
                H = CMat::Zero(KL, M);
                for (Index j = 0; j < M; ++j)
                    for (Index i = 0; i < KL; ++i)
                        if (rng.uniform(0.0, 1.0) < s.sparsity_rate)
                            H(i, j) = rng.complex_normal(1.0);
                if (H.squaredNorm() == 0.0)
                    H(0, 0) = rng.complex_normal(1.0);
            }
            const CMat S = rng.complex_normal_matrix(tau, KL, 1.0 / static_cast<double>(tau));
            CMat Y = S * H;
            const double nv = snr_noise_var(Y.squaredNorm() / static_cast<double>(Y.size()), snr);
            if (nv > 0.0)
                Y += rng.complex_normal_matrix(tau, M, nv);

            std::vector<MethodSample> out;
            for (const auto &method : s.methods)
            {
                CMat est;
                if (method == "nuclear_norm")
                {
                    const double gamma = s.gamma_scale * spectral_norm(S.adjoint() * Y);
                    est = nuclear_norm_recover(Y, S, RecoveryConfig::nuclear(std::max(gamma, 1e-300))).estimate;
                }
                else if (method == "gm_amp_em")
                    est = gm_amp_em_recover(Y, S, RecoveryConfig::gm_amp()).estimate;
                else if (method == "bg_amp_em")
                    est = bg_amp_em_recover(Y, S, RecoveryConfig::gm_amp()).estimate;
                else
                {
                    Eigen::CompleteOrthogonalDecomposition<CMat> cod;
                    cod.setThreshold(1e-10);
                    cod.compute(S);
                    est = cod.solve(Y);
                }
                MethodSample m;
                m.nmse_db = nmse_db(est, H);
                out.push_back(m);
            }
            return out;
        }

        inline double median(std::vector<double> v)
        {
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        }
    } // namespace detail

    // ---------- RUNNER ----------

    // Runs every (sweep value, trial) job on `threads` workers (0: SPARSE_CSI_THREADS, else 1).
    // Trial randomness comes from substreams keyed by (sweep index, trial), and aggregation walks
    // the jobs in order, so the records do not depend on the thread count.
    inline std::vector<MetricRecord> run_experiment(const ExperimentSpec &spec, unsigned threads = 0)
    {
        validate_spec(spec);
        threads = resolve_threads(threads);
        const std::size_t n_sweep = spec.sweep.values.size();
        const auto labels = detail::method_labels(spec);
        const std::size_t n_methods = labels.size();

        std::vector<std::vector<MethodSample>> jobs;
        std::size_t per_value = static_cast<std::size_t>(spec.trials);
        switch (spec.kind)
        {
        case ExperimentKind::PhaseTransition:
        case ExperimentKind::Recover:
        {
            const bool tdd = spec.kind == ExperimentKind::Recover && spec.family == "tdd";
            const CMat U = tdd ? CMat() : dft_basis(spec.geometry.antennas);
            jobs = parallel_map(n_sweep * per_value, threads, [&](std::size_t j)
                                {
                                    const std::size_t si = j / per_value, t = j % per_value;
                                    if (spec.kind == ExperimentKind::PhaseTransition)
                                        return detail::phase_transition_trial(spec, U, si, t);
                                    if (tdd)
                                        return detail::tdd_recover_trial(spec, si, t);
                                    return detail::angular_recover_trial(spec, U, si, t); });
            break;
        }
        case ExperimentKind::SinrVsAntennas:
            jobs = parallel_map(n_sweep * per_value, threads, [&](std::size_t j)
                                { return detail::sinr_trial(spec, j / per_value, j % per_value); });
            break;
        case ExperimentKind::Decontaminate:
        {
            const auto setup = detail::decontamination_setup(spec);
            jobs = parallel_map(n_sweep * per_value, threads, [&](std::size_t j)
                                { return detail::decontaminate_trial(spec, setup, j / per_value, j % per_value); });
            break;
        }
        case ExperimentKind::UserCapacity:
        {
            // one job per (tau, scheme); trials are averaged inside the admissibility test
            per_value = 1;
            std::vector<std::vector<MethodSample>> grid = parallel_map(n_sweep * n_methods, threads, [&](std::size_t j)
                                                                       {
                const std::size_t si = j / n_methods, mi = j % n_methods;
                const std::string &m = spec.methods[mi];
                const PilotScheme scheme = m == "gwbe" ? PilotScheme::Gwbe : m == "wbe" ? PilotScheme::Wbe : PilotScheme::Fos;
                UserCapacityOptions opt = spec.capacity;
                opt.trials = spec.trials;
                opt.seed = spec.seed;
                MethodSample ms;
                ms.admissible = max_admissible_users(scheme, static_cast<Index>(spec.sweep.values[si]), opt);
                return std::vector<MethodSample>{ms}; });
            jobs.assign(n_sweep, std::vector<MethodSample>(n_methods));
            for (std::size_t j = 0; j < grid.size(); ++j)
                jobs[j / n_methods][j % n_methods] = grid[j].front();
            break;
        }
        }

        std::vector<MetricRecord> records;
        for (std::size_t si = 0; si < n_sweep; ++si)
            for (std::size_t mi = 0; mi < n_methods; ++mi)
            {
                MetricRecord r;
                r.sweep_name = spec.sweep.name;
                r.sweep_value = spec.sweep.values[si];
                r.method = labels[mi];
                r.trials = spec.trials;
                r.seed = spec.seed;
                std::vector<double> nmse;
                double success = 0.0, signal = 0.0, interference = 0.0, noise = 0.0;
                std::size_t n_success = 0, n_power = 0;
                for (std::size_t t = 0; t < per_value; ++t)
                {
                    const MethodSample &m = jobs[si * per_value + t][mi];
                    if (!std::isnan(m.nmse_db))
                        nmse.push_back(m.nmse_db);
                    if (!std::isnan(m.success))
                    {
                        success += m.success;
                        ++n_success;
                    }
                    if (!std::isnan(m.signal))
                    {
                        signal += m.signal;
                        interference += m.interference;
                        noise += m.noise;
                        ++n_power;
                    }
                    if (m.admissible >= 0)
                        r.admissible_users = m.admissible;
                }
                if (!nmse.empty())
                {
                    double lin = 0.0;
                    for (double d : nmse)
                        lin += std::pow(10.0, d / 10.0);
                    r.nmse_db_mean = to_db(lin / static_cast<double>(nmse.size()));
                    r.nmse_db_median = detail::median(nmse);
                }
                if (n_success > 0)
                    r.success_rate = success / static_cast<double>(n_success);
                if (n_power > 0)
                {
                    r.sinr_db_mean = to_db(signal / (interference + noise));
                    r.sinr_db = {*r.sinr_db_mean};
                    r.interference_power_mean = interference / static_cast<double>(n_power);
                }
                records.push_back(std::move(r));
            }
        return records;
    }

    // ---------- CSV ----------

    inline std::string format_number(double v)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", v == 0.0 ? 0.0 : v); // prints -0 as 0
        return buf;
    }

    // One row per record. User-capacity records add a trailing admissible_users column.
    inline void write_metrics_csv(std::ostream &os, const std::vector<MetricRecord> &records)
    {
        const bool capacity = std::any_of(records.begin(), records.end(), [](const MetricRecord &r)
                                          { return r.admissible_users.has_value(); });
        os << "sweep_name,sweep_value,method,trials,nmse_db_mean,nmse_db_median,success_rate,sinr_db_mean,"
              "interference_power_mean,seed";
        if (capacity)
            os << ",admissible_users";
        os << '\n';
        auto opt = [](const std::optional<double> &v) { return v ? format_number(*v) : std::string(); };
        for (const auto &r : records)
        {
            os << r.sweep_name << ',' << format_number(r.sweep_value) << ',' << r.method << ',' << r.trials << ','
               << opt(r.nmse_db_mean) << ',' << opt(r.nmse_db_median) << ',' << opt(r.success_rate) << ','
               << opt(r.sinr_db_mean) << ',' << opt(r.interference_power_mean) << ',' << r.seed;
            if (capacity)
                os << ',' << (r.admissible_users ? std::to_string(*r.admissible_users) : std::string());
            os << '\n';
        }
    }

    // Sweep value at which `rate` first reaches `level`, by linear interpolation between neighbours.
    // Returns nullopt when the curve never reaches it.
    inline std::optional<double> crossing_point(const std::vector<double> &x, const std::vector<double> &rate,
                                                double level)
    {
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            if (rate[i] >= level)
            {
                if (i == 0)
                    return x[0];
                const double t = (level - rate[i - 1]) / (rate[i] - rate[i - 1]);
                return x[i - 1] + t * (x[i] - x[i - 1]);
            }
        }
        return std::nullopt;
    }

} // namespace sparse_csi

#endif
