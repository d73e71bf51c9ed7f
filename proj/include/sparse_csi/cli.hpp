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

#ifndef SPARSE_CSI_CLI_HPP
#define SPARSE_CSI_CLI_HPP

// Command-line front end. JSON experiment configs in, CSV out.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 config error.

#include "experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace sparse_csi::cli
{
    inline constexpr int kExitOk = 0;
    inline constexpr int kExitRuntime = 1;
    inline constexpr int kExitUsage = 2;
    inline constexpr int kExitConfig = 3;

    inline const std::vector<std::string> &subcommands()
    {
        static const std::vector<std::string> names{"phase-transition", "sinr-vs-antennas", "user-capacity",
                                                    "decontaminate", "recover", "pilots"};
        return names;
    }

    struct RunConfig
    {
        std::string subcommand;
        std::string config_path;
        std::string output_path;        // empty: CSV goes to stdout
        std::optional<std::uint64_t> seed;
        unsigned threads = 0;           // 0: SPARSE_CSI_THREADS, else 1
        int verbosity = 0;
    };

    // Thrown for command-line problems that CLI11 does not catch itself.
    struct UsageError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    // ---------- CONFIG LOCATIONS ----------

    // 1-based line of the first occurrence of the key path (each key searched after the previous
    // one). Returns 0 when a key is not found.
    inline int locate_key(const std::string &text, const std::vector<std::string> &path)
    {
        std::size_t pos = 0;
        for (const auto &key : path)
        {
            const std::string quoted = "\"" + key + "\"";
            for (;;)
            {
                pos = text.find(quoted, pos);
                if (pos == std::string::npos)
                    return 0;
                std::size_t k = pos + quoted.size();
                while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k])))
                    ++k;
                if (k < text.size() && text[k] == ':')
                    break;
                pos += quoted.size();
            }
        }
        return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
    }

    inline int line_of_offset(const std::string &text, std::size_t offset)
    {
        offset = std::min(offset, text.size());
        return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
    }

    // Prefixes "path:line: " to a field-tagged message such as "sweep.parameter: ...".
    inline std::string located(const std::string &path, const std::string &text, const std::string &message)
    {
        const auto colon = message.find(':');
        int line = 0;
        if (colon != std::string::npos && message.find(' ') > colon)
        {
            std::vector<std::string> keys;
            std::stringstream ss(message.substr(0, colon));
            for (std::string k; std::getline(ss, k, '.');)
                keys.push_back(k);
            line = locate_key(text, keys);
            if (line == 0 && !keys.empty())
                line = locate_key(text, {keys.front()});
        }
        return path + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + message;
    }

    // ---------- CONFIG PARSING ----------

    namespace detail
    {
        using nlohmann::json;

        inline void check_keys(const json &obj, const std::string &where, const std::set<std::string> &allowed)
        {
            for (auto it = obj.begin(); it != obj.end(); ++it)
                if (!allowed.count(it.key()))
                    throw ConfigError((where.empty() ? it.key() : where + "." + it.key()) + ": unknown key \"" +
                                      it.key() + "\"");
        }

        template <class T>
        T get(const json &obj, const std::string &key, const std::string &field, T fallback)
        {
            if (!obj.contains(key))
                return fallback;
            const json &v = obj.at(key);
            try
            {
                if constexpr (std::is_same_v<T, bool>)
                {
                    if (!v.is_boolean())
                        throw ConfigError(field + ": expected true or false");
                }
                else if constexpr (std::is_integral_v<T>)
                {
                    if (!v.is_number_integer())
                        throw ConfigError(field + ": expected an integer");
                    if constexpr (std::is_unsigned_v<T>)
                        if (v.get<long long>() < 0)
                            throw ConfigError(field + ": expected a nonnegative integer");
                }
                else if constexpr (std::is_floating_point_v<T>)
                {
                    if (!v.is_number())
                        throw ConfigError(field + ": expected a number");
                }
                else if constexpr (std::is_same_v<T, std::string>)
                {
                    if (!v.is_string())
                        throw ConfigError(field + ": expected a string");
                }
                return v.get<T>();
            }
            catch (const nlohmann::json::exception &e)
            {
                throw ConfigError(field + ": " + e.what());
            }
        }

        inline std::vector<double> number_list(const json &obj, const std::string &key, const std::string &field)
        {
            const json &v = obj.at(key);
            if (!v.is_array())
                throw ConfigError(field + ": expected an array of numbers");
            std::vector<double> out;
            for (const auto &x : v)
            {
                if (!x.is_number())
                    throw ConfigError(field + ": expected an array of numbers");
                out.push_back(x.get<double>());
            }
            return out;
        }

        inline Sweep parse_sweep(const json &j)
        {
            if (!j.is_object())
                throw ConfigError("sweep: expected an object with \"parameter\" and \"values\"");
            check_keys(j, "sweep", {"parameter", "values", "start", "stop", "step"});
            Sweep s;
            if (!j.contains("parameter"))
                throw ConfigError("sweep: missing \"parameter\"");
            s.name = get<std::string>(j, "parameter", "sweep.parameter", "");
            const bool range = j.contains("start") || j.contains("stop") || j.contains("step");
            if (j.contains("values") == range)
                throw ConfigError("sweep: give either \"values\" or \"start\"/\"stop\"/\"step\"");
            if (!range)
                s.values = number_list(j, "values", "sweep.values");
            else
            {
                if (!j.contains("start") || !j.contains("stop") || !j.contains("step"))
                    throw ConfigError("sweep: a range needs \"start\", \"stop\" and \"step\"");
                const double a = get<double>(j, "start", "sweep.start", 0.0);
                const double b = get<double>(j, "stop", "sweep.stop", 0.0);
                const double h = get<double>(j, "step", "sweep.step", 0.0);
                if (!(h > 0.0))
                    throw ConfigError("sweep.step: must be positive");
                const double n = std::floor((b - a) / h + 1e-9);
                if (n < 0.0 || n > 1e6)
                    throw ConfigError("sweep.stop: range is empty or too long");
                for (int i = 0; i <= static_cast<int>(n); ++i)
                    s.values.push_back(a + i * h);
            }
            return s;
        }

        inline ExperimentKind kind_of(const std::string &sub)
        {
            if (sub == "phase-transition") return ExperimentKind::PhaseTransition;
            if (sub == "sinr-vs-antennas") return ExperimentKind::SinrVsAntennas;
            if (sub == "user-capacity") return ExperimentKind::UserCapacity;
            if (sub == "decontaminate") return ExperimentKind::Decontaminate;
            if (sub == "recover") return ExperimentKind::Recover;
            throw UsageError("unknown subcommand \"" + sub + "\"");
        }
    } // namespace detail

    // Builds an ExperimentSpec from a parsed JSON config. Throws ConfigError with a field path
    // prefix ("sweep.parameter: ...").
    inline ExperimentSpec spec_from_json(const nlohmann::json &j, const std::string &subcommand)
    {
        using detail::get;
        if (!j.is_object())
            throw ConfigError("config: top level must be a JSON object");
        detail::check_keys(j, "", {"experiment", "seed", "trials", "methods", "sweep", "geometry", "noise_level",
                                   "sparsity", "prior_size", "alphas", "measurements", "training", "epsilon_mode",
                                   "common_support", "snr_db", "family", "truth", "rank", "sparsity_rate",
                                   "pilot_length", "gamma_scale", "aoa_width", "aoa_separation", "overlapping", "paths",
                                   "training_noise_var", "capacity"});
        if (j.contains("experiment") && get<std::string>(j, "experiment", "experiment", "") != subcommand)
            throw ConfigError("experiment: config is for \"" + j.at("experiment").get<std::string>() +
                              "\" but the subcommand is \"" + subcommand + "\"");
        ExperimentSpec s;
        s.kind = detail::kind_of(subcommand);
        s.seed = get<std::uint64_t>(j, "seed", "seed", 42);
        s.trials = get<int>(j, "trials", "trials", 1);
        if (!j.contains("methods"))
            throw ConfigError("methods: missing list of methods");
        if (!j.at("methods").is_array())
            throw ConfigError("methods: expected an array of strings");
        for (const auto &m : j.at("methods"))
        {
            if (!m.is_string())
                throw ConfigError("methods: expected an array of strings");
            s.methods.push_back(m.get<std::string>());
        }
        if (!j.contains("sweep"))
            throw ConfigError("sweep: missing sweep definition");
        s.sweep = detail::parse_sweep(j.at("sweep"));
        if (j.contains("geometry"))
        {
            const auto &g = j.at("geometry");
            if (!g.is_object())
                throw ConfigError("geometry: expected an object");
            detail::check_keys(g, "geometry", {"cells", "ues_per_cell", "antennas", "antenna_spacing"});
            s.geometry.cells = get<Index>(g, "cells", "geometry.cells", s.geometry.cells);
            s.geometry.ues_per_cell = get<Index>(g, "ues_per_cell", "geometry.ues_per_cell", s.geometry.ues_per_cell);
            s.geometry.antennas = get<Index>(g, "antennas", "geometry.antennas", s.geometry.antennas);
            s.geometry.antenna_spacing = get<double>(g, "antenna_spacing", "geometry.antenna_spacing", 0.5);
            if (!(s.geometry.antenna_spacing > 0.0))
                throw ConfigError("geometry.antenna_spacing: must be positive");
        }
        s.noise_level = get<double>(j, "noise_level", "noise_level", s.noise_level);
        s.sparsity = get<Index>(j, "sparsity", "sparsity", s.sparsity);
        s.prior_size = get<Index>(j, "prior_size", "prior_size", s.sparsity);
        if (j.contains("alphas"))
            s.alphas = detail::number_list(j, "alphas", "alphas");
        s.measurements = get<Index>(j, "measurements", "measurements", s.measurements);
        s.training = get<std::string>(j, "training", "training", s.training);
        s.epsilon_mode = get<std::string>(j, "epsilon_mode", "epsilon_mode", s.epsilon_mode);
        s.common_support = get<Index>(j, "common_support", "common_support", s.common_support);
        if (j.contains("snr_db") && !j.at("snr_db").is_null())
            s.snr_db = get<double>(j, "snr_db", "snr_db", s.snr_db);
        s.family = get<std::string>(j, "family", "family", s.family);
        s.truth = get<std::string>(j, "truth", "truth", s.truth);
        s.rank = get<Index>(j, "rank", "rank", s.rank);
        s.sparsity_rate = get<double>(j, "sparsity_rate", "sparsity_rate", s.sparsity_rate);
        s.pilot_length = get<Index>(j, "pilot_length", "pilot_length", s.pilot_length);
        s.gamma_scale = get<double>(j, "gamma_scale", "gamma_scale", s.gamma_scale);
        s.aoa_width = get<double>(j, "aoa_width", "aoa_width", s.aoa_width);
        s.aoa_separation = get<double>(j, "aoa_separation", "aoa_separation", s.aoa_separation);
        s.overlapping = get<bool>(j, "overlapping", "overlapping", s.overlapping);
        s.paths = get<Index>(j, "paths", "paths", s.paths);
        s.training_noise_var = get<double>(j, "training_noise_var", "training_noise_var", s.training_noise_var);
        if (j.contains("capacity"))
        {
            const auto &c = j.at("capacity");
            if (!c.is_object())
                throw ConfigError("capacity: expected an object");
            detail::check_keys(c, "capacity", {"asymptotic_M", "slack", "uplink_noise_var", "downlink_noise_var", "max_groups"});
            s.capacity.asymptotic_M = get<Index>(c, "asymptotic_M", "capacity.asymptotic_M", s.capacity.asymptotic_M);
            s.capacity.slack = get<double>(c, "slack", "capacity.slack", s.capacity.slack);
            s.capacity.uplink_noise_var = get<double>(c, "uplink_noise_var", "capacity.uplink_noise_var", s.capacity.uplink_noise_var);
            s.capacity.downlink_noise_var =
                get<double>(c, "downlink_noise_var", "capacity.downlink_noise_var", s.capacity.downlink_noise_var);
            s.capacity.max_groups = get<Index>(c, "max_groups", "capacity.max_groups", s.capacity.max_groups);
            if (s.capacity.asymptotic_M < 1)
                throw ConfigError("capacity.asymptotic_M: must be positive");
            if (!(s.capacity.slack >= 0.0 && s.capacity.slack < 1.0))
                throw ConfigError("capacity.slack: must lie in [0, 1)");
        }
        validate_spec(s);
        return s;
    }

    // Pilot-construction request of the `pilots` subcommand.
    struct PilotRequest
    {
        PilotScheme scheme = PilotScheme::Orthogonal;
        Index tau = 1;
        Index users = 1;
        std::vector<double> powers;
        OversizedUsers oversized = OversizedUsers::Reject;
    };

    inline PilotRequest pilot_request_from_json(const nlohmann::json &j)
    {
        using detail::get;
        if (!j.is_object())
            throw ConfigError("config: top level must be a JSON object");
        detail::check_keys(j, "", {"experiment", "scheme", "tau", "users", "powers", "oversized"});
        if (j.contains("experiment") && get<std::string>(j, "experiment", "experiment", "") != "pilots")
            throw ConfigError("experiment: config is not a pilots config");
        PilotRequest r;
        const std::string scheme = get<std::string>(j, "scheme", "scheme", "orthogonal");
        if (scheme == "orthogonal") r.scheme = PilotScheme::Orthogonal;
        else if (scheme == "fos") r.scheme = PilotScheme::Fos;
        else if (scheme == "wbe") r.scheme = PilotScheme::Wbe;
        else if (scheme == "gwbe") r.scheme = PilotScheme::Gwbe;
        else throw ConfigError("scheme: unknown pilot scheme \"" + scheme + "\" (expected orthogonal, fos, wbe or gwbe)");
        r.tau = get<Index>(j, "tau", "tau", 0);
        if (r.tau < 1)
            throw ConfigError("tau: must be a positive integer");
        if (j.contains("powers"))
            r.powers = detail::number_list(j, "powers", "powers");
        r.users = get<Index>(j, "users", "users", static_cast<Index>(r.powers.size()));
        if (r.users < 1)
            throw ConfigError("users: must be a positive integer");
        if (r.scheme == PilotScheme::Gwbe && static_cast<Index>(r.powers.size()) != r.users)
            throw ConfigError("powers: gwbe needs one power per user");
        const std::string over = get<std::string>(j, "oversized", "oversized", "reject");
        if (over == "reject") r.oversized = OversizedUsers::Reject;
        else if (over == "dedicate") r.oversized = OversizedUsers::Dedicate;
        else throw ConfigError("oversized: expected reject or dedicate");
        return r;
    }

    inline PilotSet build_pilots(const PilotRequest &r)
    {
        switch (r.scheme)
        {
        case PilotScheme::Orthogonal: return make_orthogonal_pilots(r.tau, r.users);
        case PilotScheme::Fos:
        {
            const auto a = round_robin_assignment(r.tau, r.users);
            return make_fos_pilots(r.tau, a);
        }
        case PilotScheme::Wbe: return make_wbe_pilots(r.tau, r.users);
        case PilotScheme::Gwbe: return make_gwbe_pilots(r.tau, r.powers, r.oversized);
        }
        throw std::invalid_argument("build_pilots: unknown scheme");
    }

    // Complex matrix as CSV: one line per entry with columns row, col, re, im.
    inline void write_complex_matrix_csv(std::ostream &os, const CMat &m)
    {
        os << "row,col,re,im\n";
        for (Index c = 0; c < m.cols(); ++c)
            for (Index r = 0; r < m.rows(); ++r)
                os << r << ',' << c << ',' << format_number(m(r, c).real()) << ',' << format_number(m(r, c).imag())
                   << '\n';
    }

    // ---------- FILE IO ----------

    inline std::string read_text_file(const std::string &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError(path + ": cannot open config file");
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    // Parses JSON, converting syntax errors into ConfigError "path:line: ...".
    inline nlohmann::json parse_json_text(const std::string &text, const std::string &path)
    {
        try
        {
            return nlohmann::json::parse(text);
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw ConfigError(path + ":" + std::to_string(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0)) +
                              ": invalid JSON: " + e.what());
        }
    }

    // Writes `content` to a sibling temporary file and renames it over `path`. On failure the
    // temporary is removed and std::runtime_error is thrown.
    inline void write_atomically(const std::string &path, const std::string &content)
    {
        namespace fs = std::filesystem;
        const fs::path target(path);
        const fs::path tmp = target.parent_path() / (".tmp." + target.filename().string() + "." + std::to_string(::getpid()));
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
                throw std::runtime_error("cannot write output " + path + ": cannot create " + tmp.string());
            out << content;
            out.flush();
            if (!out)
            {
                out.close();
                std::error_code ec;
                fs::remove(tmp, ec);
                throw std::runtime_error("cannot write output " + path);
            }
        }
        std::error_code ec;
        fs::rename(tmp, target, ec);
        if (ec)
        {
            std::error_code ignore;
            fs::remove(tmp, ignore);
            throw std::runtime_error("cannot write output " + path + ": " + ec.message());
        }
    }

    // ---------- ARGUMENT PARSING ----------

    // Parses argv into a RunConfig. Returns the exit code to use when parsing ends the run
    // (help, usage error), otherwise nullopt.
    inline std::optional<int> parse_arguments(int argc, const char *const *argv, RunConfig &cfg, std::ostream &out,
                                              std::ostream &err)
    {
        CLI::App app{"Sparsity-based CSI acquisition experiments for massive MIMO", "sparse-csi"};
        app.require_subcommand(1);
        std::string config, output;
        std::uint64_t seed = 0;
        unsigned threads = 0;
        for (const auto &name : subcommands())
        {
            auto *sub = app.add_subcommand(name, name == "pilots" ? "Write a pilot matrix as CSV"
                                                                  : "Run the " + name + " experiment");
            sub->add_option("--config", config, "JSON experiment config")->required();
            sub->add_option("-o,--out", output, "CSV output path (default: stdout)");
            sub->add_option("--seed", seed, "Seed override (CLI > config > 42)");
            sub->add_option("-j,--threads", threads, "Worker threads (default: $SPARSE_CSI_THREADS or 1)")
                ->check(CLI::PositiveNumber);
            sub->add_flag("-v,--verbose", "Verbose progress on stderr");
        }
        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::ParseError &e)
        {
            const int code = app.exit(e, out, err);
            if (code == 0)
                return kExitOk;
            if (!dynamic_cast<const CLI::CallForHelp *>(&e))
                err << app.help();
            return kExitUsage;
        }
        for (auto *sub : app.get_subcommands())
        {
            cfg.subcommand = sub->get_name();
            if (sub->count("--seed") > 0)
                cfg.seed = seed;
            cfg.verbosity = static_cast<int>(sub->count("--verbose"));
        }
        cfg.config_path = config;
        cfg.output_path = output;
        cfg.threads = threads;
        return std::nullopt;
    }

    // ---------- EXECUTION ----------

    inline int execute(const RunConfig &cfg, std::ostream &out, std::ostream &err)
    {
        const auto start = std::chrono::steady_clock::now();
        std::string text;
        nlohmann::json j;
        std::ostringstream csv;
        std::size_t records = 0;
        try
        {
            text = read_text_file(cfg.config_path);
            j = parse_json_text(text, cfg.config_path);
        }
        catch (const ConfigError &e)
        {
            err << "sparse-csi: config error: " << e.what() << '\n';
            return kExitConfig;
        }

        try
        {
            if (cfg.subcommand == "pilots")
            {
                PilotRequest req;
                try
                {
                    req = pilot_request_from_json(j);
                }
                catch (const ConfigError &e)
                {
                    err << "sparse-csi: config error: " << located(cfg.config_path, text, e.what()) << '\n';
                    return kExitConfig;
                }
                const PilotSet p = build_pilots(req);
                write_complex_matrix_csv(csv, p.matrix);
                records = static_cast<std::size_t>(p.matrix.size());
            }
            else
            {
                ExperimentSpec spec;
                try
                {
                    spec = spec_from_json(j, cfg.subcommand);
                }
                catch (const ConfigError &e)
                {
                    err << "sparse-csi: config error: " << located(cfg.config_path, text, e.what()) << '\n';
                    return kExitConfig;
                }
                if (cfg.seed)
                    spec.seed = *cfg.seed;
                const unsigned threads = resolve_threads(cfg.threads);
                if (cfg.verbosity > 0)
                    err << "sparse-csi: " << cfg.subcommand << ": " << spec.sweep.values.size() << " sweep values x "
                        << spec.trials << " trials, seed " << spec.seed << ", " << threads << " thread(s)\n";
                const auto recs = run_experiment(spec, threads);
                write_metrics_csv(csv, recs);
                records = recs.size();
            }
            if (cfg.output_path.empty())
                out << csv.str();
            else
                write_atomically(cfg.output_path, csv.str());
        }
        catch (const ConfigError &e)
        {
            err << "sparse-csi: config error: " << e.what() << '\n';
            return kExitConfig;
        }
        catch (const std::exception &e)
        {
            err << "sparse-csi: error: " << e.what() << '\n';
            return kExitRuntime;
        }

        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s: wrote %zu records to %s in %.2f s\n", cfg.subcommand.c_str(), records,
                      cfg.output_path.empty() ? "stdout" : cfg.output_path.c_str(), secs);
        (cfg.output_path.empty() ? err : out) << buf;
        return kExitOk;
    }

    inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr)
    {
        RunConfig cfg;
        if (auto code = parse_arguments(argc, argv, cfg, out, err))
            return *code;
        return execute(cfg, out, err);
    }

} // namespace sparse_csi::cli

#endif
