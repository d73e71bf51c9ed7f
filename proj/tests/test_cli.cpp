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


#include <sparse_csi/cli.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sparse_csi;
namespace fs = std::filesystem;

namespace
{
    struct Captured
    {
        int code = 0;
        std::string out;
        std::string err;
    };

    Captured run_cli(std::vector<std::string> args)
    {
        args.insert(args.begin(), "sparse-csi");
        std::vector<const char *> argv;
        for (const auto &a : args)
            argv.push_back(a.c_str());
        std::ostringstream out, err;
        Captured c;
        c.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        c.out = out.str();
        c.err = err.str();
        return c;
    }

    int run_exe(const std::string &args)
    {
        const std::string cmd = std::string(SPARSE_CSI_EXE) + " " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string slurp(const fs::path &p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::size_t count_lines(const std::string &s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

    class CliTest : public ::testing::Test
    {
    protected:
        fs::path dir;

        void SetUp() override
        {
            dir = fs::temp_directory_path() /
                  ("sparse_csi_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
            fs::remove_all(dir);
            fs::create_directories(dir);
        }
        void TearDown() override { fs::remove_all(dir); }

        fs::path write(const std::string &name, const std::string &content)
        {
            const fs::path p = dir / name;
            std::ofstream(p) << content;
            return p;
        }

        // sample config with a smaller trial count
        fs::path shrunk(const std::string &name, int trials)
        {
            auto j = nlohmann::json::parse(slurp(fs::path(SPARSE_CSI_CONFIG_DIR) / name));
            j["trials"] = trials;
            return write(name, j.dump(2));
        }
    };

    const char *kTiny = R"({
  "experiment": "phase-transition",
  "trials": 2,
  "geometry": { "antennas": 20 },
  "sparsity": 2,
  "prior_size": 2,
  "alphas": [0.5],
  "methods": ["weighted_l1"],
  "sweep": { "parameter": "N", "values": [8, 12] }
}
)";
} // namespace

TEST_F(CliTest, ParsesFlags)
{
    const char *argv[] = {"sparse-csi", "phase-transition", "--config", "x.json", "--out", "out.csv", "--seed", "7",
                          "-j", "4", "-v"};
    cli::RunConfig cfg;
    std::ostringstream out, err;
    EXPECT_FALSE(cli::parse_arguments(11, argv, cfg, out, err));
    EXPECT_EQ(cfg.subcommand, "phase-transition");
    EXPECT_EQ(cfg.config_path, "x.json");
    EXPECT_EQ(cfg.output_path, "out.csv");
    ASSERT_TRUE(cfg.seed);
    EXPECT_EQ(*cfg.seed, 7u);
    EXPECT_EQ(cfg.threads, 4u);
    EXPECT_EQ(cfg.verbosity, 1);
}

TEST_F(CliTest, UsageErrorsExitTwo)
{
    EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"phase-transition"}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"phase-transition", "--config", "a.json", "--bogus"}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"phase-transition", "--config", "a.json", "-j", "0"}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"transmogrify", "--config", "a.json"}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, ConfigErrorsExitThreeWithLocation)
{
    std::string text = kTiny;
    text.replace(text.find("\"N\""), 3, "\"Q\"");
    const auto p = write("bad.json", text);
    const auto c = run_cli({"phase-transition", "--config", p.string()});
    EXPECT_EQ(c.code, cli::kExitConfig);
    EXPECT_NE(c.err.find("\"Q\""), std::string::npos) << c.err;
    EXPECT_NE(c.err.find("bad.json:9:"), std::string::npos) << c.err;

    EXPECT_EQ(run_cli({"phase-transition", "--config", write("s.json", "{ \"trials\": ,}").string()}).code,
              cli::kExitConfig);
    EXPECT_EQ(run_cli({"phase-transition", "--config", (dir / "missing.json").string()}).code, cli::kExitConfig);
    EXPECT_EQ(run_cli({"sinr-vs-antennas", "--config", write("t.json", kTiny).string()}).code, cli::kExitConfig);

    std::string unknown = kTiny;
    unknown.replace(unknown.find("\"weighted_l1\""), 13, "\"lasso\"");
    const auto u = run_cli({"phase-transition", "--config", write("u.json", unknown).string()});
    EXPECT_EQ(u.code, cli::kExitConfig);
    EXPECT_NE(u.err.find("lasso"), std::string::npos);
}

TEST_F(CliTest, WritesCsvAndSummary)
{
    const auto cfg = write("tiny.json", kTiny);
    const auto out = dir / "tiny.csv";
    const auto c = run_cli({"phase-transition", "--config", cfg.string(), "-o", out.string()});
    ASSERT_EQ(c.code, cli::kExitOk) << c.err;
    EXPECT_NE(c.out.find("phase-transition: wrote 2 records to"), std::string::npos) << c.out;
    const std::string csv = slurp(out);
    EXPECT_EQ(count_lines(csv), 3u);
    EXPECT_EQ(csv.rfind("sweep_name,sweep_value,method,trials,", 0), 0u);

    const auto to_stdout = run_cli({"phase-transition", "--config", cfg.string()});
    EXPECT_EQ(to_stdout.out, csv);
    EXPECT_NE(to_stdout.err.find("wrote 2 records to stdout"), std::string::npos);
}

TEST_F(CliTest, SeedOverrideChangesOnlyTheSeedColumnSource)
{
    const auto cfg = write("tiny.json", kTiny);
    const auto a = run_cli({"phase-transition", "--config", cfg.string(), "--seed", "7"});
    const auto b = run_cli({"phase-transition", "--config", cfg.string(), "--seed", "7"});
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out.find(",7\n"), std::string::npos);
    EXPECT_EQ(run_cli({"phase-transition", "--config", cfg.string()}).out.find(",7\n"), std::string::npos);
}

TEST_F(CliTest, Fig3ConfigGivesTwentyRecordsAndIsReproducible)
{
    const auto cfg = shrunk("fig3.json", 3);
    const auto a = dir / "a.csv", b = dir / "b.csv";
    ASSERT_EQ(run_cli({"phase-transition", "--config", cfg.string(), "-o", a.string(), "-j", "1"}).code, 0);
    ASSERT_EQ(run_cli({"phase-transition", "--config", cfg.string(), "-o", b.string(), "-j", "4"}).code, 0);
    EXPECT_EQ(count_lines(slurp(a)), 21u);
    EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(CliTest, ShippedConfigsParse)
{
    for (const auto &entry : fs::directory_iterator(SPARSE_CSI_CONFIG_DIR))
    {
        const auto j = nlohmann::json::parse(slurp(entry.path()));
        const std::string name = entry.path().filename().string();
        if (j["experiment"] != "pilots")
            EXPECT_NO_THROW(cli::spec_from_json(j, j["experiment"].get<std::string>())) << name;
        else
            EXPECT_NO_THROW(cli::build_pilots(cli::pilot_request_from_json(j))) << name;
    }
}

TEST_F(CliTest, PilotsSubcommandWritesMatrixCsv)
{
    const auto out = dir / "p.csv";
    const auto c =
        run_cli({"pilots", "--config", (fs::path(SPARSE_CSI_CONFIG_DIR) / "pilots_gwbe.json").string(), "-o", out.string()});
    ASSERT_EQ(c.code, 0) << c.err;
    const std::string csv = slurp(out);
    EXPECT_EQ(csv.rfind("row,col,re,im\n", 0), 0u);
    EXPECT_EQ(count_lines(csv), 1u + 6u * 12u);
}

TEST_F(CliTest, FailedWriteLeavesNoFile)
{
    const auto cfg = write("tiny.json", kTiny);
    const auto target = dir / "no_such_dir" / "x.csv";
    const auto c = run_cli({"phase-transition", "--config", cfg.string(), "-o", target.string()});
    EXPECT_EQ(c.code, cli::kExitRuntime);
    EXPECT_FALSE(fs::exists(target));
    for (const auto &e : fs::directory_iterator(dir))
        EXPECT_EQ(e.path().filename().string().rfind(".tmp.", 0), std::string::npos);

    // an existing output is replaced whole
    const auto good = dir / "g.csv";
    std::ofstream(good) << "stale\n";
    ASSERT_EQ(run_cli({"phase-transition", "--config", cfg.string(), "-o", good.string()}).code, 0);
    EXPECT_EQ(slurp(good).find("stale"), std::string::npos);
}

TEST_F(CliTest, ExecutableExitCodes)
{
    const auto cfg = write("tiny.json", kTiny);
    EXPECT_EQ(run_exe(""), 2);
    EXPECT_EQ(run_exe("phase-transition --config " + cfg.string() + " -o " + (dir / "e.csv").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "e.csv"));
    EXPECT_EQ(run_exe("recover --config " + cfg.string()), 3);
    EXPECT_EQ(run_exe("phase-transition --config " + cfg.string() + " -o " + (dir / "nope" / "e.csv").string()), 1);
}
