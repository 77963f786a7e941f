#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

using namespace ltpsid;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "ltpsid");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "ltpsid_cli_tests" / name;
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST(Cli, SimulateWritesEnsembleAndCreatesDirectory)
{
    const fs::path dir = scratch("simulate") / "a" / "b";
    const auto r = run({"simulate", "--model", "example1", "--N", "50", "--J", "20", "--sigma", "1", "--seed", "7",
                        "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "experiment_019.csv"));
    EXPECT_FALSE(fs::exists(dir / "experiment_020.csv"));
}

TEST(Cli, ExcitationConstraintIsAConfigError)
{
    const auto r = run({"simulate", "--model", "example2", "--J", "2", "--out", scratch("lowJ").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("J >= P*n_u"), std::string::npos) << r.err;
}

TEST(Cli, NoiseFreeIdentifyThenEvaluate)
{
    const fs::path root = scratch("roundtrip");
    ASSERT_EQ(run({"simulate", "--model", "example1", "--sigma", "0", "--out", (root / "data").string()}).code, 0);
    const auto id = run({"identify", "--data", (root / "data").string(), "--order", "auto", "--order-tol", "1e-8",
                         "--q", "10", "--r", "10", "--out", (root / "id").string()});
    ASSERT_EQ(id.code, 0) << id.err;
    EXPECT_NE(id.out.find("order 2"), std::string::npos) << id.out;
    EXPECT_TRUE(fs::exists(root / "id" / "diagnostics.json"));
    const auto ev = run({"evaluate", "--true", "example1", "--est", (root / "id" / "model.json").string(), "--out",
                         (root / "eval").string()});
    ASSERT_EQ(ev.code, 0) << ev.err;
    const auto fit = io::parse_json(io::read_file(root / "eval" / "fit.json"), "fit");
    EXPECT_LT(fit["max_abs_error"].get<double>(), 1e-6);
    EXPECT_NEAR(fit["W"].get<double>(), 100.0, 0.1);
}

TEST(Cli, EvaluateAgainstItselfAndMismatchedPeriod)
{
    const fs::path root = scratch("evaluate");
    ASSERT_EQ(run({"fixtures", "--out", root.string()}).code, 0);
    const auto same = run({"evaluate", "--true", "example2", "--est", (root / "example2.json").string(), "--out",
                           root.string()});
    ASSERT_EQ(same.code, 0) << same.err;
    EXPECT_EQ(same.out.rfind("W 100 ", 0), 0U) << same.out;
    const auto mismatch = run({"evaluate", "--true", "example1", "--est", (root / "example2.json").string(), "--out",
                               root.string()});
    EXPECT_EQ(mismatch.code, 2);
}

TEST(Cli, CorruptCsvIsADataError)
{
    const fs::path root = scratch("corrupt");
    ASSERT_EQ(run({"simulate", "--model", "example2", "--N", "4", "--out", root.string()}).code, 0);
    std::string text = io::read_file(root / "experiment_002.csv");
    text.replace(text.find('\n') + 1, 1, "x");
    io::write_file(root / "experiment_002.csv", text);
    const auto r = run({"identify", "--data", root.string(), "--out", (root / "id").string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("experiment_002.csv:2"), std::string::npos) << r.err;
}

TEST(Cli, PipelineFailureNamesStage)
{
    const fs::path root = scratch("stage");
    ASSERT_EQ(run({"simulate", "--model", "example2", "--N", "4", "--out", root.string()}).code, 0);
    const auto r = run({"identify", "--data", root.string(), "--q", "2", "--r", "2", "--order", "2", "--out",
                        (root / "id").string()});
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("[estimate_AC]"), std::string::npos) << r.err;
}

TEST(Cli, MonteCarloIsReproducibleAndJobIndependent)
{
    const fs::path a = scratch("mc_a");
    const fs::path b = scratch("mc_b");
    ASSERT_EQ(run({"montecarlo", "--model", "example1", "--trials", "6", "--N", "20", "--seed", "11", "--out",
                   a.string()}).code, 0);
    ASSERT_EQ(run({"montecarlo", "--model", "example1", "--trials", "6", "--N", "20", "--seed", "11", "--jobs", "3",
                   "--out", b.string()}).code, 0);
    const std::string csv = io::read_file(a / "montecarlo_trials.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_EQ(csv, io::read_file(b / "montecarlo_trials.csv"));
    EXPECT_EQ(io::read_file(a / "montecarlo_summary.json"), io::read_file(b / "montecarlo_summary.json"));
}

TEST(Cli, SweepWritesSlope)
{
    const fs::path root = scratch("sweep");
    const auto r = run({"sweep", "--model", "example1", "--Ns", "25,50,100", "--trials", "3", "--J", "20", "--out",
                        root.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto summary = io::parse_json(io::read_file(root / "sweep_summary.json"), "sweep");
    EXPECT_TRUE(summary.contains("slope"));
    EXPECT_EQ(run({"sweep", "--Ns", "25,x", "--out", root.string()}).code, 2);
}

TEST(Cli, ConfigFileIsOverriddenByFlags)
{
    const fs::path root = scratch("config");
    io::write_file(root / "c.json", R"({"model": "example2", "N": 4, "J": 5, "sigma": 0})");
    ASSERT_EQ(run({"simulate", "--config", (root / "c.json").string(), "--J", "7", "--out", (root / "d").string()})
                  .code, 0);
    const auto manifest = io::parse_json(io::read_file(root / "d" / "manifest.json"), "m");
    EXPECT_EQ(manifest["P"], 3);
    EXPECT_EQ(manifest["N"], 4);
    EXPECT_EQ(manifest["J"], 7);
    io::write_file(root / "bad.json", R"({"colour": 1})");
    EXPECT_EQ(run({"simulate", "--config", (root / "bad.json").string(), "--out", root.string()}).code, 2);
}

TEST(Cli, OutputRootFromEnvironment)
{
    const fs::path root = scratch("env");
    ::setenv("LTPSID_OUT", root.string().c_str(), 1);
    const auto r = run({"fixtures"});
    ::unsetenv("LTPSID_OUT");
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(fs::exists(root / "example1_raw.json"));
}

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"identify"}).code, 2);
    EXPECT_EQ(run({"simulate", "--model", "example1", "--raw", "--normalize"}).code, 2);
    EXPECT_EQ(run({"montecarlo", "--order", "two"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}
