#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using ust::cli::run;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result ust_cmd(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("ust_cli_") + info->name() + "_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        ::setenv("UST_LOG", "warn", 1);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    // 70/30 split of a generated file, written as train.csv / test.csv
    void make_split(std::size_t n, std::uint64_t seed) {
        ASSERT_EQ(ust_cmd({"gen", "--n", std::to_string(n), "--seed", std::to_string(seed), "--out", path("all.csv"),
                           "--dag-out", path("dag.txt")})
                      .code,
                  0);
        std::istringstream all(slurp(path("all.csv")));
        std::string header, line;
        std::getline(all, header);
        std::ofstream train(path("train.csv")), test(path("test.csv"));
        train << header << "\n";
        test << header << "\n";
        for (std::size_t i = 0; std::getline(all, line); ++i) (i < n * 7 / 10 ? train : test) << line << "\n";
    }

    std::vector<std::string> eval_args(const std::string& model) const {
        return {"eval",       "--dag",     path("dag.txt"), "--train", path("train.csv"), "--data", path("test.csv"),
                "--fit-dist-from", path("train.csv"), "--model", model, "--protected", "A", "--outcome", "Y",
                "--alpha",    "0.1"};
    }

    fs::path dir;
};

const std::string kDemo = std::string(UST_SOURCE_DIR) + "/data/collider_demo/";

std::vector<std::string> demo_audit(const std::string& out_csv) {
    return {"audit",     "--dag",       kDemo + "dag.txt", "--data",    kDemo + "test.csv", "--model",
            "lookup:" + kDemo + "model.json", "--dist", kDemo + "dist.json", "--protected", "Race", "--outcome",
            "Salary",    "--out-csv",   out_csv};
}

}  // namespace

TEST_F(Cli, GenIsDeterministic) {
    ASSERT_EQ(ust_cmd({"gen", "--n", "1000", "--seed", "7", "--out", path("a.csv")}).code, 0);
    ASSERT_EQ(ust_cmd({"gen", "--n", "1000", "--seed", "7", "--out", path("b.csv")}).code, 0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
    EXPECT_EQ(line_count(slurp(path("a.csv"))), 1001u);
}

TEST_F(Cli, GenRowCount) {
    ASSERT_EQ(ust_cmd({"gen", "--n", "100000", "--seed", "1", "--out", path("big.csv")}).code, 0);
    EXPECT_EQ(line_count(slurp(path("big.csv"))), 100'001u);
}

TEST_F(Cli, GenRejectsZeroRows) {
    const auto r = ust_cmd({"gen", "--n", "0", "--out", path("x.csv")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--n"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("x.csv")));
}

TEST_F(Cli, AuditBundledDemo) {
    auto args = demo_audit(path("r.csv"));
    args.insert(args.end(), {"--alpha", "0.05"});
    const auto r = ust_cmd(args);
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream csv(slurp(path("r.csv")));
    std::string line;
    std::getline(csv, line);
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        std::istringstream cells(line);
        std::string id, nds, ds;
        std::getline(cells, id, ',');
        std::getline(cells, nds, ',');
        std::getline(cells, ds, ',');
        EXPECT_LT(std::stod(ds), 1e-9) << line;
        EXPECT_GT(std::abs(std::stod(nds)), 0.05) << line;
    }
    EXPECT_GT(rows, 0u);
}

TEST_F(Cli, AlphaOneFlagsNobody) {
    make_split(2000, 3);
    auto args = eval_args("lr");
    args[0] = "audit";
    args.back() = "1.0";
    args.insert(args.end(), {"--out-json", path("r.json")});
    const auto r = ust_cmd(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = nlohmann::json::parse(slurp(path("r.json")));
    EXPECT_TRUE(doc["flagged_ids"].empty());
    EXPECT_EQ(doc["summary"]["flagged"], 0);
}

TEST_F(Cli, MissingAlphaIsUsageError) {
    const auto r = ust_cmd(demo_audit(path("r.csv")));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--alpha"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingDistributionIsValidationError) {
    const auto r = ust_cmd({"audit", "--dag", kDemo + "dag.txt", "--data", kDemo + "test.csv", "--model",
                            "lookup:" + kDemo + "model.json", "--protected", "Race", "--outcome", "Salary", "--alpha",
                            "0.1"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--dist"), std::string::npos) << r.err;
}

TEST_F(Cli, FeatureOutsideDagIsValidationError) {
    make_split(500, 4);
    auto args = eval_args("lr");
    args.insert(args.end(), {"--features", "A,X1,tau"});
    const auto r = ust_cmd(args);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("tau"), std::string::npos) << r.err;
}

TEST_F(Cli, BadModelSpecs) {
    make_split(300, 5);
    for (const char* spec : {"knn:k=abc", "svm", "lr:x", "external:"}) {
        const auto r = ust_cmd(eval_args(spec));
        EXPECT_EQ(r.code, 1) << spec << ": " << r.err;
    }
}

TEST_F(Cli, RuntimeFailureExitCode) {
    make_split(300, 6);
    const auto r = ust_cmd(eval_args("external:echo broken >&2; exit 5"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("broken"), std::string::npos) << r.err;
}

TEST_F(Cli, ExternalModelThroughCli) {
    make_split(300, 6);
    auto args = eval_args("external:awk 'NR > 1 { print 0.5 }'");
    args.insert(args.end(), {"--out-json", path("e.json")});
    const auto r = ust_cmd(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = nlohmann::json::parse(slurp(path("e.json")));
    EXPECT_EQ(doc["ust"]["rmse"], doc["nst"]["rmse"]);
}

TEST_F(Cli, EvalWithoutColliderGivesIdenticalRows) {
    make_split(3000, 7);
    auto args = eval_args("nb");
    args.insert(args.end(), {"--exclude", "C", "--out-json", path("e.json"), "--out-records", path("e.csv")});
    const auto r = ust_cmd(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = nlohmann::json::parse(slurp(path("e.json")));
    EXPECT_EQ(doc["nst"]["rmse"], doc["ust"]["rmse"]);
    for (const auto& rec : doc["per_record"]) EXPECT_EQ(std::abs(rec["nds"].get<double>()), rec["ds"].get<double>());
}

TEST_F(Cli, EvalOnSyntheticLogistic) {
    make_split(10'000, 1);
    auto args = eval_args("lr");
    args.insert(args.end(), {"--out-json", path("e.json"), "--examples", "0,1,2"});
    const auto r = ust_cmd(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = nlohmann::json::parse(slurp(path("e.json")));
    EXPECT_LT(doc["ust"]["rmse"].get<double>(), doc["nst"]["rmse"].get<double>());
    EXPECT_NE(r.out.find("RMSE"), std::string::npos);
    EXPECT_NE(r.out.find("True"), std::string::npos);
}

TEST_F(Cli, CheckDagReportsCollider) {
    const auto r = ust_cmd({"check-dag", "--dag", kDemo + "dag.txt", "--protected", "Race", "--outcome", "Salary",
                            "--out-json", path("c.json")});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("collider"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("Suburb"), std::string::npos) << r.out;
    const auto doc = nlohmann::json::parse(slurp(path("c.json")));
    EXPECT_EQ(doc["colliders"], nlohmann::json::array({"Suburb"}));
}

TEST_F(Cli, CheckDagRejectsCycle) {
    std::ofstream(path("cyc.txt")) << "A -> Y\nY -> M\nM -> A\n";
    const auto r = ust_cmd({"check-dag", "--dag", path("cyc.txt"), "--protected", "A", "--outcome", "Y"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("cycle"), std::string::npos) << r.out;
}

TEST_F(Cli, ManifestDigestsMatchSha256sum) {
    auto args = demo_audit(path("r.csv"));
    args.insert(args.end(), {"--alpha", "0.05"});
    ASSERT_EQ(ust_cmd(args).code, 0);
    const auto m = nlohmann::json::parse(slurp(path("r.csv.manifest.json")));
    EXPECT_EQ(m["command"], "audit");
    EXPECT_EQ(m["flags"]["alpha"], "0.05");
    EXPECT_FALSE(m["timestamp"].get<std::string>().empty());
    EXPECT_EQ(m["tool_version"], ust::cli::kToolVersion);
    ASSERT_EQ(m["inputs"].size(), 4u);
    for (const auto& in : m["inputs"]) {
        const std::string cmd = "sha256sum '" + in["path"].get<std::string>() + "'";
        FILE* pipe = ::popen(cmd.c_str(), "r");
        ASSERT_NE(pipe, nullptr);
        char buf[65] = {};
        ASSERT_EQ(std::fread(buf, 1, 64, pipe), 64u);
        ::pclose(pipe);
        EXPECT_EQ(in["sha256"].get<std::string>(), std::string(buf));
    }
}

TEST_F(Cli, ReplayReproducesOutputs) {
    make_split(2000, 8);
    auto args = eval_args("knn:k=7");
    args.insert(args.end(), {"--out-json", path("e.json"), "--out-records", path("e.csv"), "--dist-out", path("d.json")});
    ASSERT_EQ(ust_cmd(args).code, 0);
    const auto json1 = slurp(path("e.json")), csv1 = slurp(path("e.csv")), dist1 = slurp(path("d.json"));
    fs::remove(path("e.json"));
    fs::remove(path("e.csv"));
    fs::remove(path("d.json"));
    const auto r = ust_cmd({"replay", path("d.json.manifest.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(path("e.json")), json1);
    EXPECT_EQ(slurp(path("e.csv")), csv1);
    EXPECT_EQ(slurp(path("d.json")), dist1);
}

TEST_F(Cli, GenManifestRecordsSeed) {
    ASSERT_EQ(ust_cmd({"gen", "--n", "10", "--seed", "99", "--out", path("g.csv"), "--manifest", path("m.json")}).code, 0);
    const auto m = nlohmann::json::parse(slurp(path("m.json")));
    EXPECT_EQ(m["seeds"]["generator"], 99);
    EXPECT_EQ(m["outputs"], nlohmann::json::array({path("g.csv")}));
}

TEST_F(Cli, DemoCollider) {
    const auto r = ust_cmd({"demo-collider", "--out-dir", path("demo")});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"dag.txt", "scm.json", "model.json", "dist.json", "test.csv", "report.csv", "report.json",
                          "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir / "demo" / f)) << f;
    }
    // the bundled copies are the output of this command with default flags
    for (const char* f : {"dag.txt", "scm.json", "model.json", "dist.json", "test.csv"}) {
        EXPECT_EQ(slurp(dir / "demo" / f), slurp(kDemo + f)) << f;
    }
    const auto doc = nlohmann::json::parse(slurp(path("demo/report.json")));
    EXPECT_TRUE(doc["flagged_ids"].empty());
}

TEST_F(Cli, LogVerbosity) {
    ::setenv("UST_LOG", "quiet", 1);
    auto args = demo_audit(path("r.csv"));
    args.insert(args.end(), {"--alpha", "0.05"});
    auto r = ust_cmd(args);
    EXPECT_TRUE(r.err.empty()) << r.err;
    ::setenv("UST_LOG", "info", 1);
    r = ust_cmd(args);
    EXPECT_NE(r.err.find("[info]"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("[warn]"), std::string::npos) << r.err;
}

TEST_F(Cli, HelpAndUnknownCommand) {
    EXPECT_EQ(ust_cmd({"--help"}).code, 0);
    EXPECT_EQ(ust_cmd({"audit", "--help"}).code, 0);
    EXPECT_EQ(ust_cmd({"frobnicate"}).code, 1);
    EXPECT_EQ(ust_cmd({}).code, 1);
}
