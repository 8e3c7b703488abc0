#include "mdwm/cli.hpp"
#include "mdwm/evaluation.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using mdwm::cli::run;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                ("mdwm_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    std::string path(const std::string& name) const { return (root_ / name).string(); }

    // Small but feasible dataset: 8 subjects, 4 classes, 10 trials per class.
    std::string make_dataset(const std::string& name = "ds") {
        const auto r = invoke({"generate", "--seed", "7", "--subjects", "8", "--classes", "4", "--channels", "4",
                               "--samples", "64", "--trials-per-class", "10", "--out", path(name)});
        EXPECT_EQ(r.code, 0) << r.err;
        return path(name);
    }

    fs::path root_;
};

}  // namespace

TEST_F(CliTest, GenerateIsDeterministic) {
    const std::vector<std::string> base{"generate", "--seed", "7", "--subjects", "8", "--classes", "4",
                                        "--channels", "8", "--samples", "256", "--trials-per-class", "40"};
    auto first = base;
    first.insert(first.end(), {"--out", path("a")});
    auto second = base;
    second.insert(second.end(), {"--out", path("b")});
    ASSERT_EQ(invoke(first).code, 0);
    ASSERT_EQ(invoke(second).code, 0);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(path("a"))) {
        EXPECT_EQ(slurp(entry.path()), slurp(fs::path(path("b")) / entry.path().filename())) << entry.path();
        ++files;
    }
    EXPECT_EQ(files, 18U);  // metadata, provenance, 8 x (signal, labels)
    const auto provenance = nlohmann::json::parse(slurp(fs::path(path("a")) / "provenance.json"));
    EXPECT_EQ(provenance["command"], "generate");
    EXPECT_EQ(provenance["config"]["classes"], 4);
}

TEST_F(CliTest, GenerateValidation) {
    EXPECT_NE(invoke({"generate", "--seed", "7"}).code, 0);
    EXPECT_EQ(invoke({"generate", "--classes", "1", "--out", path("x")}).code, mdwm::cli::kExitValidation);
    EXPECT_FALSE(fs::exists(path("x")));
    EXPECT_EQ(invoke({"generate", "--bogus", "--out", path("x")}).code, mdwm::cli::kExitValidation);
    EXPECT_EQ(invoke({}).code, mdwm::cli::kExitValidation);
    EXPECT_EQ(invoke({"--help"}).code, 0);
    EXPECT_EQ(invoke({"--version"}).code, 0);
}

TEST_F(CliTest, EvalRowCountHeaderAndDeterminism) {
    const std::string ds = make_dataset();
    const std::vector<std::string> args{"eval", "--data", ds, "--lambda", "0", "--lambda", "0.7", "--n", "8",
                                        "--reps", "10"};
    auto a = args;
    a.insert(a.end(), {"--out", path("a.csv")});
    auto b = args;
    b.insert(b.end(), {"--out", path("b.csv"), "--jobs", "4"});
    const auto ra = invoke(a);
    ASSERT_EQ(ra.code, 0) << ra.err;
    ASSERT_EQ(invoke(b).code, 0);
    const std::string csv = slurp(path("a.csv"));
    EXPECT_EQ(csv, slurp(path("b.csv")));
    std::istringstream in(csv);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, mdwm::kScoreTableHeader);
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) rows += !line.empty();
    EXPECT_EQ(rows, 320U);
    EXPECT_TRUE(fs::exists(path("a.csv") + ".provenance.json"));
}

TEST_F(CliTest, EvalErrors) {
    const std::string ds = make_dataset();
    const auto infeasible = invoke({"eval", "--data", ds, "--n", "60", "--out", path("x.csv")});
    EXPECT_EQ(infeasible.code, mdwm::cli::kExitValidation);
    EXPECT_NE(infeasible.err.find("S01"), std::string::npos) << infeasible.err;
    EXPECT_EQ(invoke({"eval", "--data", path("missing"), "--out", path("x.csv")}).code, mdwm::cli::kExitIo);
    EXPECT_EQ(invoke({"eval", "--data", ds, "--lambda", "2", "--out", path("x.csv")}).code,
              mdwm::cli::kExitValidation);
    EXPECT_EQ(invoke({"eval", "--data", ds, "--paper-defaults", "--n", "8", "--out", path("x.csv")}).code,
              mdwm::cli::kExitValidation);
    EXPECT_EQ(invoke({"eval", "--data", ds, "--band", "8-12", "--paradigm", "filter_bank", "--out", path("x.csv")})
                  .code,
              mdwm::cli::kExitValidation);
}

TEST_F(CliTest, EvalDefaultGridIsClippedToFeasibility) {
    const std::string ds = make_dataset();
    const auto r = invoke({"eval", "--data", ds, "--reps", "1", "--lambda", "0.7", "--out", path("d.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(r.err.empty());
    std::istringstream in(slurp(path("d.csv")));
    const auto table = mdwm::read_score_table(in);
    for (const auto& row : table.rows) EXPECT_LE(row.n_train, 36);
}

TEST_F(CliTest, MetaOnDominanceFixture) {
    std::ofstream(path("dom.csv")) << mdwm::kScoreTableHeader << "\n"
                                   << "d1,S1,mdwm,8,0.7,0,0.9,0,0\nd1,S1,mdm-target-only,8,0.7,0,0.6,0,0\n"
                                   << "d1,S2,mdwm,8,0.7,0,0.8,0,0\nd1,S2,mdm-target-only,8,0.7,0,0.7,0,0\n"
                                   << "d1,S3,mdwm,8,0.7,0,0.85,0,0\nd1,S3,mdm-target-only,8,0.7,0,0.6,0,0\n"
                                   << "d1,S4,mdwm,8,0.7,0,0.7,0,0\nd1,S4,mdm-target-only,8,0.7,0,0.65,0,0\n"
                                   << "d1,S5,mdwm,8,0.7,0,0.95,0,0\nd1,S5,mdm-target-only,8,0.7,0,0.5,0,0\n";
    std::ofstream(path("dom2.csv")) << mdwm::kScoreTableHeader << "\n"
                                    << "d2,S1,mdwm,8,0.7,0,0.7,0,0\nd2,S1,mdm-target-only,8,0.7,0,0.6,0,0\n"
                                    << "d2,S2,mdwm,8,0.7,0,0.75,0,0\nd2,S2,mdm-target-only,8,0.7,0,0.6,0,0\n"
                                    << "d2,S3,mdwm,8,0.7,0,0.72,0,0\nd2,S3,mdm-target-only,8,0.7,0,0.7,0,0\n"
                                    << "d2,S4,mdwm,8,0.7,0,0.8,0,0\nd2,S4,mdm-target-only,8,0.7,0,0.5,0,0\n"
                                    << "d2,S5,mdwm,8,0.7,0,0.66,0,0\nd2,S5,mdm-target-only,8,0.7,0,0.65,0,0\n";
    const auto r = invoke({"meta", "--table", path("dom.csv"), "--table", path("dom2.csv"), "--out", path("m.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string summary = slurp(path("m.csv"));
    // Each dataset: all five differences positive, exact p = 1/32.
    EXPECT_NE(summary.find("d1,5,"), std::string::npos) << summary;
    EXPECT_NE(summary.find(",0.03125,*\n"), std::string::npos) << summary;
    EXPECT_NE(summary.find("\ncombined,10,"), std::string::npos) << summary;
    EXPECT_NE(summary.find(",**\n"), std::string::npos) << summary;
    EXPECT_NE(r.out.find("combined"), std::string::npos);

    const auto single = invoke({"meta", "--table", path("dom.csv"), "--out", path("s.csv")});
    ASSERT_EQ(single.code, 0) << single.err;
    EXPECT_NE(slurp(path("s.csv")).find("\ncombined,5,"), std::string::npos);
    EXPECT_NE(slurp(path("s.csv")).find(",0.03125,*\n"), std::string::npos);
}

TEST_F(CliTest, MetaFailures) {
    std::ofstream(path("same.csv")) << mdwm::kScoreTableHeader << "\n"
                                    << "d1,S1,mdwm,8,0.7,0,0.9,0,0\nd1,S1,mdm-target-only,8,0.7,0,0.9,0,0\n"
                                    << "d1,S2,mdwm,8,0.7,0,0.8,0,0\nd1,S2,mdm-target-only,8,0.7,0,0.8,0,0\n"
                                    << "d1,S3,mdwm,8,0.7,0,0.7,0,0\nd1,S3,mdm-target-only,8,0.7,0,0.7,0,0\n";
    const auto same = invoke({"meta", "--table", path("same.csv"), "--out", path("m.csv")});
    EXPECT_NE(same.code, 0);
    EXPECT_NE(same.err.find("zero variance"), std::string::npos) << same.err;

    const auto missing = invoke({"meta", "--table", path("same.csv"), "--lambda", "0.3", "--out", path("m.csv")});
    EXPECT_EQ(missing.code, mdwm::cli::kExitValidation);
    EXPECT_NE(missing.err.find("lambda=0.3"), std::string::npos) << missing.err;

    EXPECT_EQ(invoke({"meta", "--table", path("nope.csv"), "--out", path("m.csv")}).code, mdwm::cli::kExitIo);
}

TEST_F(CliTest, ConfigFile) {
    std::ofstream(path("gen.json")) << R"({"seed": 3, "subjects": 3, "classes": 2, "channels": 3,
                                          "samples": 16, "trials-per-class": 4})";
    const auto ok = invoke({"generate", "--config", path("gen.json"), "--out", path("c")});
    ASSERT_EQ(ok.code, 0) << ok.err;
    const auto provenance = nlohmann::json::parse(slurp(fs::path(path("c")) / "provenance.json"));
    EXPECT_EQ(provenance["config"]["seed"], 3);
    EXPECT_EQ(provenance["config"]["subjects"], 3);

    const auto conflict = invoke({"generate", "--config", path("gen.json"), "--seed", "4", "--out", path("d")});
    EXPECT_EQ(conflict.code, mdwm::cli::kExitValidation);
    EXPECT_NE(conflict.err.find("seed"), std::string::npos) << conflict.err;

    std::ofstream(path("bad.json")) << R"({"colour": 3})";
    EXPECT_EQ(invoke({"generate", "--config", path("bad.json"), "--out", path("e")}).code,
              mdwm::cli::kExitValidation);
    std::ofstream(path("broken.json")) << "{";
    EXPECT_NE(invoke({"generate", "--config", path("broken.json"), "--out", path("e")}).code, 0);
}

TEST_F(CliTest, InputsAreNotModified) {
    const std::string ds = make_dataset();
    std::map<std::string, std::string> before;
    for (const auto& entry : fs::directory_iterator(ds)) before[entry.path().filename()] = slurp(entry.path());
    ASSERT_EQ(invoke({"eval", "--data", ds, "--n", "4", "--lambda", "0.7", "--reps", "2", "--out", path("t.csv")})
                  .code,
              0);
    std::map<std::string, std::string> after;
    for (const auto& entry : fs::directory_iterator(ds)) after[entry.path().filename()] = slurp(entry.path());
    EXPECT_EQ(before, after);
}
