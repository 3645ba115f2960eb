#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "glowgs/io.hpp"

namespace fs = std::filesystem;
using glowgs::cli::run;

namespace {

struct Captured {
    int code = 0;
    std::string out;
    std::string err;
};

Captured invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "glowgs");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    testing::internal::CaptureStdout();
    testing::internal::CaptureStderr();
    Captured c;
    c.code = run(static_cast<int>(argv.size()), argv.data());
    c.out = testing::internal::GetCapturedStdout();
    c.err = testing::internal::GetCapturedStderr();
    return c;
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("glowgs_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }
    std::string operator/(const std::string& s) const { return (path_ / s).string(); }

private:
    fs::path path_;
};

std::string read_file(const std::string& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Cli, NoArgumentsIsUsageError) { EXPECT_EQ(invoke({}).code, glowgs::cli::kUsage); }

TEST(Cli, UnknownSubcommandIsUsageError) { EXPECT_EQ(invoke({"frobnicate"}).code, glowgs::cli::kUsage); }

TEST(Cli, MissingRequiredOptionIsUsageError) { EXPECT_EQ(invoke({"render", "--model", "x"}).code, glowgs::cli::kUsage); }

TEST(Cli, OutOfRangeLambdaIsUsageError) {
    EXPECT_EQ(invoke({"train", "--views-dir", ".", "--out", "x", "--lambda", "1.5"}).code, glowgs::cli::kUsage);
}

TEST(Cli, HelpShowsDefaults) {
    const Captured train = invoke({"train", "--help"});
    EXPECT_EQ(train.code, 0);
    EXPECT_NE(train.out.find("0.01"), std::string::npos);
    const Captured ingest = invoke({"ingest", "--help"});
    EXPECT_EQ(ingest.code, 0);
    EXPECT_NE(ingest.out.find("1.5"), std::string::npos);
}

TEST(Cli, MissingFileIsDataError) {
    TempDir dir;
    const Captured c = invoke({"render", "--model", dir / "nope.gssc", "--camera", dir / "nope.json", "--out", dir / "o.ppm"});
    EXPECT_EQ(c.code, glowgs::cli::kDataError);
    EXPECT_NE(c.err.find("error:"), std::string::npos);
}

TEST(Cli, CorruptBankIsDataError) {
    TempDir dir;
    {
        std::ofstream f(dir / "bad.gsfb", std::ios::binary);
        f << "NOTABANKFILE-------------------------";
    }
    const Captured c = invoke({"train", "--views-dir", dir.path().string(), "--bank", dir / "bad.gsfb", "--out", dir / "o"});
    EXPECT_EQ(c.code, glowgs::cli::kDataError);
}

TEST(Cli, HeaderIsDeterministicAndTracksOptions) {
    TempDir dir;
    auto header = [&](const std::string& seed) {
        const Captured c = invoke({"gen-scene", "--out", dir / "g", "--views", "1", "--test", "0", "--candidates", "0",
                                   "--seed", seed});
        EXPECT_EQ(c.code, 0) << c.err;
        return c.err.substr(0, c.err.find('\n'));
    };
    const std::string a = header("3");
    EXPECT_EQ(a, header("3"));
    EXPECT_NE(a, header("4"));
    EXPECT_NE(a.find("seed=3"), std::string::npos);
    EXPECT_NE(a.find("config="), std::string::npos);
}

TEST(Cli, Fnv1aReferenceValues) {
    EXPECT_EQ(glowgs::cli::fnv1a(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(glowgs::cli::fnv1a("a"), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(glowgs::cli::fnv1a("foobar"), 0x85944171f73967e8ull);
}

TEST(Cli, EndToEndPipeline) {
    TempDir dir;
    const std::string data = dir / "data";
    ASSERT_EQ(invoke({"gen-scene", "--spec", "street", "--out", data, "--views", "3", "--test", "1", "--candidates", "3"}).code, 0);
    ASSERT_TRUE(fs::exists(data + "/test/000_glow.pgm"));

    const Captured ing = invoke({"ingest", "--ref", data + "/train/000.ppm", "--candidates", data + "/candidates",
                                 "--report", dir / "ingest.json"});
    ASSERT_EQ(ing.code, 0) << ing.err;
    const auto report = nlohmann::json::parse(read_file(dir / "ingest.json"));
    EXPECT_EQ(report["rounds"].get<int>(), 1);
    EXPECT_EQ(report["frame_distances"].size(), 3u);

    ASSERT_EQ(invoke({"build-bank", "--views", data + "/candidates", "--out", dir / "bank.gsfb"}).code, 0);
    const auto bank = glowgs::io::read_bank(glowgs::io::load_bytes(dir / "bank.gsfb"));
    EXPECT_TRUE(bank.size() > 0 && bank.size() % 3 == 0);

    const Captured tr = invoke({"train", "--views-dir", data + "/train", "--bank", dir / "bank.gsfb", "--iters", "12",
                                "--init-count", "150", "--out", dir / "model.gssc", "--log", dir / "log.jsonl"});
    ASSERT_EQ(tr.code, 0) << tr.err;
    std::istringstream log(read_file(dir / "log.jsonl"));
    int lines = 0;
    for (std::string line; std::getline(log, line);) {
        EXPECT_TRUE(nlohmann::json::parse(line).contains("iter"));
        ++lines;
    }
    EXPECT_GT(lines, 0);

    fs::create_directories(dir.path() / "pred");
    const Captured rd = invoke({"render", "--model", dir / "model.gssc", "--camera", data + "/test/000.json", "--out",
                                dir / "pred/000.ppm"});
    ASSERT_EQ(rd.code, 0) << rd.err;

    const Captured ev = invoke({"eval", "--pred", dir / "pred", "--gt", data + "/test", "--method", "m"});
    ASSERT_EQ(ev.code, 0) << ev.err;
    const auto row = nlohmann::json::parse(ev.out.substr(0, ev.out.find('\n')));
    EXPECT_TRUE(row.contains("psnr"));
    EXPECT_EQ(row["method"], "m");
    EXPECT_TRUE(row.contains("glow"));
}
