#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ktrunc_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
  const std::string cmd = std::string("KTRUNC_LOG=quiet ") + KTRUNC_CLI_PATH + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const char* kEval = R"({"dim":3,"partition":[1,1],"sign":"+","s":0.5,
  "field":{"type":"gaussian","alpha":1},"points":[[0,0,0],[0.3,0,0]],"seed":4})";

const char* kSolve = R"({"domain":{"type":"ball","center":[0,0],"R":1},"partition":[1,1],"sign":"+",
  "s":0.5,"f":-2,"grid":{"h":0.125}})";

}  // namespace

TEST(Cli, EvalWritesDeterministicOutputs) {
  TempDir t;
  write(t.path / "c.json", kEval);
  ASSERT_EQ(run("eval --config " + (t.path / "c.json").string() + " --out " + (t.path / "a").string()), 0);
  ASSERT_EQ(run("eval --config " + (t.path / "c.json").string() + " --out " + (t.path / "b").string() + " --jobs 2"), 0);
  EXPECT_EQ(slurp(t.path / "a" / "eval.json"), slurp(t.path / "b" / "eval.json"));
  auto j = nlohmann::json::parse(slurp(t.path / "a" / "eval.json"));
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("seed"), 4);
  EXPECT_EQ(j.at("results").size(), 2u);
  EXPECT_TRUE(fs::exists(t.path / "a" / "eval.csv"));
}

TEST(Cli, CorruptConfigExitsOneWithoutOutputs) {
  TempDir t;
  write(t.path / "bad.json", "{\"dim\": 3, \"partition\": [1,");
  EXPECT_EQ(run("eval --config " + (t.path / "bad.json").string() + " --out " + (t.path / "o").string()), 1);
  EXPECT_FALSE(fs::exists(t.path / "o"));
  write(t.path / "bad2.json", R"({"dim":2,"partition":[3],"s":0.5,"field":1,"points":[[0,0]]})");
  EXPECT_EQ(run("eval --config " + (t.path / "bad2.json").string() + " --out " + (t.path / "o").string()), 1);
  EXPECT_FALSE(fs::exists(t.path / "o"));
  EXPECT_EQ(run("eval --config " + (t.path / "missing.json").string() + " --out " + (t.path / "o").string()), 1);
  EXPECT_EQ(run("frobnicate"), 1);
}

TEST(Cli, SolveProducesGridAndReport) {
  TempDir t;
  write(t.path / "s.json", kSolve);
  ASSERT_EQ(run("solve --config " + (t.path / "s.json").string() + " --out " + (t.path / "o").string()), 0);
  for (const char* f : {"solution.csv", "solution.json", "report.json"}) EXPECT_TRUE(fs::exists(t.path / "o" / f)) << f;
  auto rep = nlohmann::json::parse(slurp(t.path / "o" / "report.json"));
  EXPECT_TRUE(rep.at("converged").get<bool>());
  EXPECT_EQ(rep.at("envelope").at("violations"), 0);
}

TEST(Cli, SolveNonConvergenceExitsTwo) {
  TempDir t;
  std::string cfg = kSolve;
  cfg.insert(cfg.rfind('}'), R"(,"solver":{"max_iter":2})");
  write(t.path / "s.json", cfg);
  EXPECT_EQ(run("solve --config " + (t.path / "s.json").string() + " --out " + (t.path / "o").string()), 2);
}

TEST(Cli, RegimeMismatchExitsOne) {
  TempDir t;
  write(t.path / "e.json", R"({"domain":{"type":"ball","center":[0,0],"R":1},"partition":[1],"sign":"-","s":0.5,"grid":{"h":0.125}})");
  EXPECT_EQ(run("eigen --config " + (t.path / "e.json").string() + " --out " + (t.path / "o").string()), 1);
  EXPECT_FALSE(fs::exists(t.path / "o"));
}

TEST(Cli, VerifySingleSuite) {
  TempDir t;
  write(t.path / "v.json", "{}");
  ASSERT_EQ(run("verify --config " + (t.path / "v.json").string() + " --suite fixtures --out " + (t.path / "o").string()), 0);
  auto j = nlohmann::json::parse(slurp(t.path / "o" / "verify.json"));
  EXPECT_EQ(j.at("command"), "verify");
  EXPECT_EQ(run("verify --config " + (t.path / "v.json").string() + " --suite bogus --out " + (t.path / "p").string()), 1);
}
