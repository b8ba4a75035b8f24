#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "keysim/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = keysim::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return (reftest::fixture_dir() / (name + ".bundle")).string(); }
std::string corpus(const std::string& file) { return (reftest::corpus_dir() / file).string(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "keysim_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"keyir", fixture("diamond")}).code, 1) << "missing --func";
  EXPECT_EQ(run({"exec", fixture("diamond"), "--func", "diamond", "--runs", "0"}).code, 1);
  EXPECT_EQ(run({"compare", "no-colon", fixture("diamond") + ":diamond"}).code, 1);
  EXPECT_EQ(run({"compare", "a:b", "c:d", "--node-threshold", "1.5"}).code, 1);
}

TEST(Cli, HelpIsSuccess) { EXPECT_EQ(run({"--help"}).code, 0); }

TEST(Cli, InputErrors) {
  auto r = run({"keyir", "/nonexistent/x.bundle", "--func", "f"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  r = run({"keyir", fixture("diamond"), "--func", "nope"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope"), std::string::npos);
  EXPECT_EQ(run({"simplify", "var0 +"}).code, 2);
}

TEST(Cli, SelfCompareIsOne) {
  auto target = fixture("branch_join") + ":branch_join";
  auto r = run({"compare", target, target});
  ASSERT_EQ(r.code, 0) << r.err;
  auto doc = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(doc["aggregate"].get<double>(), 1.0);
  EXPECT_EQ(doc["verdict"], "similar");
}

TEST(Cli, ReportsAreReproducible) {
  auto target_a = corpus("x86_gcc.bundle") + ":dup_buffer";
  auto target_b = corpus("arm.bundle") + ":dup_buffer";
  auto p1 = scratch("r1.json"), p2 = scratch("r2.json");
  ASSERT_EQ(run({"compare", target_a, target_b, "--seed", "7", "--report", p1.string()}).code, 0);
  ASSERT_EQ(run({"compare", target_a, target_b, "--seed", "7", "--report", p2.string()}).code, 0);
  EXPECT_FALSE(slurp(p1).empty());
  EXPECT_EQ(slurp(p1), slurp(p2));
  auto x = run({"exec", fixture("loop_nested"), "--func", "loop_nested", "--runs", "5"});
  auto y = run({"exec", fixture("loop_nested"), "--func", "loop_nested", "--runs", "5"});
  EXPECT_EQ(x.out, y.out);
}

TEST(Cli, EveryDocumentCarriesSchemaVersion) {
  const std::string d = fixture("diamond");
  for (auto args : std::vector<std::vector<std::string>>{
           {"lift", d, "--func", "diamond"},
           {"exec", d, "--func", "diamond"},
           {"keyir", d, "--func", "diamond"},
           {"compare", d + ":diamond", d + ":diamond"},
           {"bench", corpus("smoke.tsv")}}) {
    auto r = run(args);
    ASSERT_EQ(r.code, 0) << args[0] << ": " << r.err;
    auto doc = nlohmann::json::parse(r.out);
    EXPECT_EQ(doc["schema_version"], 1) << args[0];
    EXPECT_EQ(nlohmann::json::parse(doc.dump()), doc);
  }
}

TEST(Cli, ExecDocumentListsCanonicalTexts) {
  auto r = run({"exec", fixture("loop_self"), "--func", "loop_self"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("iter(var0 + 0x1)"), std::string::npos);
}

TEST(Cli, KeyirDocument) {
  auto r = run({"keyir", fixture("diamond"), "--func", "diamond"});
  ASSERT_EQ(r.code, 0);
  auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["nodes"].size(), 4u);
  EXPECT_EQ(doc["edges"].size(), 4u);
  EXPECT_EQ(doc["nodes"][0]["kind"], "COMPARE");
}

TEST(Cli, SmokeBenchIsPerfect) {
  auto path = scratch("bench.json");
  auto r = run({"bench", corpus("smoke.tsv"), "--report", path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto doc = nlohmann::json::parse(slurp(path));
  EXPECT_EQ(doc["total"], 4);
  EXPECT_DOUBLE_EQ(doc["accuracy"].get<double>(), 1.0);
  const auto& c = doc["confusion"];
  EXPECT_EQ(c["true_positive"].get<int>() + c["true_negative"].get<int>() + c["false_positive"].get<int>() +
                c["false_negative"].get<int>(),
            4);
  EXPECT_NE(r.out.find("accuracy 1"), std::string::npos);
}

TEST(Cli, BenchRejectsMalformedRows) {
  auto path = scratch("bad.tsv");
  std::ofstream(path) << "a.bundle f b.bundle g maybe\n";
  EXPECT_EQ(run({"bench", path.string()}).code, 2);
}

TEST(Cli, SimplifyPrintsCanonicalText) {
  auto r = run({"simplify", "(var0 + 0x3) - 0x3"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "var0\n");
}

TEST(Cli, UnsupportedInstructionIsAWarning) {
  auto path = scratch("cpuid.bundle");
  std::ofstream(path) << "program p\nfunction f arch=x86_64 entry=0\nblock 0 @0x1000 succ=\n"
                         "0x1000 mov rax, rdi\n0x1003 cpuid\n0x1005 ret\n";
  auto r = run({"keyir", path.string(), "--func", "f"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning: 0x1003: unsupported mnemonic 'cpuid'"), std::string::npos) << r.err;
}

TEST(Cli, InvalidCfgIsAnInputError) {
  auto path = scratch("badcfg.bundle");
  std::ofstream(path) << "program p\nfunction f arch=x86_64 entry=0\nblock 0 @0x1000 succ=7:ft\n0x1000 ret\n";
  auto r = run({"exec", path.string(), "--func", "f"});
  EXPECT_EQ(r.code, 2);
}
