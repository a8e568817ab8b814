// End to end: instrument a corpus program with the tool, build it against the
// hook library with a real OpenMP compiler, and run it.

#include <gtest/gtest.h>

#include <cstdio>

#include "pdttagger/pdttagger.hpp"
#include "support.hpp"

using namespace pdttagger;
namespace fs = std::filesystem;

namespace {

struct Proc {
  int status = -1;
  std::string out;
};

Proc sh(const std::string& cmd) {
  Proc p;
  FILE* f = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!f) return p;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, f)) > 0;) p.out.append(buf, n);
  p.status = ::pclose(f);
  return p;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string compile(const fs::path& src, const fs::path& exe, bool instrumented) {
  std::string cmd = std::string(PDTTAGGER_C_COMPILER) + " -O1 " + PDTTAGGER_OPENMP_FLAGS + " -o " + q(exe) + " " +
                    q(src);
  if (instrumented) {
    cmd += " -I" + q(testsupport::source_dir() / "include") + " " + q(PDTTAGGER_RT_LIBRARY) + " -lstdc++ -lpthread";
  }
  return cmd + " -lm";
}

class Corpus : public testing::TestWithParam<std::string> {};

}  // namespace

TEST_P(Corpus, InstrumentedBuildMatchesPlainBuild) {
  const auto name = GetParam();
  testsupport::TempDir dir;
  const auto src = testsupport::fixture(name + ".c");

  const auto plain = sh(compile(src, dir / "plain", false));
  ASSERT_EQ(plain.status, 0) << plain.out;
  const auto instr = sh(std::string(PDTTAGGER_TOOL) + " instrument " + q(src) + " --out-dir " + q(dir / "gen"));
  ASSERT_EQ(instr.status, 0) << instr.out;
  const auto built = sh(compile(dir / "gen" / (name + ".c"), dir / "tagged", true));
  ASSERT_EQ(built.status, 0) << built.out;

  const auto expected = sh("OMP_NUM_THREADS=2 " + q(dir / "plain"));
  ASSERT_EQ(expected.status, 0) << expected.out;
  const auto env = "OMP_NUM_THREADS=2 PDTTAGGER_OUT=" + q(dir / "out") + " PDTTAGGER_MANIFEST=" +
                   q(dir / "gen" / "pdttagger.manifest") + " PDTTAGGER_VIZ_OUTPUT=TRUE ";
  const auto got = sh(env + q(dir / "tagged"));
  ASSERT_EQ(got.status, 0) << got.out;
  EXPECT_EQ(got.out, expected.out);

  const auto manifest = parse_manifest(text::read_file(dir / "gen" / "pdttagger.manifest"));
  const auto result = parse_result(text::read_file(dir / "out" / "pdttagger_result.txt"));
  EXPECT_TRUE(result.unbalanced_regions.empty());
  EXPECT_EQ(result.default_threads, 2);
  std::set<RegionId> seen;
  for (const auto& [key, p] : result.profiles) seen.insert(key.first);
  for (auto id : seen) EXPECT_TRUE(id >= 0 && id < static_cast<RegionId>(manifest.entries.size())) << id;
  EXPECT_TRUE(testsupport::check_xml(text::read_file(dir / "out" / "pdttagger_result.viz")).ok);
}

INSTANTIATE_TEST_SUITE_P(All, Corpus, testing::ValuesIn(testsupport::corpus_names()));

TEST(CorpusPlan, PlanOverridesTheTeamSize) {
  testsupport::TempDir dir;
  const auto src = testsupport::fixture("sparselu.c");
  ASSERT_EQ(sh(std::string(PDTTAGGER_TOOL) + " instrument " + q(src) + " --out-dir " + q(dir / "gen")).status, 0);
  const auto built = sh(compile(dir / "gen" / "sparselu.c", dir / "tagged", true));
  ASSERT_EQ(built.status, 0) << built.out;
  text::write_file_atomic(dir / "plan.txt", "pdtplan v1 2\n1 3\n");
  const auto run = sh("PDTTAGGER_PLAN=" + q(dir / "plan.txt") + " PDTTAGGER_OUT=" + q(dir / "out") + " " +
                      q(dir / "tagged"));
  ASSERT_EQ(run.status, 0) << run.out;
  const auto result = parse_result(text::read_file(dir / "out" / "pdttagger_result.txt"));
  ASSERT_EQ(result.profiles.size(), 3u);
  EXPECT_TRUE(result.profiles.count({0, 2}));
  EXPECT_TRUE(result.profiles.count({1, 3}));
  EXPECT_TRUE(result.profiles.count({2, 2}));
}
