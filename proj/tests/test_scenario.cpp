#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "delaymoc/error.hpp"
#include "delaymoc/io.hpp"
#include "delaymoc/scenario.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

using namespace delaymoc;
namespace sc = delaymoc::scenario;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kScenarios = DELAYMOC_SCENARIO_DIR;
const fs::path kBinary = DELAYMOC_BINARY;

struct TempDir {
  fs::path path;
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "delaymoc-test-XXXXXX").string();
    path = mkdtemp(tmpl.data());
  }
  ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const int rc = std::system((kBinary.string() + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::set<std::string> files_in(const fs::path& dir) {
  std::set<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out.insert(e.path().filename().string());
  return out;
}

void copy_params(const fs::path& dir) { fs::copy_file(kScenarios / "params_default.json", dir / "params.json"); }

}  // namespace

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, -0.208, 3.1536e13, 1.0 / 3.0}) CHECK(std::stod(io::format_number(v)) == v);
  CHECK(io::format_number(std::nan("")) == "nan");
}

TEST_CASE("git blob hash matches git's object id") {
  CHECK(io::git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(io::git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("every shipped scenario validates") {
  int n = 0;
  for (const auto& e : fs::directory_iterator(kScenarios)) {
    if (e.path().extension() != ".json" || e.path().stem() == "params_default") continue;
    INFO(e.path().string());
    CHECK(sc::validate_file(e.path()).empty());
    ++n;
  }
  CHECK(n >= 14);
}

TEST_CASE("validation flags problems without running") {
  TempDir d;
  copy_params(d.path);
  SUBCASE("decreasing sweep grid") {
    write(d.path / "s.json",
          R"({"name":"s","params":"params.json","operation":"sweep","options":{"axis":"f1_sv","grid":[-0.2,-0.21,-0.22]}})");
    const auto diag = sc::validate_file(d.path / "s.json");
    REQUIRE(diag.size() == 1);
    CHECK(diag[0].find("grid") != std::string::npos);
  }
  SUBCASE("missing params file") {
    write(d.path / "s.json", R"({"name":"s","params":"absent.json","operation":"equilibria"})");
    const auto diag = sc::validate_file(d.path / "s.json");
    REQUIRE(!diag.empty());
    CHECK(diag[0].find("absent.json") != std::string::npos);
  }
  SUBCASE("unknown operation and option") {
    write(d.path / "s.json",
          R"({"name":"s","params":"params.json","operation":"bogus"})");
    CHECK(!sc::validate_file(d.path / "s.json").empty());
    write(d.path / "t.json",
          R"({"name":"t","params":"params.json","operation":"simulate","options":{"horizon":5}})");
    CHECK(!sc::validate_file(d.path / "t.json").empty());
  }
  SUBCASE("all violations are reported") {
    write(d.path / "s.json",
          R"({"params":"absent.json","operation":"sweep","options":{"axis":"zz","grid":[]}})");
    CHECK(sc::validate_file(d.path / "s.json").size() >= 3);
  }
  SUBCASE("load throws a config error") {
    write(d.path / "s.json", R"({"name":"s","params":"absent.json","operation":"equilibria"})");
    try {
      sc::load(d.path / "s.json");
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigError);
    }
  }
  SUBCASE("seed params replace the referenced file") {
    write(d.path / "s.json", R"({"name":"s","params":"absent.json","operation":"equilibria"})");
    CHECK(sc::validate_file(d.path / "s.json", d.path / "params.json").empty());
  }
}

TEST_CASE("equilibria scenario reports the upper-branch steady state") {
  TempDir d;
  const sc::Scenario s = sc::load(kScenarios / "equilibria.json");
  const sc::RunReport r = sc::run(s, {d.path, 0});
  CHECK(r.exit_code() == sc::kExitSuccess);
  const json out = json::parse(slurp(r.out_dir / "equilibria.json"));
  REQUIRE(out["equilibria"].size() == 1);
  CHECK(out["equilibria"][0]["m_sv"].get<double>() == doctest::Approx(20.6097).epsilon(1e-4));
}

TEST_CASE("report lists exactly the files written and reruns are bit-identical") {
  TempDir a, b;
  for (const char* name : {"simulate.json", "sweep.json"}) {
    INFO(name);
    const sc::Scenario s = sc::load(kScenarios / name);
    const sc::RunReport ra = sc::run(s, {a.path, 0});
    const sc::RunReport rb = sc::run(s, {b.path, 2});
    CHECK(ra.exit_code() == sc::kExitSuccess);
    const json rep = json::parse(slurp(ra.out_dir / "report.json"));
    std::set<std::string> listed;
    for (const auto& f : rep["artifacts"]) listed.insert(f.get<std::string>());
    CHECK(listed == files_in(ra.out_dir));
    CHECK(ra.config_hash == rb.config_hash);
    for (const auto& f : listed) {
      if (f == "report.json") continue;
      CHECK_MESSAGE(slurp(ra.out_dir / f) == slurp(rb.out_dir / f), f);
    }
  }
}

TEST_CASE("command-line exit codes") {
  TempDir d;
  copy_params(d.path);
  write(d.path / "bad.json", "{ not json");
  CHECK(run_cli("validate " + (d.path / "bad.json").string()) == 2);
  CHECK(run_cli("run " + (d.path / "bad.json").string() + " --out " + (d.path / "out").string()) == 2);
  CHECK_FALSE(fs::exists(d.path / "out" / "bad"));
  CHECK(run_cli("validate " + (kScenarios / "fig4c.json").string()) == 0);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("run " + (kScenarios / "equilibria.json").string() + " --workers 0") == 2);

  write(d.path / "eq.json", R"({"name":"eq","params":"params.json","operation":"equilibria"})");
  CHECK(run_cli("run " + (d.path / "eq.json").string() + " --out " + (d.path / "out").string()) == 0);
  CHECK(fs::exists(d.path / "out" / "eq" / "report.json"));

  write(d.path / "fail.json",
        R"({"name":"fail","params":"params.json","overrides":{"f1_sv":0.1},"operation":"stability"})");
  CHECK(run_cli("run " + (d.path / "fail.json").string() + " --out " + (d.path / "out").string()) == 3);
  CHECK(fs::exists(d.path / "out" / "fail" / "report.json"));
}
