#include "gradphi/io.hpp"
#include "gradphi/numeric.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gradphi;

namespace {

std::string read_all(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const char* kValidConfig = R"(
[lattice]
d = 2
n = 1..3
[potential]
spec = logcosh:1.0
[tilt]
q = 1,0
[chain]
steps = 5000
burn_in = 500
seed = 9
[experiment]
which = nustar
)";

}  // namespace

TEST_CASE("config parse: defaults, ranges, potentials") {
  const Config cfg = config_parse(kValidConfig);
  CHECK(cfg.d == 2);
  CHECK(cfg.n_lo == 1);
  CHECK(cfg.n_hi == 3);
  CHECK(cfg.potential.kind() == PotentialKind::logcosh);
  CHECK(cfg.potential.a() == 1.0);
  CHECK(cfg.tilt_is_q);
  CHECK(cfg.tilt[0] == 1.0);
  CHECK(cfg.chain.steps == 5000);
  CHECK(cfg.experiment == "nustar");

  const Config minimal = config_parse("[lattice]\nd = 2\nn = 1\n");
  CHECK(minimal.tilt.size() == 2);
  CHECK(minimal.tilt.norm() == 0.0);
  CHECK(minimal.chain.steps > minimal.chain.burn_in);
}

TEST_CASE("config parse: rejections with diagnostics") {
  CHECK_THROWS_WITH_AS(config_parse(""), "empty configuration",
                       std::invalid_argument);
  // the model starts at dimension 2
  CHECK_THROWS(config_parse("[lattice]\nd = 1\nn = 1\n"));
  CHECK_THROWS(config_parse("[lattice]\nd = 2\nn = 7\n"));
  CHECK_THROWS(config_parse("[lattice]\nd = 3\nn = 4\n"));
  CHECK_THROWS(config_parse("[lattice]\nd = 2\nn = 1\n[potential]\nspec = morse:1\n"));
  CHECK_THROWS(config_parse("[lattice]\nd = 2\nwidth = 5\n"));
  CHECK_THROWS(config_parse("[chaos]\nx = 1\n"));
  CHECK_THROWS(config_parse("[lattice]\nd = 2\nn = 1\n[tilt]\np = 1,0,0\n"));
  try {
    config_parse("[lattice]\nd = two\n");
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("csv headers are pinned") {
  const auto dir = std::filesystem::temp_directory_path() / "gradphi_io_test";
  std::filesystem::create_directories(dir);

  SurfaceTensionEstimate est;
  est.quantity = "nu";
  est.d = 2;
  est.n = 1;
  est.tilt = Eigen::Vector2d(1, 0);
  est.value = 0.5;
  est.method = "exact-oracle";
  const auto tension = (dir / "tension.csv").string();
  write_tension_csv({est}, tension);
  CHECK(read_all(tension).rfind(
            "quantity,d,n,tilt_0,tilt_1,value,stderr,method,seed\n", 0) == 0);

  const auto series = (dir / "series.csv").string();
  LevelSeries s;
  s.levels = {1, 2};
  s.values = {0.25, 0.125};
  s.stderrs = {0, 0};
  write_series_csv(s, series);
  CHECK(read_all(series).rfind("level,value,stderr\n", 0) == 0);

  Trace t;
  t.names = {"energy"};
  t.series = {{1.0, 2.0}};
  const auto trace = (dir / "trace.csv").string();
  write_trace_csv(t, 0, trace);
  CHECK(read_all(trace).rfind("chain,step,energy\n", 0) == 0);

  Defect d;
  d.n = 1;
  d.tilt = Eigen::Vector2d(0, 0);
  const auto defect = (dir / "defects.csv").string();
  write_defects_csv({d}, defect);
  CHECK(read_all(defect).rfind("n,tilt_0,tilt_1,tau,stderr\n", 0) == 0);

  std::filesystem::remove_all(dir);
}

TEST_CASE("check reports round-trip and aggregate") {
  const auto dir = std::filesystem::temp_directory_path() / "gradphi_rep_test";
  std::filesystem::create_directories(dir);

  CheckReport a;
  a.id = "alpha";
  a.pass = true;
  a.margin = 0.5;
  a.provenance = "oracle";
  a.constants["C"] = 1.25;
  CheckReport b;
  b.id = "beta";
  b.pass = false;
  b.notes = "expected failure";
  CheckReport c;
  c.id = "gamma";
  c.inconclusive = true;

  write_check_reports_json({a}, (dir / "one.report.json").string());
  write_check_reports_json({b, c}, (dir / "two.report.json").string());

  const auto back =
      read_check_reports_json((dir / "one.report.json").string());
  REQUIRE(back.size() == 1);
  CHECK(back[0].id == "alpha");
  CHECK(back[0].constants.at("C") == 1.25);
  CHECK(back[0].pass);

  const auto summary = aggregate_reports(
      dir.string(), (dir / "summary.csv").string());
  CHECK(summary.passed == 1);
  CHECK(summary.failed == 1);
  CHECK(summary.inconclusive == 1);
  CHECK(read_all((dir / "summary.csv").string())
            .rfind("id,pass,inconclusive,margin,provenance,notes\n", 0) == 0);

  std::filesystem::remove_all(dir);
}

TEST_CASE("manifest carries config hash and output digests") {
  const auto dir = std::filesystem::temp_directory_path() / "gradphi_man_test";
  std::filesystem::create_directories(dir);
  const auto file = (dir / "data.csv").string();
  {
    std::ofstream os(file);
    os << "level,value,stderr\n1,0.5,0\n";
  }
  Manifest m;
  m.experiment = "rate";
  m.config_text = "[lattice]\nd = 2\nn = 1\n";
  m.config_hash = fnv1a64_str(m.config_text);
  m.started_at = iso_timestamp();
  m.finished_at = iso_timestamp();
  m.outputs.emplace_back(file, file_content_hash(file));
  write_manifest(m, (dir / "manifest.json").string());
  const std::string text = read_all((dir / "manifest.json").string());
  CHECK(text.find("config_hash") != std::string::npos);
  CHECK(text.find("outputs") != std::string::npos);
  // same content, same digest
  CHECK(file_content_hash(file) == file_content_hash(file));
  std::filesystem::remove_all(dir);
}
