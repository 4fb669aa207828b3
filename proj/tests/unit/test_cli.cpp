#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cellph/config.hpp"
#include "cellph/measure.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

// Runs the CLI with `args`, capturing stdout; stderr goes to err.txt in `dir`.
CliRun cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = std::string(CELLPH_CLI_PATH) + " -q " + args + " 2>" + (dir / "err.txt").string();
  CliRun r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("cellph_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "fast.json") << cellph::dump_config(fixture::fast_config());
    cfg_ = "--config " + (dir_ / "fast.json").string();
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static fs::path dir_;
  static std::string cfg_;
};

fs::path Cli::dir_;
std::string Cli::cfg_;

}  // namespace

TEST_F(Cli, PrintsTheDefaultConfiguration) {
  const CliRun r = cli(dir_, "--print-default-config");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(cellph::config_hash(cellph::parse_config(r.out)), cellph::config_hash(cellph::ForwardConfig{}));
}

TEST_F(Cli, SimulateWritesDatumTraceAndManifest) {
  const fs::path out = dir_ / "sim";
  ASSERT_EQ(cli(dir_, cfg_ + " simulate --xi 0.9,0.8,0.8 --out " + out.string()).code, 0);
  std::ifstream f(out / "datum.csv");
  const cellph::PhTrace d = cellph::read_datum_csv(f);
  EXPECT_EQ(d.size(), 101u);
  EXPECT_NE(slurp(out / "trace.csv").find("t,pH"), std::string::npos);
  const std::string manifest = slurp(out / "run_manifest.json");
  // The recorded configuration is the effective one: --seed (default 1) seeds the noise.
  cellph::ForwardConfig effective = fixture::fast_config();
  effective.measure.noise_seed = 1;
  EXPECT_NE(manifest.find(cellph::config_hash(effective)), std::string::npos);

  // Same inputs, same bytes.
  const fs::path again = dir_ / "sim2";
  ASSERT_EQ(cli(dir_, cfg_ + " simulate --xi 0.9,0.8,0.8 --out " + again.string()).code, 0);
  EXPECT_EQ(slurp(out / "datum.csv"), slurp(again / "datum.csv"));
}

TEST_F(Cli, InvalidInputsExitWithConfigurationCode) {
  EXPECT_EQ(cli(dir_, cfg_ + " simulate --xi 1.5,0.8,0.8 --out " + (dir_ / "bad").string()).code, 2);
  EXPECT_EQ(cli(dir_, cfg_ + " simulate --xi 0.9,0.8").code, 2);
  EXPECT_EQ(cli(dir_, "--no-such-flag simulate").code, 2);
  std::ofstream(dir_ / "broken.json") << "{ \"mesh\": ";
  EXPECT_EQ(cli(dir_, "--config " + (dir_ / "broken.json").string() + " simulate --xi 0.9,0.8,0.8").code, 2);
}

TEST_F(Cli, BuildValidateEstimateRoundTrip) {
  const fs::path bundle = dir_ / "bundle";
  const std::string build = cfg_ + " build-dict --grid 3 --k 2 --rank 2 --dce-samples 6 --restarts 2 --elbow 2-3 --bundle " +
                            bundle.string() + " --cache " + (dir_ / "cache").string();
  ASSERT_EQ(cli(dir_, build).code, 0) << slurp(dir_ / "err.txt");
  EXPECT_TRUE(fs::exists(bundle / "manifest.txt"));
  EXPECT_TRUE(fs::exists(bundle / "elbow.csv"));

  const CliRun v = cli(dir_, cfg_ + " validate-bundle --check-config --bundle " + bundle.string());
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("bundle ok"), std::string::npos);

  // Unchanged options reuse the bundle.
  const std::string manifest = slurp(bundle / "manifest.txt");
  ASSERT_EQ(cli(dir_, build).code, 0);
  EXPECT_EQ(slurp(bundle / "manifest.txt"), manifest);

  const fs::path sim = dir_ / "est_sim";
  ASSERT_EQ(cli(dir_, cfg_ + " simulate --xi 0.8,0.8,0.5 --out " + sim.string()).code, 0);
  const fs::path est = dir_ / "est";
  const CliRun e = cli(dir_, cfg_ + " estimate --bundle " + bundle.string() + " --datum " + (sim / "datum.csv").string() +
                              " --out " + est.string());
  ASSERT_EQ(e.code, 0) << slurp(dir_ / "err.txt");
  EXPECT_NE(e.out.find("xi_normalized"), std::string::npos);
  for (const char* f : {"report.txt", "report.csv", "overlay.csv", "run_manifest.json"}) EXPECT_TRUE(fs::exists(est / f)) << f;

  // The default configuration does not match this bundle.
  EXPECT_EQ(cli(dir_, "validate-bundle --check-config --bundle " + bundle.string()).code, 4);

  std::ofstream(dir_ / "bad_datum.csv") << "pH0,p,dt,n\n7.5,0.02,1,2\nb\n0\n";
  EXPECT_EQ(cli(dir_, cfg_ + " estimate --bundle " + bundle.string() + " --datum " + (dir_ / "bad_datum.csv").string() +
                          " --out " + est.string()).code, 2);

  {
    std::fstream f(bundle / "atoms.f64", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    f.put('\x7f');
  }
  EXPECT_EQ(cli(dir_, cfg_ + " validate-bundle --bundle " + bundle.string()).code, 4);
  EXPECT_EQ(cli(dir_, cfg_ + " estimate --bundle " + bundle.string() + " --datum " + (sim / "datum.csv").string() +
                          " --out " + est.string()).code, 4);
}
