#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "pwreg/io.hpp"
#include "support/checks.hpp"
#include "support/random_measures.hpp"

using namespace pwreg;
using testutil::contains;
using testutil::TempDir;

namespace {

struct CliResult {
  int code = -1;
  std::string out, err;
};

int cli_calls = 0;

CliResult run_cli(const TempDir& dir, const std::string& args,
                  const std::string& env_prefix = "") {
  const char* bin = std::getenv("PWREG_CLI");
  REQUIRE_MESSAGE(bin != nullptr, "PWREG_CLI must point at the built binary");
  const std::string tag = std::to_string(cli_calls++);
  const std::string out_file = dir.file("stdout_" + tag);
  const std::string err_file = dir.file("stderr_" + tag);
  const std::string cmd = env_prefix + std::string(bin) + " " + args + " > " + out_file +
                          " 2> " + err_file;
  const int raw = std::system(cmd.c_str());
  CliResult res;
  res.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  res.out = testutil::read_file(out_file);
  res.err = testutil::read_file(err_file);
  return res;
}

std::string write_line_cloud(const TempDir& dir, const std::string& name,
                             std::initializer_list<double> xs) {
  std::string body;
  for (double x : xs) body += std::to_string(x) + "\n";
  const std::string path = dir.file(name);
  testutil::write_file(path, body);
  return path;
}

}  // namespace

TEST_CASE("help lists the subcommands") {
  TempDir dir("cli_help");
  CliResult res = run_cli(dir, "--help");
  CHECK(res.code == 0);
  for (const char* name : {"register", "pot", "sweep", "eval", "synth"})
    CHECK(contains(res.out, name));
  CHECK(run_cli(dir, "").code == 1);  // a subcommand is required
}

TEST_CASE("eval prints the mse and writes its report") {
  TempDir dir("cli_eval");
  const std::string a = write_line_cloud(dir, "a.xyz", {0, 1, 2});
  const std::string same = write_line_cloud(dir, "same.xyz", {0, 1, 2});
  const std::string shifted = write_line_cloud(dir, "shifted.xyz", {0.1, 1.1, 2.1});

  CliResult identical =
      run_cli(dir, "eval --aligned " + a + " --truth " + same + " --out " + dir.file("o1"));
  CHECK(identical.code == 0);
  CHECK(identical.out == "0.0\n");
  CHECK(std::filesystem::exists(dir.file("o1") + "/manifest.json"));
  CHECK(std::filesystem::exists(dir.file("o1") + "/report.json"));

  CliResult offset =
      run_cli(dir, "eval --aligned " + shifted + " --truth " + a + " --out " + dir.file("o2"));
  CHECK(offset.code == 0);
  CHECK(std::stod(offset.out) == doctest::Approx(0.01).epsilon(1e-9));

  CliResult missing = run_cli(dir, "eval --aligned " + dir.file("nope.xyz") + " --truth " + a);
  CHECK(missing.code == 1);
  CHECK(!missing.err.empty());
}

TEST_CASE("default output root comes from the environment") {
  TempDir dir("cli_envout");
  const std::string a = write_line_cloud(dir, "a.xyz", {0, 1});
  std::filesystem::create_directories(dir.file("envroot"));
  CliResult res = run_cli(dir, "eval --aligned " + a + " --truth " + a,
                          "PWREG_OUT=" + dir.file("envroot") + " ");
  CHECK(res.code == 0);
  CHECK(std::filesystem::exists(dir.file("envroot") + "/report.json"));
}

TEST_CASE("sweep writes one curve per kind") {
  TempDir dir("cli_sweep");
  const std::string out = dir.file("sweep");
  CliResult res = run_cli(dir,
                          "sweep --outliers 1 --kinds pw_mass pw_distance --m 10 --h 2 "
                          "--t-min -0.1 --t-max 0.1 --t-step 0.1 --out " +
                              out);
  CHECK(res.code == 0);
  CHECK(contains(res.out, "pw_mass min_at 0.0"));
  CHECK(contains(res.out, "pw_distance min_at 0.0"));
  const std::string mass_csv = testutil::read_file(out + "/sweep_pw_mass.csv");
  CHECK(contains(mass_csv, "t,pw_mass(10)"));
  CHECK(std::filesystem::exists(out + "/sweep_pw_distance.csv"));
  CHECK(std::filesystem::exists(out + "/manifest.json"));

  CliResult bad = run_cli(dir, "sweep --kinds nonsense --out " + out);
  CHECK(bad.code == 1);
  CHECK(contains(bad.err, "nonsense"));
}

TEST_CASE("pot reports exact values on hand geometries") {
  TempDir dir("cli_pot");
  // The toy construction at zero shift: reference = data plus one outlier,
  // source = the ten data points; moving mass 10 costs nothing.
  std::initializer_list<double> data = {0,       1.0 / 3, 2.0 / 3, 1,       4.0 / 3,
                                        5.0 / 3, 2,       7.0 / 3, 8.0 / 3, 3};
  std::string ref_body, src_body;
  for (double x : data) {
    ref_body += std::to_string(x) + "\n";
    src_body += std::to_string(x) + "\n";
  }
  ref_body += "8.0\n";
  testutil::write_file(dir.file("ref.xyz"), ref_body);
  testutil::write_file(dir.file("src.xyz"), src_body);

  CliResult mass = run_cli(dir, "pot --source " + dir.file("src.xyz") + " --reference " +
                                    dir.file("ref.xyz") + " --mode mass --m 10 --out " +
                                    dir.file("m"));
  CHECK(mass.code == 0);
  CHECK(contains(mass.out, "primal 0.0"));
  CHECK(std::filesystem::exists(dir.file("m") + "/plan.csv"));
  CHECK(contains(testutil::read_file(dir.file("m") + "/report.json"), "\"primal\""));

  const std::string zero = write_line_cloud(dir, "zero.xyz", {0});
  const std::string one = write_line_cloud(dir, "one.xyz", {1});
  CliResult dist = run_cli(dir, "pot --source " + one + " --reference " + zero +
                                    " --mode distance --h 2 --out " + dir.file("d"));
  CHECK(dist.code == 0);
  CHECK(contains(dist.out, "primal -1.0"));

  CliResult no_m = run_cli(dir, "pot --source " + one + " --reference " + zero +
                                    " --mode mass --out " + dir.file("x"));
  CHECK(no_m.code == 1);
  CHECK(contains(no_m.err, "mass threshold required"));
}

TEST_CASE("pot trains a dual estimate when asked") {
  TempDir dir("cli_pot_dual");
  const std::string zero = write_line_cloud(dir, "zero.xyz", {0});
  const std::string one = write_line_cloud(dir, "one.xyz", {0.5});
  CliResult res = run_cli(dir, "pot --source " + one + " --reference " + zero +
                                   " --mode w1 --dual --steps 600 --widths 8 8 8 8 "
                                   "--out " +
                                   dir.file("w"));
  CHECK(res.code == 0);
  CHECK(contains(res.out, "primal 0.5"));
  CHECK(contains(res.out, "dual "));
  CHECK(contains(res.out, "relative_gap "));
  const std::string report = testutil::read_file(dir.file("w") + "/report.json");
  CHECK(contains(report, "\"dual\""));
  CHECK(contains(report, "\"relative_gap\""));
}

TEST_CASE("register runs a synthesized experiment end to end") {
  TempDir dir("cli_register");
  const std::string out = dir.file("run");
  const std::string config = dir.file("config.json");
  testutil::write_file(config, R"({
  "schema": "pwreg/1",
  "synthesis": {"pool": 300, "sample": 60},
  "seed": 5,
  "registration": {
    "mode": "mass", "m": 60, "T": 25, "u": 3,
    "widths": [10, 10, 10, 10], "landmarks": 25
  }
})");
  CliResult res = run_cli(dir, "register --config " + config + " --out " + out);
  INFO(res.err);
  CHECK(res.code == 0);
  CHECK(contains(res.out, "final_mse"));
  for (const char* name : {"manifest.json", "summary.json", "aligned.xyz", "theta.json",
                           "net.json", "loss.csv", "mse.csv"}) {
    CHECK(std::filesystem::exists(out + "/" + std::string(name)));
  }
  PointCloud aligned = load_cloud(out + "/aligned.xyz");
  CHECK(aligned.size() == 60);
  const std::string summary = testutil::read_file(out + "/summary.json");
  CHECK(contains(summary, "\"final_mse\""));
  CHECK(contains(summary, "\"initial_mse\""));

  // Re-running the same manifest must reproduce every output byte.
  std::filesystem::create_directories(dir.file("snapshot"));
  for (const char* name : {"summary.json", "aligned.xyz", "theta.json", "net.json",
                           "loss.csv", "mse.csv", "manifest.json"}) {
    std::filesystem::copy_file(out + "/" + std::string(name),
                               dir.file("snapshot") + "/" + std::string(name));
  }
  CliResult rerun = run_cli(dir, "register --config " + config + " --out " + out);
  CHECK(rerun.code == 0);
  for (const char* name : {"summary.json", "aligned.xyz", "theta.json", "net.json",
                           "loss.csv", "mse.csv", "manifest.json"}) {
    CHECK(testutil::read_file(out + "/" + std::string(name)) ==
          testutil::read_file(dir.file("snapshot") + "/" + std::string(name)));
  }
}

TEST_CASE("config validation fails fast with a named key") {
  TempDir dir("cli_badconfig");
  const std::string bad_key = dir.file("bad_key.json");
  testutil::write_file(bad_key, R"({
  "schema": "pwreg/1",
  "synthesis": {"pool": 100, "sample": 20},
  "foo": 1
})");
  CliResult res = run_cli(dir, "register --config " + bad_key);
  CHECK(res.code == 1);
  CHECK(contains(res.err, "foo"));

  const std::string wrong_threshold = dir.file("wrong_threshold.json");
  testutil::write_file(wrong_threshold, R"({
  "schema": "pwreg/1",
  "synthesis": {"pool": 100, "sample": 20},
  "registration": {"mode": "mass", "h": 0.1}
})");
  CliResult res2 = run_cli(dir, "register --config " + wrong_threshold);
  CHECK(res2.code == 1);
  CHECK(contains(res2.err, "mass threshold required"));

  const std::string bad_schema = dir.file("bad_schema.json");
  testutil::write_file(bad_schema, R"({"schema": "nope/9"})");
  CliResult res3 = run_cli(dir, "register --config " + bad_schema);
  CHECK(res3.code == 1);
  CHECK(contains(res3.err, "schema"));
}

TEST_CASE("synth writes a corrupted pair with ground truth") {
  TempDir dir("cli_synth");
  const std::string out = dir.file("gen");
  CliResult res = run_cli(dir,
                          "synth --pool 200 --sample 50 --reference-corrupt noise "
                          "--reference-param 30 --seed 3 --out " +
                              out);
  INFO(res.err);
  CHECK(res.code == 0);
  CHECK(load_cloud(out + "/source.xyz").size() == 50);
  CHECK(load_cloud(out + "/reference.xyz").size() == 80);
  CHECK(load_cloud(out + "/truth.xyz").size() == 50);
  CHECK(std::filesystem::exists(out + "/manifest.json"));

  CliResult bad = run_cli(dir, "synth --source-corrupt noise --source-param 5 --out " + out);
  CHECK(bad.code == 1);
  CHECK(contains(bad.err, "crop only"));
}
