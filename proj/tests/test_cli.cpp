#include <doctest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nf/checkpoint.hpp"
#include "nf/data.hpp"
#include "nf/image.hpp"
#include "oracles.hpp"

using namespace nf;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(NORMFLOW_BIN) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[512];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string scratch(const std::string& name) {
  const std::string dir = "cli_" + name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string readBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Eigen::VectorXd column(const Tensor& t, Index c) {
  Eigen::VectorXd v(t.rows());
  for (Index r = 0; r < t.rows(); ++r) v[r] = t.at(r, c);
  return v;
}

/// Writes a small crescent CSV through the CLI itself and returns its path.
std::string makeTrainingCsv(const std::string& dir, Index count,
                            std::uint64_t seed) {
  RunResult r = run("demo-transforms --count " + std::to_string(count) +
                    " --seed " + std::to_string(seed) + " --out " + dir);
  REQUIRE(r.code == 0);
  return dir + "/step4.csv";
}

}  // namespace

TEST_CASE("cli: demo-transforms stages invert and stay correlated mid-chain") {
  const std::string dir = scratch("dt");
  RunResult r = run("demo-transforms --count 2000 --seed 9 --out " + dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("round-trip max error") != std::string::npos);

  for (int k = 0; k <= 7; ++k) {
    CHECK(fs::exists(dir + "/step" + std::to_string(k) + ".csv"));
  }

  Dataset s0 = loadCsv(dir + "/step0.csv");
  Dataset s1 = loadCsv(dir + "/step1.csv");
  Dataset s3 = loadCsv(dir + "/step3.csv");
  Dataset s4 = loadCsv(dir + "/step4.csv");
  Dataset s7 = loadCsv(dir + "/step7.csv");
  REQUIRE(s0.points.rows() == 2000);

  for (Index i = 0; i < s0.points.size(); ++i) {
    CHECK(s1.points.at(i) == s0.points.at(i));
    CHECK(std::abs(s7.points.at(i) - s0.points.at(i)) < 1e-9);
  }

  double maxGap = 0;
  for (Index i = 0; i < s0.points.size(); ++i) {
    maxGap = std::max(maxGap, std::abs(s4.points.at(i) - s0.points.at(i)));
  }
  CHECK(maxGap > 1.0);

  const double rho0 =
      oracles::sampleCorrelation(column(s0.points, 0), column(s0.points, 1));
  const double rho3 =
      oracles::sampleCorrelation(column(s3.points, 0), column(s3.points, 1));
  CHECK(std::abs(rho0) < 0.05);
  CHECK(std::abs(rho3) > 0.5);
}

TEST_CASE("cli: demo-transforms is bit-reproducible per seed") {
  const std::string a = scratch("dt_a");
  const std::string b = scratch("dt_b");
  const std::string c = scratch("dt_c");
  REQUIRE(run("demo-transforms --count 200 --seed 4 --out " + a).code == 0);
  REQUIRE(run("demo-transforms --count 200 --seed 4 --out " + b).code == 0);
  REQUIRE(run("demo-transforms --count 200 --seed 5 --out " + c).code == 0);
  CHECK(readBytes(a + "/step4.csv") == readBytes(b + "/step4.csv"));
  CHECK(readBytes(a + "/step4.csv") != readBytes(c + "/step4.csv"));
}

TEST_CASE("cli: demo-disc tabulates the analytic density") {
  const std::string dir = scratch("disc");
  RunResult r = run("demo-disc --out " + dir + "/disc.csv");
  CHECK(r.code == 0);

  std::ifstream in(dir + "/disc.csv");
  REQUIRE(bool(in));
  std::string line;
  std::getline(in, line);
  CHECK(line == "A,p_analytic,p_flow");

  int rows = 0;
  double firstA = 0, firstP = 0, lastA = 0, lastP = 0;
  double prevA = 0, prevP = 0, integral = 0, maxGap = 0;
  while (std::getline(in, line)) {
    double a, pa, pf;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &a, &pa, &pf) == 3);
    maxGap = std::max(maxGap, std::abs(pf - pa));
    if (rows == 0) {
      firstA = a;
      firstP = pf;
    } else {
      integral += 0.5 * (pf + prevP) * (a - prevA);
    }
    prevA = a;
    prevP = pf;
    lastA = a;
    lastP = pf;
    ++rows;
  }
  CHECK(rows == 100);
  CHECK(firstA == doctest::Approx(25.0 * M_PI / 4.0).epsilon(1e-15));
  CHECK(lastA == doctest::Approx(9.0 * M_PI).epsilon(1e-15));
  CHECK(firstP == doctest::Approx(0.127324).epsilon(1e-5));
  CHECK(lastP == doctest::Approx(0.106103).epsilon(1e-5));
  CHECK(maxGap < 1e-9);
  CHECK(std::abs(integral - 1.0) < 1e-3);
}

TEST_CASE("cli: demo-coin prints the exact likelihood grid") {
  RunResult r = run("demo-coin");
  CHECK(r.code == 0);
  CHECK(r.out.find("0.0576") != std::string::npos);
  CHECK(r.out.find("0.0625") != std::string::npos);
  CHECK(r.out.find("p_hat = 0.5") != std::string::npos);

  RunResult monotone = run("demo-coin --successes 4 --trials 4");
  CHECK(monotone.code == 0);
  CHECK(monotone.out.find("p_hat = 0.9") != std::string::npos);

  RunResult fine = run("demo-coin --grid 0.01 --successes 1 --trials 4");
  CHECK(fine.code == 0);
  CHECK(fine.out.find("p_hat = 0.25") != std::string::npos);
}

TEST_CASE("cli: train writes checkpoints, loss history, and a final model") {
  const std::string dir = scratch("train");
  const std::string csv = makeTrainingCsv(dir, 600, 11);
  const std::string before = readBytes(csv);

  RunResult r = run("train --data " + csv +
                    " --steps 12 --couplings 2 --hidden 8 --lu-mixing"
                    " --batch 32 --checkpoint-every 5 --seed 2 --out " +
                    dir + "/run");
  CHECK(r.code == 0);
  CHECK(readBytes(csv) == before);  // inputs stay untouched

  CHECK(fs::exists(dir + "/run/checkpoint_5.json"));
  CHECK(fs::exists(dir + "/run/checkpoint_10.json"));
  CHECK(fs::exists(dir + "/run/checkpoint_12.json"));

  Checkpoint final = Checkpoint::load(dir + "/run/model.json");
  CHECK(final.step == 12);
  CHECK(final.dim == 2);
  CHECK(!final.image.valid());

  std::ifstream loss(dir + "/run/loss.csv");
  REQUIRE(bool(loss));
  std::string line;
  std::getline(loss, line);
  CHECK(line == "step,train_nll,val_nll");
  int rows = 0;
  while (std::getline(loss, line)) {
    long step;
    double train, val;
    REQUIRE(std::sscanf(line.c_str(), "%ld,%lf,%lf", &step, &train, &val) ==
            3);
    CHECK(step == rows);
    CHECK(std::isfinite(train));
    CHECK(std::isfinite(val));
    ++rows;
  }
  CHECK(rows == 12);
}

TEST_CASE("cli: train is bit-reproducible per seed") {
  const std::string dir = scratch("repro");
  const std::string csv = makeTrainingCsv(dir, 400, 3);
  const std::string base = "train --data " + csv +
                           " --steps 6 --couplings 2 --hidden 8 --batch 32"
                           " --seed 7 --out ";
  REQUIRE(run(base + dir + "/a").code == 0);
  REQUIRE(run(base + dir + "/b").code == 0);
  CHECK(readBytes(dir + "/a/model.json") == readBytes(dir + "/b/model.json"));
  CHECK(readBytes(dir + "/a/loss.csv") == readBytes(dir + "/b/loss.csv"));
}

TEST_CASE("cli: logprob on an untrained model reproduces the base density") {
  const std::string dir = scratch("logprob");
  const std::string csv = makeTrainingCsv(dir, 300, 5);
  REQUIRE(run("train --data " + csv +
              " --steps 0 --couplings 2 --hidden 8 --out " + dir + "/id")
              .code == 0);

  std::ofstream(dir + "/origin.csv") << "x1,x2\n0,0\n";
  RunResult r = run("logprob --checkpoint " + dir + "/id/model.json" +
                    " --data " + dir + "/origin.csv --out " + dir + "/lp.csv");
  CHECK(r.code == 0);
  const std::string lp = readBytes(dir + "/lp.csv");
  CHECK(lp == "log_prob\n-1.8378770664093453\n");

  std::ofstream(dir + "/wide.csv") << "x1,x2,x3\n1,2,3\n";
  RunResult mismatch =
      run("logprob --checkpoint " + dir + "/id/model.json" + " --data " + dir +
          "/wide.csv --out " + dir + "/bad.csv");
  CHECK(mismatch.code == 2);
  CHECK(mismatch.out.find("expects") != std::string::npos);
}

TEST_CASE("cli: sample writes seeded rows") {
  const std::string dir = scratch("sample");
  const std::string csv = makeTrainingCsv(dir, 300, 6);
  REQUIRE(run("train --data " + csv +
              " --steps 4 --couplings 2 --hidden 8 --batch 32 --out " + dir +
              "/run")
              .code == 0);

  const std::string base = "sample --checkpoint " + dir + "/run/model.json" +
                           " --count 7 --seed 3 --out ";
  REQUIRE(run(base + dir + "/a.csv").code == 0);
  REQUIRE(run(base + dir + "/b.csv").code == 0);
  Dataset drawn = loadCsv(dir + "/a.csv");
  CHECK(drawn.points.rows() == 7);
  CHECK(drawn.dim == 2);
  CHECK(readBytes(dir + "/a.csv") == readBytes(dir + "/b.csv"));

  REQUIRE(run("sample --checkpoint " + dir + "/run/model.json" +
              " --count 7 --seed 4 --out " + dir + "/c.csv")
              .code == 0);
  CHECK(readBytes(dir + "/a.csv") != readBytes(dir + "/c.csv"));
}

TEST_CASE("cli: check passes on a freshly initialized model") {
  const std::string dir = scratch("check");
  const std::string csv = makeTrainingCsv(dir, 300, 8);
  REQUIRE(run("train --data " + csv +
              " --steps 0 --couplings 3 --hidden 8 --lu-mixing --out " + dir +
              "/id")
              .code == 0);
  RunResult r = run("check --checkpoint " + dir + "/id/model.json --seed 1");
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("round-trip") != std::string::npos);
  CHECK(r.out.find("finite-difference log-det") != std::string::npos);
}

TEST_CASE("cli: image training, sampling, and scoring round out the loop") {
  const std::string dir = scratch("image");
  std::vector<GrayImage> glyphs = genGlyphDataset(10, 8, 3);
  fs::create_directories(dir + "/imgs");
  for (size_t k = 0; k < glyphs.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "g%02zu.pgm", k);
    savePgm(glyphs[k], dir + "/imgs/" + name);
  }

  RunResult tr = run("train --data " + dir +
                     "/imgs --image --steps 2 --couplings 2 --hidden 8"
                     " --batch 4 --lu-mixing --out " +
                     dir + "/run");
  CHECK(tr.code == 0);
  CHECK(tr.out.find("bits per dim") != std::string::npos);

  Checkpoint ck = Checkpoint::load(dir + "/run/model.json");
  CHECK(ck.image.valid());
  CHECK(ck.image.width == 8);
  CHECK(ck.image.height == 8);
  CHECK(ck.dim == 64);

  REQUIRE(run("sample --checkpoint " + dir + "/run/model.json" +
              " --count 2 --seed 5 --out " + dir + "/samples")
              .code == 0);
  GrayImage s0 = loadPgm(dir + "/samples/sample_000.pgm");
  CHECK(s0.width == 8);
  CHECK(s0.height == 8);

  const std::string lpBase = "logprob --checkpoint " + dir +
                             "/run/model.json --data " + dir + "/imgs --out ";
  REQUIRE(run(lpBase + dir + "/lp0.csv --seed 0").code == 0);
  REQUIRE(run(lpBase + dir + "/lp0b.csv --seed 0").code == 0);
  REQUIRE(run(lpBase + dir + "/lp1.csv --seed 1").code == 0);
  const std::string lp0 = readBytes(dir + "/lp0.csv");
  CHECK(lp0 == readBytes(dir + "/lp0b.csv"));
  CHECK(lp0 != readBytes(dir + "/lp1.csv"));

  GrayImage odd(4, 4, 9);
  savePgm(odd, dir + "/imgs/zz_odd.pgm");
  RunResult bad = run("train --data " + dir +
                      "/imgs --image --steps 1 --couplings 2 --hidden 8"
                      " --batch 4 --out " +
                      dir + "/run2");
  CHECK(bad.code == 2);
  CHECK(bad.out.find("extent") != std::string::npos);
}

TEST_CASE("cli: usage and data failures map to distinct exit codes") {
  const std::string dir = scratch("errors");

  CHECK(run("").code == 1);
  CHECK(run("no-such-command").code == 1);
  CHECK(run("train --bogus").code == 1);
  CHECK(run("train").code == 1);  // --data and --out are required

  RunResult help = run("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("train") != std::string::npos);
  CHECK(help.out.find("demo-coin") != std::string::npos);

  RunResult missing = run("check --checkpoint " + dir + "/absent.json");
  CHECK(missing.code == 2);

  const std::string csv = makeTrainingCsv(dir, 200, 2);
  REQUIRE(run("train --data " + csv + " --steps 0 --couplings 2 --hidden 8"
              " --out " + dir + "/id").code == 0);

  std::ifstream in(dir + "/id/model.json");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string tampered = ss.str();
  const std::string needle = "\"format_version\": 1";
  const size_t at = tampered.find(needle);
  REQUIRE(at != std::string::npos);
  tampered.replace(at, needle.size(), "\"format_version\": 3");
  std::ofstream(dir + "/v3.json") << tampered;

  RunResult badVersion = run("sample --checkpoint " + dir +
                             "/v3.json --count 1 --out " + dir + "/x.csv");
  CHECK(badVersion.code == 2);
  CHECK(badVersion.out.find("format version 3") != std::string::npos);
  CHECK(badVersion.out.find("version 1") != std::string::npos);

  std::ofstream(dir + "/mangled.csv") << "x1,x2\n1.0,2.0\n1.0,zap\n";
  RunResult badCsv = run("logprob --checkpoint " + dir + "/id/model.json" +
                         " --data " + dir + "/mangled.csv --out " + dir +
                         "/y.csv");
  CHECK(badCsv.code == 2);
  CHECK(badCsv.out.find("line 3") != std::string::npos);
}
