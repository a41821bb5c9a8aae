#include <gtest/gtest.h>
#include <signal.h>
#include <stdlib.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "msvc/field.hpp"
#include "msvc/wire.hpp"

using json = nlohmann::json;
using msvc::FieldElement;
using msvc::FieldMatrix;
using msvc::FieldModulus;
using msvc::FieldVector;
using msvc::U256;

namespace {

std::string cli_bin() {
  const char* bin = getenv("MSVC_BIN");
  if (!bin) throw std::runtime_error("MSVC_BIN not set");
  return bin;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::string tmpl = "/tmp/msvc-cli-XXXXXX";
    path = mkdtemp(tmpl.data());
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

struct RunResult {
  int code;
  std::string output;  // stdout and stderr interleaved
};

RunResult run(const TempDir& dir, const std::string& args) {
  std::string capture = dir / ".run-output";
  std::string cmd = cli_bin() + " " + args + " > " + capture + " 2>&1";
  int status = std::system(cmd.c_str());
  std::ifstream in(capture);
  std::stringstream text;
  text << in.rdbuf();
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, text.str()};
}

// First line starting with the prefix, prefix stripped.
std::string line_after(const std::string& text, const std::string& prefix) {
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line))
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  return "";
}

// One `serve` child; stops with SIGTERM on destruction.
struct Daemon {
  pid_t pid = -1;
  int port = 0;

  Daemon(const std::string& state_dir, bool tamper = false) {
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
    pid = fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
      dup2(fds[1], STDOUT_FILENO);
      close(fds[0]);
      close(fds[1]);
      std::string bin = cli_bin();
      std::vector<const char*> argv = {bin.c_str(),    "serve",
                                       "--state-dir",  state_dir.c_str(),
                                       "--port",       "0"};
      if (tamper) argv.push_back("--tamper");
      argv.push_back(nullptr);
      execv(bin.c_str(), const_cast<char* const*>(argv.data()));
      _exit(127);
    }
    close(fds[1]);
    std::string line;
    char c;
    while (read(fds[0], &c, 1) == 1 && c != '\n') line.push_back(c);
    close(fds[0]);
    const std::string prefix = "listening on 127.0.0.1:";
    if (line.rfind(prefix, 0) != 0)
      throw std::runtime_error("daemon did not come up: " + line);
    port = std::stoi(line.substr(prefix.size()));
  }

  ~Daemon() {
    if (pid <= 0) return;
    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
  }
};

std::string endpoints_of(const Daemon& a, const Daemon& b, const Daemon& c) {
  std::ostringstream out;
  out << "127.0.0.1:" << a.port << ",127.0.0.1:" << b.port << ",127.0.0.1:"
      << c.port;
  return out.str();
}

FieldVector expected_product(const FieldModulus& mod,
                             const std::string& matrix_json_path,
                             const std::vector<std::uint64_t>& x_raw) {
  std::ifstream in(matrix_json_path);
  json j = json::parse(in);
  std::size_t rows = j["rows"], cols = j["cols"];
  FieldMatrix f(mod, rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i)
    f.set(i / cols, i % cols,
          FieldElement(mod,
                       U256::from_decimal(j["entries"][i].get<std::string>())));
  FieldVector x(mod, cols);
  for (std::size_t i = 0; i < cols; ++i)
    x.set(i, FieldElement(mod, U256{x_raw[i]}));
  return mat_vec_mul(f, x);
}

std::string csv_of(const FieldVector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (i) out += ",";
    out += v.at(i).canonical().to_decimal();
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

TEST(CliDelegate, KeygenServeDelegatePrintsTheProduct) {
  TempDir dir;
  RunResult kg = run(dir, "keygen --scheme pi_s --q 101 --m 3 --d 4 --seed 7"
                          " --session s1 --out " + (dir / "keys") +
                          " --matrix-out " + (dir / "F.json"));
  ASSERT_EQ(kg.code, 0) << kg.output;
  for (int l = 1; l <= 3; ++l)
    EXPECT_TRUE(std::filesystem::exists(dir / ("keys/server-" +
                                               std::to_string(l) + ".setup")));

  struct stat st {};
  ASSERT_EQ(stat((dir / "keys/client.key").c_str(), &st), 0);
  EXPECT_EQ(st.st_mode & 0777, 0600u);  // the verification key stays private

  Daemon d1(dir / "state1"), d2(dir / "state2"), d3(dir / "state3");
  std::string eps = endpoints_of(d1, d2, d3);
  RunResult del = run(dir, "delegate --keys " + (dir / "keys/client.key") +
                          " --shares " + (dir / "keys") + " --endpoints " +
                          eps + " --x 1,2,3,4");
  ASSERT_EQ(del.code, 0) << del.output;

  FieldModulus mod{U256{101}};
  FieldVector want = expected_product(mod, dir / "F.json", {1, 2, 3, 4});
  EXPECT_EQ(line_after(del.output, "y: "), csv_of(want));

  // shares already pushed; later delegations skip --shares
  RunResult again = run(dir, "delegate --keys " + (dir / "keys/client.key") +
                            " --endpoints " + eps + " --x 4,3,2,1");
  ASSERT_EQ(again.code, 0) << again.output;
  EXPECT_EQ(line_after(again.output, "y: "),
            csv_of(expected_product(mod, dir / "F.json", {4, 3, 2, 1})));
}

TEST(CliDelegate, TamperingDaemonMeansNonzeroCheatingExit) {
  TempDir dir;
  ASSERT_EQ(run(dir, "keygen --q 101 --m 3 --d 3 --seed 8 --session s1 --out " +
                         (dir / "keys")).code,
            0);
  Daemon d1(dir / "state1"), d2(dir / "state2");
  Daemon d3(dir / "state3", /*tamper=*/true);
  RunResult del = run(dir, "delegate --keys " + (dir / "keys/client.key") +
                          " --shares " + (dir / "keys") + " --endpoints " +
                          endpoints_of(d1, d2, d3) + " --x 1,2,3");
  EXPECT_EQ(del.code, 2) << del.output;
  EXPECT_NE(del.output.find("cheating detected"), std::string::npos);
}

TEST(CliVerify, TranscriptReVerifiesUntilCorrupted) {
  TempDir dir;
  ASSERT_EQ(run(dir, "keygen --q 101 --m 2 --d 2 --seed 9 --session s1 --out " +
                         (dir / "keys")).code,
            0);
  Daemon d1(dir / "state1"), d2(dir / "state2"), d3(dir / "state3");
  RunResult del = run(dir, "delegate --keys " + (dir / "keys/client.key") +
                          " --shares " + (dir / "keys") + " --endpoints " +
                          endpoints_of(d1, d2, d3) + " --x 5,6" +
                          " --transcript-out " + (dir / "t.bin"));
  ASSERT_EQ(del.code, 0) << del.output;

  RunResult ver = run(dir, "verify --keys " + (dir / "keys/client.key") +
                          " --transcript " + (dir / "t.bin"));
  EXPECT_EQ(ver.code, 0) << ver.output;
  EXPECT_NE(ver.output.find("accept"), std::string::npos);
  EXPECT_EQ(line_after(ver.output, "y: "), line_after(del.output, "y: "));

  std::fstream f(dir / "t.bin",
                 std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(-1, std::ios::end);
  char last = 0;
  f.get(last);
  f.seekp(-1, std::ios::end);
  f.put(static_cast<char>(last ^ 1));
  f.close();
  RunResult bad = run(dir, "verify --keys " + (dir / "keys/client.key") +
                          " --transcript " + (dir / "t.bin"));
  EXPECT_EQ(bad.code, 2) << bad.output;
}

TEST(CliPir, FourEntryDemoDatabase) {
  TempDir dir;
  std::ofstream(dir / "db.json")
      << R"({"q":"101","entries":["10","20","30","40"]})";
  RunResult local = run(dir, "pir --db " + (dir / "db.json") + " --index 3");
  EXPECT_EQ(local.code, 0) << local.output;
  EXPECT_EQ(line_after(local.output, "value: "), "30");

  Daemon d1(dir / "s1"), d2(dir / "s2"), d3(dir / "s3");
  RunResult remote = run(dir, "pir --db " + (dir / "db.json") +
                             " --index 3 --endpoints " +
                             endpoints_of(d1, d2, d3));
  EXPECT_EQ(remote.code, 0) << remote.output;
  EXPECT_EQ(line_after(remote.output, "value: "), "30");

  EXPECT_EQ(run(dir, "pir --db " + (dir / "db.json") + " --index 5").code, 4);
}

TEST(CliPir, RawBytesChunkIntoElements) {
  TempDir dir;
  std::ofstream(dir / "blob.bin", std::ios::binary) << "raw pir payload";
  RunResult got = run(dir, "pir --db " + (dir / "blob.bin") +
                          " --raw --index 1");
  EXPECT_EQ(got.code, 0) << got.output;
  std::uint8_t buf[32] = {0};
  const char* text = "raw pir payload";
  std::copy(text, text + 15, buf + 1);
  U256 want = U256::from_bytes_be(std::span<const std::uint8_t, 32>(buf, 32));
  EXPECT_EQ(line_after(got.output, "value: "), want.to_decimal());

  // chunks must stay below the modulus
  EXPECT_EQ(run(dir, "pir --db " + (dir / "blob.bin") +
                    " --raw --q 101 --index 1").code,
            4);
}

TEST(CliPoly, DelegatedEvaluationMatchesDirect) {
  TempDir dir;
  RunResult uni = run(dir, "poly --family univariate --coeffs 5,6 --point 2"
                          " --q 101 --seed 3");
  EXPECT_EQ(uni.code, 0) << uni.output;
  EXPECT_EQ(line_after(uni.output, "value: "), "17");  // 5 + 6*2

  RunResult quad = run(dir, "poly --family quadratic --coeffs 1,2,3,4"
                           " --point 2,3 --q 101 --seed 4");
  EXPECT_EQ(quad.code, 0) << quad.output;
  EXPECT_EQ(line_after(quad.output, "value: "), "70");  // x^T A y, 2314 grid

  RunResult multi = run(dir, "poly --family multivariate"
                            " --coeffs 1,2,3,4,5,6,7,8 --point 2,3,4"
                            " --vars 3 --degree 2 --q 101 --seed 5");
  EXPECT_EQ(multi.code, 0) << multi.output;
  EXPECT_EQ(line_after(multi.output, "value: "), "7");  // 8592 mod 101
}

TEST(CliBench, CsvCarriesMediansAndExactMulCounts) {
  TempDir dir;
  RunResult b = run(dir, "bench --scheme pi_s --q 101 --sizes 4,8 --runs 5"
                        " --seed 1 --out " + (dir / "bench.csv"));
  ASSERT_EQ(b.code, 0) << b.output;
  std::ifstream in(dir / "bench.csv");
  std::string header, row;
  ASSERT_TRUE(std::getline(in, header));
  EXPECT_EQ(header,
            "m,d,scheme,t_naive_ms,t_client_ms,t_server_max_ms,keygen_muls,"
            "probgen_muls,compute_muls,verify_muls");
  for (std::uint64_t n : {4u, 8u}) {
    ASSERT_TRUE(std::getline(in, row));
    std::vector<std::string> cells = split(row, ',');
    ASSERT_EQ(cells.size(), 10u);
    EXPECT_EQ(cells[0], std::to_string(n));
    EXPECT_EQ(cells[1], std::to_string(n));
    EXPECT_EQ(cells[2], "pi_s");
    EXPECT_EQ(cells[6], std::to_string(3 * n * n));      // a m d
    EXPECT_EQ(cells[7], "0");                            // masking only
    EXPECT_EQ(cells[8], std::to_string(9 * n * n));      // a b m d
    EXPECT_EQ(cells[9], std::to_string(9 * (n + n)));    // a b (m + d)
  }
  EXPECT_FALSE(std::getline(in, row));
}

TEST(CliAttackSim, TamperRateIsBoundedAndHonestNeverForges) {
  TempDir dir;
  RunResult sim = run(dir, "attack-sim --scheme pi_s --q 1009 --m 4 --d 4"
                          " --trials 4000 --p 1 --seed 11");
  ASSERT_EQ(sim.code, 0) << sim.output;
  double rate = std::stod(line_after(sim.output, "rate: "));
  double bound = std::stod(line_after(sim.output, "bound: "));
  EXPECT_NEAR(bound, 9.0 / 1000.0, 1e-9);
  EXPECT_LE(rate, 3 * bound);

  RunResult honest = run(dir, "attack-sim --q 101 --m 2 --d 2 --trials 50"
                             " --honest --seed 12");
  ASSERT_EQ(honest.code, 0) << honest.output;
  EXPECT_EQ(line_after(honest.output, "successes: "), "0");
}

TEST(CliConfig, FileSuppliesDefaultsAndFlagsOverride) {
  TempDir dir;
  std::ofstream(dir / "cfg.json")
      << R"({"scheme":"pi_w","q":"101","m":2,"d":2,"seed":9})";
  ASSERT_EQ(run(dir, "keygen --config " + (dir / "cfg.json") +
                    " --session s1 --out " + (dir / "k1")).code,
            0);
  auto read_all = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
  };
  msvc::ClientKeys keys =
      msvc::decode_client_keys(read_all(dir / "k1/client.key"));
  EXPECT_EQ(keys.scheme.k, 4);  // pi_w came from the config file
  EXPECT_EQ(keys.modulus->value(), U256{101});

  ASSERT_EQ(run(dir, "keygen --config " + (dir / "cfg.json") +
                    " --q 7 --session s1 --out " + (dir / "k2")).code,
            0);
  msvc::ClientKeys over =
      msvc::decode_client_keys(read_all(dir / "k2/client.key"));
  EXPECT_EQ(over.modulus->value(), U256{7});  // the flag wins
}

TEST(CliErrors, ExitCodesAreStable) {
  TempDir dir;
  EXPECT_EQ(run(dir, "").code, 4);                       // subcommand required
  EXPECT_EQ(run(dir, "--help").code, 0);
  EXPECT_EQ(run(dir, "frobnicate").code, 4);
  EXPECT_EQ(run(dir, "keygen --q 100 --out " + (dir / "k")).code, 4);
  EXPECT_EQ(run(dir, "delegate --x 1").code, 4);  // --keys is required
  ASSERT_EQ(run(dir, "keygen --q 101 --m 2 --d 2 --seed 1 --out " +
                    (dir / "keys")).code,
            0);
  RunResult dead = run(dir, "delegate --keys " + (dir / "keys/client.key") +
                           " --endpoints 127.0.0.1:1,127.0.0.1:1,127.0.0.1:1"
                           " --x 1,2");
  EXPECT_EQ(dead.code, 3) << dead.output;  // nothing listening: a fault
}
