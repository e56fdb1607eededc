#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

const std::string kCli = MZCOUNT_CLI_PATH;
const std::string kFixture = std::string(MZCOUNT_DATA_DIR) + "/spain_auto_joint_counts.csv";

int run(const std::string& args, std::string* output = nullptr) {
  const std::string command = kCli + " " + args + " >/tmp/mzcount_cli_out.txt 2>&1";
  const int status = std::system(command.c_str());
  if (output) {
    std::ifstream in("/tmp/mzcount_cli_out.txt");
    std::stringstream buffer;
    buffer << in.rdbuf();
    *output = buffer.str();
  }
  return WEXITSTATUS(status);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

} // namespace

TEST_CASE("ingest reports the fixture summary and exits cleanly") {
  std::string output;
  const int code = run("ingest --data " + kFixture + " --format contingency-csv", &output);
  CHECK(code == 0);
  CHECK(output.find("n 80994") != std::string::npos);
  CHECK(output.find("zero rows 71087") != std::string::npos);
  CHECK(output.find("0.18") != std::string::npos);
}

TEST_CASE("parse failures exit with code 2") {
  write_file("/tmp/mzcount_cli_bad.csv", "z1,z2\n0,oops\n");
  std::string output;
  const int code = run("ingest --data /tmp/mzcount_cli_bad.csv", &output);
  CHECK(code == 2);
  CHECK(output.find("line 2") != std::string::npos);
  CHECK(run("ingest --data /nonexistent/file.csv") == 2);
  CHECK(run("nonsense-subcommand") == 2);
  std::remove("/tmp/mzcount_cli_bad.csv");
}

TEST_CASE("validation failures exit with code 4") {
  CHECK(run("fit --data " + kFixture + " --format contingency-csv --family NOPE") == 4);
  CHECK(run("deflate --data " + kFixture + " --format contingency-csv --keep-fraction 2.0") == 4);
  CHECK(run("deflate --data " + kFixture + " --format contingency-csv") == 4);
}

TEST_CASE("fit emits the coefficient table with significance stars") {
  std::string output;
  const int code =
      run("fit --data " + kFixture +
              " --format contingency-csv --family MZIP1 --out /tmp/mzcount_cli_fit.json",
          &output);
  CHECK(code == 0);
  CHECK(output.find("Signif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05") != std::string::npos);
  CHECK(output.find("-48630.5") != std::string::npos);
  const std::string artifact = read_file("/tmp/mzcount_cli_fit.json");
  CHECK(artifact.find("\"loglik\"") != std::string::npos);
  CHECK(artifact.find("MZIP1") != std::string::npos);
  // manifest sidecar rides along
  CHECK(read_file("/tmp/mzcount_cli_fit.json.manifest.json").find("input_digest") !=
        std::string::npos);
}

TEST_CASE("reruns with identical inputs produce byte-identical artifacts") {
  REQUIRE(run("fit --data " + kFixture +
              " --format contingency-csv --family MZMNB1 --out /tmp/mzcount_cli_a.json") == 0);
  REQUIRE(run("fit --data " + kFixture +
              " --format contingency-csv --family MZMNB1 --out /tmp/mzcount_cli_b.json") == 0);
  CHECK(read_file("/tmp/mzcount_cli_a.json") == read_file("/tmp/mzcount_cli_b.json"));
}

TEST_CASE("simulate round trip: header-only, determinism, ingest") {
  write_file("/tmp/mzcount_cli_spec.json", R"({
    "family": "MZIP1", "m": 2,
    "params": {"gamma": [0.6], "beta": [[-0.4], [-0.8]], "alpha": [], "phi": [], "lambda0": 0.0}
  })");

  CHECK(run("simulate --spec /tmp/mzcount_cli_spec.json --n 0 --seed 1 "
            "--out /tmp/mzcount_cli_empty.csv") == 0);
  CHECK(read_file("/tmp/mzcount_cli_empty.csv") == "z1,z2\n");

  REQUIRE(run("simulate --spec /tmp/mzcount_cli_spec.json --n 500 --seed 5 "
              "--out /tmp/mzcount_cli_s1.csv") == 0);
  REQUIRE(run("simulate --spec /tmp/mzcount_cli_spec.json --n 500 --seed 5 "
              "--out /tmp/mzcount_cli_s2.csv") == 0);
  CHECK(read_file("/tmp/mzcount_cli_s1.csv") == read_file("/tmp/mzcount_cli_s2.csv"));

  std::string output;
  CHECK(run("ingest --data /tmp/mzcount_cli_s1.csv", &output) == 0);
  CHECK(output.find("n 500") != std::string::npos);
}

TEST_CASE("deflate exact-count mode reproduces the reduced portfolio") {
  std::string output;
  const int code = run("deflate --data " + kFixture +
                           " --format contingency-csv --keep-count 3554 --seed 7 "
                           "--out /tmp/mzcount_cli_defl.csv",
                       &output);
  CHECK(code == 0);
  CHECK(output.find("kept n 13461") != std::string::npos);
  CHECK(output.find("-0.144") != std::string::npos);
}

TEST_CASE("predict consumes a fit artifact") {
  REQUIRE(run("fit --data " + kFixture +
              " --format contingency-csv --family MZIP1 --out /tmp/mzcount_cli_p.json") == 0);
  write_file("/tmp/mzcount_cli_profiles.csv", "name\nbaseline\n");
  std::string output;
  const int code = run("predict --fit /tmp/mzcount_cli_p.json "
                       "--profiles /tmp/mzcount_cli_profiles.csv",
                       &output);
  CHECK(code == 0);
  CHECK(output.find("baseline") != std::string::npos);
  CHECK(output.find("TotalMean") != std::string::npos);

  // width mismatch is a validation error
  write_file("/tmp/mzcount_cli_profiles2.csv", "name,x1\nwide,1\n");
  CHECK(run("predict --fit /tmp/mzcount_cli_p.json "
            "--profiles /tmp/mzcount_cli_profiles2.csv") == 4);
}

TEST_CASE("compare handles a single family and reports per-row failures") {
  std::string output;
  CHECK(run("compare --data " + kFixture +
                " --format contingency-csv --families MNB",
            &output) == 0);
  CHECK(output.find("MNB") != std::string::npos);

  const int code = run("compare --data " + kFixture +
                           " --format contingency-csv --families MNB,BOGUS",
                       &output);
  CHECK(code == 3);
  CHECK(output.find("failed") != std::string::npos);
  CHECK(output.find("MNB") != std::string::npos);
}

TEST_CASE("results are invariant to MZCOUNT_THREADS") {
  REQUIRE(std::system((std::string("MZCOUNT_THREADS=1 ") + kCli +
                       " fit --data " + kFixture +
                       " --format contingency-csv --family MNB --out /tmp/mzcount_cli_t1.json "
                       ">/dev/null 2>&1")
                          .c_str()) == 0);
  REQUIRE(std::system((std::string("MZCOUNT_THREADS=8 ") + kCli +
                       " fit --data " + kFixture +
                       " --format contingency-csv --family MNB --out /tmp/mzcount_cli_t8.json "
                       ">/dev/null 2>&1")
                          .c_str()) == 0);
  CHECK(read_file("/tmp/mzcount_cli_t1.json") == read_file("/tmp/mzcount_cli_t8.json"));
  // invalid values are rejected
  CHECK(std::system((std::string("MZCOUNT_THREADS=banana ") + kCli +
                     " --self-check >/dev/null 2>&1")
                        .c_str()) != 0);
}

TEST_CASE("self-check flag runs the oracle battery") {
  std::string output;
  CHECK(run("--self-check", &output) == 0);
  CHECK(output.find("0 failed") != std::string::npos);
}
