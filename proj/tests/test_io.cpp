#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "mzcount/fit_common.hpp"
#include "mzcount/io.hpp"

using namespace mzcount;

namespace {

const std::string kFixture = std::string(MZCOUNT_DATA_DIR) + "/spain_auto_joint_counts.csv";

std::string temp_file(const std::string& name) { return "/tmp/mzcount_test_" + name; }

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("bundled fixture summary matches the published portfolio") {
  const ObservationSet data = ingest_csv(kFixture, DataFormat::ContingencyCsv);
  const IngestSummary summary = summarize(data);
  CHECK(summary.n == 80994);
  CHECK(summary.m == 2);
  CHECK(summary.p == 0);
  CHECK(summary.zero_rows == 71087);
  CHECK(summary.correlation == doctest::Approx(0.187).epsilon(0.006));
}

TEST_CASE("rows-csv round trip preserves the data") {
  const std::string path = temp_file("roundtrip.csv");
  write_file(path, "z1,z2,x1\n0,0,1\n2,1,0\n0,3,1\n");
  const ObservationSet data = ingest_csv(path, DataFormat::RowsCsv);
  CHECK(data.n() == 3);
  CHECK(data.m() == 2);
  CHECK(data.p() == 1);
  CHECK(data.design(0, 0) == 1.0); // intercept prepended
  CHECK(data.counts(2, 1) == 3);

  const std::string out = temp_file("roundtrip_out.csv");
  write_rows_csv(out, data);
  const ObservationSet again = ingest_csv(out, DataFormat::RowsCsv);
  CHECK(again.counts == data.counts);
  CHECK(again.design == data.design);
  std::remove(path.c_str());
  std::remove(out.c_str());
}

TEST_CASE("parse errors carry line numbers") {
  const std::string path = temp_file("bad.csv");

  write_file(path, "");
  CHECK_THROWS_AS((void)ingest_csv(path, DataFormat::RowsCsv), ParseError);

  write_file(path, "z1,z2\n0,0\n1,x\n");
  try {
    (void)ingest_csv(path, DataFormat::RowsCsv);
    FAIL("expected ParseError");
  } catch (const ParseError& error) {
    CHECK(error.line == 3);
    CHECK(std::string(error.what()).find("line 3") != std::string::npos);
  }

  write_file(path, "z1,z2\n0,0\n-1,2\n");
  try {
    (void)ingest_csv(path, DataFormat::RowsCsv);
    FAIL("expected ParseError");
  } catch (const ParseError& error) {
    CHECK(error.line == 3);
  }

  write_file(path, "z1,z2,bogus\n0,0,1\n");
  CHECK_THROWS_AS((void)ingest_csv(path, DataFormat::RowsCsv), ParseError);

  write_file(path, "z1,z2\n0\n");
  try {
    (void)ingest_csv(path, DataFormat::RowsCsv);
    FAIL("expected ParseError");
  } catch (const ParseError& error) {
    CHECK(error.line == 2);
  }
  std::remove(path.c_str());
}

TEST_CASE("contingency format expands counts to identical rows") {
  const std::string path = temp_file("cont.csv");
  write_file(path, "z1,z2,count\n0,0,10\n1,2,3\n");
  const ObservationSet data = ingest_csv(path, DataFormat::ContingencyCsv);
  CHECK(data.n() == 13);
  long zeros = 0;
  for (int i = 0; i < data.n(); ++i)
    if (data.zero_row(i)) ++zeros;
  CHECK(zeros == 10);
  std::remove(path.c_str());
}

TEST_CASE("contingency header is strict") {
  const std::string path = temp_file("conthdr.csv");
  write_file(path, "z1,z2,n\n0,0,1\n");
  CHECK_THROWS_AS((void)ingest_csv(path, DataFormat::ContingencyCsv), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("deflation keeps every nonzero row") {
  const ObservationSet data = ingest_csv(kFixture, DataFormat::ContingencyCsv);

  const ObservationSet exact = deflate_keep_count(data, 3554, 7);
  const IngestSummary summary = summarize(exact);
  CHECK(summary.n == 13461);
  CHECK(summary.zero_rows == 3554);
  CHECK(summary.correlation == doctest::Approx(-0.144).epsilon(0.07));

  const ObservationSet all = deflate_keep_fraction(data, 1.0, 7);
  CHECK(all.counts == data.counts);

  const ObservationSet frac = deflate_keep_fraction(data, 0.05, 7);
  const IngestSummary fs = summarize(frac);
  CHECK(fs.zero_rows > 3100);
  CHECK(fs.zero_rows < 4000);
  CHECK(fs.n - fs.zero_rows == 80994 - 71087);
}

TEST_CASE("deflation is deterministic in the seed") {
  const ObservationSet data = ingest_csv(kFixture, DataFormat::ContingencyCsv);
  const ObservationSet a = deflate_keep_count(data, 1000, 3);
  const ObservationSet b = deflate_keep_count(data, 1000, 3);
  CHECK(a.counts == b.counts);
}

TEST_CASE("deflation validates its arguments") {
  const ObservationSet data = ingest_csv(kFixture, DataFormat::ContingencyCsv);
  CHECK_THROWS_AS((void)deflate_keep_fraction(data, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)deflate_keep_fraction(data, 1.5, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)deflate_keep_count(data, -1, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)deflate_keep_count(data, 100000000, 1), std::invalid_argument);

  ObservationSet no_zero;
  no_zero.counts = Eigen::MatrixXi::Ones(5, 2);
  no_zero.design = Eigen::MatrixXd::Ones(5, 1);
  CHECK_THROWS_AS((void)deflate_keep_count(no_zero, 1, 1), std::invalid_argument);
}

TEST_CASE("row compression preserves the total weight and likelihood") {
  const ObservationSet data = ingest_csv(kFixture, DataFormat::ContingencyCsv);
  const auto rows = compress_rows(data);
  CHECK(rows.size() == 45); // distinct cells of the contingency table
  double total = 0.0;
  for (const auto& row : rows) total += row.weight;
  CHECK(total == doctest::Approx(80994.0));
}
