#include "mzcount/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mzcount/rng.hpp"

namespace mzcount {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) {
    // trim surrounding whitespace and a possible trailing CR
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    fields.push_back(begin == std::string::npos ? "" : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

int parse_count_field(const std::string& field, int line_number) {
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(field, &used);
  } catch (const std::exception&) {
    throw ParseError("expected an integer count, got '" + field + "'", line_number);
  }
  if (used != field.size())
    throw ParseError("expected an integer count, got '" + field + "'", line_number);
  if (value < 0) throw ParseError("negative count '" + field + "'", line_number);
  if (value > std::numeric_limits<int>::max())
    throw ParseError("count out of range '" + field + "'", line_number);
  return static_cast<int>(value);
}

double parse_real_field(const std::string& field, int line_number) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(field, &used);
  } catch (const std::exception&) {
    throw ParseError("expected a real value, got '" + field + "'", line_number);
  }
  if (used != field.size() || !std::isfinite(value))
    throw ParseError("expected a real value, got '" + field + "'", line_number);
  return value;
}

} // namespace

std::optional<DataFormat> parse_data_format(std::string_view name) {
  if (name == "rows-csv") return DataFormat::RowsCsv;
  if (name == "contingency-csv") return DataFormat::ContingencyCsv;
  return std::nullopt;
}

IngestSummary summarize(const ObservationSet& data) {
  IngestSummary out;
  out.n = data.n();
  out.m = data.m();
  out.p = data.p();
  for (int i = 0; i < data.n(); ++i)
    if (data.zero_row(i)) ++out.zero_rows;
  out.zero_fraction = static_cast<double>(out.zero_rows) / static_cast<double>(out.n);
  if (data.m() >= 2 && data.n() >= 2) {
    const Eigen::VectorXd a = data.counts.col(0).cast<double>();
    const Eigen::VectorXd b = data.counts.col(1).cast<double>();
    const double ma = a.mean(), mb = b.mean();
    const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
    const double va = (a.array() - ma).square().sum();
    const double vb = (b.array() - mb).square().sum();
    out.correlation = va > 0 && vb > 0 ? cov / std::sqrt(va * vb) : 0.0;
  }
  return out;
}

ObservationSet ingest_csv(const std::string& path, DataFormat format) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);

  std::string line;
  int line_number = 0;
  if (!std::getline(in, line)) throw ParseError("empty file", 0);
  ++line_number;
  const auto header = split_csv_line(line);

  int m = 0, p = 0;
  if (format == DataFormat::ContingencyCsv) {
    if (header.size() != 3 || header[0] != "z1" || header[1] != "z2" || header[2] != "count")
      throw ParseError("contingency header must be z1,z2,count", line_number);
    m = 2;
  } else {
    std::size_t k = 0;
    while (k < header.size() && header[k] == "z" + std::to_string(k + 1)) ++k;
    m = static_cast<int>(k);
    if (m < 2) throw ParseError("header must start with count columns z1,z2,...", line_number);
    while (k < header.size() &&
           header[k] == "x" + std::to_string(k - static_cast<std::size_t>(m) + 1))
      ++k;
    p = static_cast<int>(k) - m;
    if (k != header.size())
      throw ParseError("unknown header column '" + header[k] + "'", line_number);
  }

  std::vector<std::vector<int>> counts;
  std::vector<std::vector<double>> covs;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_number);
    if (format == DataFormat::ContingencyCsv) {
      const int z1 = parse_count_field(fields[0], line_number);
      const int z2 = parse_count_field(fields[1], line_number);
      const int cell = parse_count_field(fields[2], line_number);
      for (int r = 0; r < cell; ++r) {
        counts.push_back({z1, z2});
        covs.emplace_back();
      }
    } else {
      std::vector<int> z(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j)
        z[static_cast<std::size_t>(j)] = parse_count_field(fields[static_cast<std::size_t>(j)], line_number);
      std::vector<double> x(static_cast<std::size_t>(p));
      for (int j = 0; j < p; ++j)
        x[static_cast<std::size_t>(j)] =
            parse_real_field(fields[static_cast<std::size_t>(m + j)], line_number);
      counts.push_back(std::move(z));
      covs.push_back(std::move(x));
    }
  }
  if (counts.empty()) throw ParseError("no data rows", line_number);

  ObservationSet data;
  data.counts.resize(static_cast<Eigen::Index>(counts.size()), m);
  data.design.resize(static_cast<Eigen::Index>(counts.size()), p + 1);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (int j = 0; j < m; ++j)
      data.counts(static_cast<Eigen::Index>(i), j) = counts[i][static_cast<std::size_t>(j)];
    data.design(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (int j = 0; j < p; ++j)
      data.design(static_cast<Eigen::Index>(i), j + 1) = covs[i][static_cast<std::size_t>(j)];
  }
  data.validate();
  return data;
}

namespace {

ObservationSet keep_rows(const ObservationSet& data, const std::vector<char>& keep) {
  Eigen::Index kept = 0;
  for (char c : keep) kept += c ? 1 : 0;
  ObservationSet out;
  out.counts.resize(kept, data.counts.cols());
  out.design.resize(kept, data.design.cols());
  Eigen::Index r = 0;
  for (int i = 0; i < data.n(); ++i) {
    if (keep[static_cast<std::size_t>(i)]) {
      out.counts.row(r) = data.counts.row(i);
      out.design.row(r) = data.design.row(i);
      ++r;
    }
  }
  out.validate();
  return out;
}

} // namespace

ObservationSet deflate_keep_count(const ObservationSet& data, long keep_count,
                                  std::uint64_t seed) {
  std::vector<int> zero_rows;
  for (int i = 0; i < data.n(); ++i)
    if (data.zero_row(i)) zero_rows.push_back(i);
  if (zero_rows.empty())
    throw std::invalid_argument("deflate: input has no all-zero rows");
  if (keep_count < 0 || keep_count > static_cast<long>(zero_rows.size()))
    throw std::invalid_argument("deflate: keep count out of range");

  // partial Fisher-Yates over the zero-row index list
  auto rng = Rng::stream(seed, 0);
  std::vector<int> pool = zero_rows;
  std::vector<char> keep(static_cast<std::size_t>(data.n()), 1);
  for (int idx : zero_rows) keep[static_cast<std::size_t>(idx)] = 0;
  for (long k = 0; k < keep_count; ++k) {
    const auto remaining = pool.size() - static_cast<std::size_t>(k);
    const auto pick = static_cast<std::size_t>(k) +
                      static_cast<std::size_t>(rng.uniform() * static_cast<double>(remaining));
    std::swap(pool[static_cast<std::size_t>(k)], pool[std::min(pick, pool.size() - 1)]);
    keep[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])] = 1;
  }
  return keep_rows(data, keep);
}

ObservationSet deflate_keep_fraction(const ObservationSet& data, double keep_fraction,
                                     std::uint64_t seed) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("deflate: keep fraction must lie in (0,1]");
  bool has_zero = false;
  std::vector<char> keep(static_cast<std::size_t>(data.n()), 1);
  for (int i = 0; i < data.n(); ++i) {
    if (data.zero_row(i)) {
      has_zero = true;
      auto rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
      keep[static_cast<std::size_t>(i)] = rng.bernoulli(keep_fraction) ? 1 : 0;
    }
  }
  if (!has_zero) throw std::invalid_argument("deflate: input has no all-zero rows");
  return keep_rows(data, keep);
}

void write_rows_csv(const std::string& path, const ObservationSet& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (int j = 0; j < data.m(); ++j) out << (j ? "," : "") << "z" << (j + 1);
  for (int j = 0; j < data.p(); ++j) out << ",x" << (j + 1);
  out << "\n";
  out.precision(17);
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.m(); ++j) out << (j ? "," : "") << data.counts(i, j);
    for (int j = 0; j < data.p(); ++j) out << "," << data.design(i, j + 1);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

} // namespace mzcount
