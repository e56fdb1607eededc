#pragma once

#include <string>

#include "mzcount/model.hpp"

namespace mzcount {

struct ParseError : std::runtime_error {
  ParseError(const std::string& message, int line_number)
      : std::runtime_error(message + " (line " + std::to_string(line_number) + ")"),
        line(line_number) {}
  int line = 0;
};

/// rows-csv: header z1..zm,x1..xp, one observation per row.
/// contingency-csv: header z1,z2,count, expanded to count identical rows.
enum class DataFormat { RowsCsv, ContingencyCsv };

std::optional<DataFormat> parse_data_format(std::string_view name);

struct IngestSummary {
  long n = 0;
  int m = 0;
  int p = 0;
  long zero_rows = 0;
  double zero_fraction = 0.0;
  double correlation = 0.0; // Pearson, first two margins
};

IngestSummary summarize(const ObservationSet& data);

/// Parses and validates; prepends the intercept column.
ObservationSet ingest_csv(const std::string& path, DataFormat format);

/// Keeps every nonzero row and a seeded random subset of the all-zero rows,
/// preserving original row order. Exactly keep_count zero rows survive.
ObservationSet deflate_keep_count(const ObservationSet& data, long keep_count,
                                  std::uint64_t seed);
/// Bernoulli thinning of the all-zero rows with probability keep_fraction.
ObservationSet deflate_keep_fraction(const ObservationSet& data, double keep_fraction,
                                     std::uint64_t seed);

void write_rows_csv(const std::string& path, const ObservationSet& data);

} // namespace mzcount
