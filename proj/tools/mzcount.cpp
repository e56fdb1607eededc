// Command line front end: ingestion, fitting, model comparison, prediction,
// zero-row deflation, and simulation for the multivariate claim-count models.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mzcount/fit_base.hpp"
#include "mzcount/fit_em.hpp"
#include "mzcount/fit_mm.hpp"
#include "mzcount/io.hpp"
#include "mzcount/oracle.hpp"
#include "mzcount/rng.hpp"

using nlohmann::json;
using namespace mzcount;

namespace {

constexpr const char* kToolVersion = "mzcount 0.1.0";

enum ExitCode { kOk = 0, kParseError = 2, kNonConvergence = 3, kValidationError = 4 };

int thread_cap() {
  const char* raw = std::getenv("MZCOUNT_THREADS");
  if (raw == nullptr || *raw == '\0') return 1;
  char* end = nullptr;
  const long value = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || value < 1)
    throw std::invalid_argument("MZCOUNT_THREADS must be a positive integer");
  return static_cast<int>(std::min<long>(value, 1024));
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "absent";
  std::uint64_t hash = 1469598103934665603ull; // FNV-1a 64
  char c;
  while (in.get(c)) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setfill('0') << std::setw(16) << hash;
  return out.str();
}

void write_manifest(const std::string& out_path, std::uint64_t seed, const json& config_echo,
                    const std::string& input_path, double wall_seconds) {
  if (out_path.empty()) return;
  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["seed"] = seed;
  manifest["config"] = config_echo;
  manifest["input_digest"] = file_digest(input_path);
  manifest["wall_seconds"] = wall_seconds;
  std::ofstream out(out_path + ".manifest.json");
  out << manifest.dump(2) << "\n";
}

ObservationSet load_data(const std::string& path, const std::string& format_name) {
  const auto format = parse_data_format(format_name);
  if (!format)
    throw std::invalid_argument("unknown format '" + format_name +
                                "' (expected rows-csv or contingency-csv)");
  return ingest_csv(path, *format);
}

std::vector<MarginKind> parse_margins(const std::string& text, int m) {
  std::vector<MarginKind> kinds;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    const auto kind = parse_margin_kind(token);
    if (!kind) throw std::invalid_argument("unknown margin kind '" + token + "'");
    kinds.push_back(*kind);
  }
  if (kinds.size() == 1) kinds.assign(static_cast<std::size_t>(m), kinds.front());
  if (static_cast<int>(kinds.size()) != m)
    throw std::invalid_argument("expected 1 or " + std::to_string(m) + " margin kinds");
  return kinds;
}

CovariateMask parse_covariate_mask(const std::string& text) {
  CovariateMask mask;
  if (text == "none") return mask;
  if (text == "all") {
    mask.gamma = mask.beta = mask.alpha = true;
    return mask;
  }
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    if (token == "gamma") mask.gamma = true;
    else if (token == "beta") mask.beta = true;
    else if (token == "alpha") mask.alpha = true;
    else
      throw std::invalid_argument("covariate mask must be none, all, or a comma list of "
                                  "gamma,beta,alpha; got '" + token + "'");
  }
  return mask;
}

ModelSpec make_spec(const std::string& family_name_text, int m, const std::string& margins_text,
                    const std::string& covariates_text) {
  const auto family = parse_family(family_name_text);
  if (!family) throw std::invalid_argument("unknown family '" + family_name_text + "'");
  ModelSpec spec;
  spec.family = *family;
  spec.m = m;
  if (is_hurdle_family(spec.family)) spec.margin_kinds = parse_margins(margins_text, m);
  spec.covariates = parse_covariate_mask(covariates_text);
  spec.validate();
  return spec;
}

std::string stars(double t) {
  const double a = std::abs(t);
  if (a > 3.290527) return "***";
  if (a > 2.575829) return "**";
  if (a > 1.959964) return "*";
  return "";
}

void print_coefficient_table(std::ostream& out, const FitResult& fit) {
  out << "Family: " << family_name(fit.spec.family) << "\n";
  out << "Coefficients:\n";
  out << std::left << std::setw(22) << "  term" << std::right << std::setw(12) << "Estimate"
      << std::setw(12) << "Std.Error" << std::setw(10) << "t value" << "\n";
  out << std::setprecision(6);
  for (const auto& coef : fit.coefficients) {
    out << "  " << std::left << std::setw(20) << coef.name << std::right << std::setw(12)
        << coef.value;
    if (coef.std_error && coef.t_ratio)
      out << std::setw(12) << *coef.std_error << std::setw(10) << *coef.t_ratio << " "
          << stars(*coef.t_ratio);
    else
      out << std::setw(12) << "-" << std::setw(10) << "-";
    out << "\n";
  }
  out << "---\nSignif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05\n";
  out << "LogLik " << fit.loglik << "  AIC " << fit.aic << "  BIC " << fit.bic << "  params "
      << fit.n_params << "  iterations " << fit.iterations
      << (fit.converged ? "" : "  [not converged]") << "\n";
  if (fit.ell1 && fit.ell2)
    out << "Split: ell1 " << *fit.ell1 << "  ell2 " << *fit.ell2 << "\n";
  if (fit.separation_flag) out << "Warning: separation detected in the mixing part\n";
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd out(arr.size());
  for (std::size_t k = 0; k < arr.size(); ++k) out[static_cast<Eigen::Index>(k)] = arr[k].get<double>();
  return out;
}

json params_json(const ParameterSet& params) {
  json out;
  out["gamma"] = vector_json(params.gamma);
  out["beta"] = json::array();
  for (const auto& b : params.beta) out["beta"].push_back(vector_json(b));
  out["alpha"] = json::array();
  for (const auto& a : params.alpha) out["alpha"].push_back(vector_json(a));
  out["phi"] = params.phi;
  out["lambda0"] = params.lambda0;
  return out;
}

ParameterSet params_from_json(const json& doc) {
  ParameterSet params;
  params.gamma = vector_from_json(doc.at("gamma"));
  for (const auto& b : doc.at("beta")) params.beta.push_back(vector_from_json(b));
  if (doc.contains("alpha"))
    for (const auto& a : doc["alpha"]) params.alpha.push_back(vector_from_json(a));
  if (doc.contains("phi")) params.phi = doc["phi"].get<std::vector<double>>();
  if (doc.contains("lambda0")) params.lambda0 = doc["lambda0"].get<double>();
  return params;
}

json spec_json(const ModelSpec& spec) {
  json out;
  out["family"] = family_name(spec.family);
  out["m"] = spec.m;
  json margins = json::array();
  for (MarginKind kind : spec.margin_kinds) margins.push_back(margin_kind_name(kind));
  out["margins"] = margins;
  out["covariates"] = {{"gamma", spec.covariates.gamma},
                       {"beta", spec.covariates.beta},
                       {"alpha", spec.covariates.alpha}};
  return out;
}

ModelSpec spec_from_json(const json& doc) {
  ModelSpec spec;
  const auto family = parse_family(doc.at("family").get<std::string>());
  if (!family) throw std::invalid_argument("unknown family in spec document");
  spec.family = *family;
  spec.m = doc.at("m").get<int>();
  if (doc.contains("margins"))
    for (const auto& name : doc["margins"]) {
      const auto kind = parse_margin_kind(name.get<std::string>());
      if (!kind) throw std::invalid_argument("unknown margin kind in spec document");
      spec.margin_kinds.push_back(*kind);
    }
  if (doc.contains("covariates")) {
    spec.covariates.gamma = doc["covariates"].value("gamma", false);
    spec.covariates.beta = doc["covariates"].value("beta", false);
    spec.covariates.alpha = doc["covariates"].value("alpha", false);
  }
  spec.validate();
  return spec;
}

json fit_json(const FitResult& fit) {
  json out;
  out["spec"] = spec_json(fit.spec);
  out["loglik"] = fit.loglik;
  out["aic"] = fit.aic;
  out["bic"] = fit.bic;
  out["n_params"] = fit.n_params;
  out["n_obs"] = fit.n_obs;
  out["iterations"] = fit.iterations;
  out["converged"] = fit.converged;
  out["separation"] = fit.separation_flag;
  if (fit.ell1) out["ell1"] = *fit.ell1;
  if (fit.ell2) out["ell2"] = *fit.ell2;
  out["params"] = params_json(fit.params);
  json coefs = json::array();
  for (const auto& coef : fit.coefficients) {
    json row;
    row["term"] = coef.name;
    row["estimate"] = coef.value;
    if (coef.std_error) row["std_error"] = *coef.std_error;
    if (coef.t_ratio) row["t_ratio"] = *coef.t_ratio;
    coefs.push_back(row);
  }
  out["coefficients"] = coefs;
  return out;
}

FitResult run_fit(const ObservationSet& data, const ModelSpec& spec, const FitConfig& config) {
  return fit_model(data, spec, config);
}

struct ProfileTable {
  std::vector<std::string> names;
  Eigen::MatrixXd design; // one row per profile, intercept prepended
};

ProfileTable read_profiles(const std::string& path, int expected_p) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty profiles file", 0);
  std::stringstream header(line);
  std::vector<std::string> columns;
  std::string token;
  while (std::getline(header, token, ',')) {
    while (!token.empty() && (token.back() == '\r' || token.back() == ' ')) token.pop_back();
    columns.push_back(token);
  }
  if (columns.empty() || columns.front() != "name")
    throw ParseError("profiles header must start with 'name'", 1);
  const int p = static_cast<int>(columns.size()) - 1;
  if (p != expected_p)
    throw std::invalid_argument("profiles carry " + std::to_string(p) +
                                " covariates but the fit used " + std::to_string(expected_p));
  ProfileTable table;
  std::vector<std::vector<double>> rows;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream fields(line);
    std::vector<std::string> parts;
    while (std::getline(fields, token, ',')) parts.push_back(token);
    if (static_cast<int>(parts.size()) != p + 1)
      throw ParseError("expected " + std::to_string(p + 1) + " fields", line_number);
    table.names.push_back(parts.front());
    std::vector<double> x(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
      try {
        x[static_cast<std::size_t>(j)] = std::stod(parts[static_cast<std::size_t>(j + 1)]);
      } catch (const std::exception&) {
        throw ParseError("expected a real covariate value", line_number);
      }
    }
    rows.push_back(std::move(x));
  }
  if (rows.empty()) throw ParseError("no profiles", line_number);
  table.design.resize(static_cast<Eigen::Index>(rows.size()), p + 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    table.design(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (int j = 0; j < p; ++j)
      table.design(static_cast<Eigen::Index>(i), j + 1) = rows[i][static_cast<std::size_t>(j)];
  }
  return table;
}

int design_width(const ModelSpec& spec, const ParameterSet& params) {
  // widest coefficient block determines the design width the fit used
  Eigen::Index width = 1;
  width = std::max(width, params.gamma.size());
  for (const auto& b : params.beta) width = std::max(width, b.size());
  for (const auto& a : params.alpha) width = std::max(width, a.size());
  return static_cast<int>(width);
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& data_path, const std::string& format, const std::string& out) {
  const ObservationSet data = load_data(data_path, format);
  const IngestSummary summary = summarize(data);
  std::cout << "n " << summary.n << "  m " << summary.m << "  p " << summary.p << "\n"
            << "zero rows " << summary.zero_rows << " (" << std::setprecision(4)
            << 100.0 * summary.zero_fraction << "%)\n"
            << "correlation(z1,z2) " << std::setprecision(6) << summary.correlation << "\n";
  if (!out.empty()) {
    json doc = {{"n", summary.n},       {"m", summary.m},
                {"p", summary.p},       {"zero_rows", summary.zero_rows},
                {"zero_fraction", summary.zero_fraction}, {"correlation", summary.correlation}};
    std::ofstream file(out);
    file << doc.dump(2) << "\n";
    write_manifest(out, 0, {{"command", "ingest"}, {"format", format}}, data_path, 0.0);
  }
  return kOk;
}

int cmd_fit(const std::string& data_path, const std::string& format,
            const std::string& family_text, const std::string& margins, const std::string& mask,
            int max_iter, double tol, std::uint64_t seed, const std::string& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const ObservationSet data = load_data(data_path, format);
  const ModelSpec spec = make_spec(family_text, data.m(), margins, mask);
  FitConfig config;
  config.max_iter = max_iter;
  config.loglik_tol = tol;
  const FitResult fit = run_fit(data, spec, config);
  print_coefficient_table(std::cout, fit);
  if (!out.empty()) {
    std::ofstream file(out);
    file << fit_json(fit).dump(2) << "\n";
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out, seed,
                   {{"command", "fit"}, {"family", family_text}, {"margins", margins},
                    {"covariates", mask}, {"max_iter", max_iter}, {"tol", tol}},
                   data_path, wall);
  }
  return fit.converged ? kOk : kNonConvergence;
}

int cmd_compare(const std::string& data_path, const std::string& format,
                const std::string& families_text, const std::string& margins, int max_iter,
                double tol, const std::string& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const ObservationSet data = load_data(data_path, format);

  std::vector<std::string> requested;
  if (families_text == "all15") {
    for (ModelFamily family : kAllFamilies) requested.push_back(family_name(family));
  } else {
    std::stringstream stream(families_text);
    std::string token;
    while (std::getline(stream, token, ',')) requested.push_back(token);
  }
  if (requested.empty()) throw std::invalid_argument("no families requested");

  struct Row {
    std::string family;
    bool ok = false;
    std::string error;
    FitResult fit;
  };
  std::vector<Row> rows;
  FitConfig config;
  config.max_iter = max_iter;
  config.loglik_tol = tol;
  (void)thread_cap(); // fits run serially; results are invariant to the cap
  for (const auto& name : requested) {
    Row row;
    row.family = name;
    try {
      const ModelSpec spec = make_spec(name, data.m(), margins, "none");
      row.fit = run_fit(data, spec, config);
      row.ok = true;
    } catch (const std::exception& error) {
      row.error = error.what();
    }
    rows.push_back(std::move(row));
  }

  double best_aic = std::numeric_limits<double>::infinity();
  double best_bic = std::numeric_limits<double>::infinity();
  for (const auto& row : rows)
    if (row.ok) {
      best_aic = std::min(best_aic, row.fit.aic);
      best_bic = std::min(best_bic, row.fit.bic);
    }

  std::cout << std::left << std::setw(10) << "Model" << std::right << std::setw(12) << "Params"
            << std::setw(14) << "LogLik" << std::setw(14) << "AIC" << std::setw(14) << "BIC"
            << "  flags\n";
  json table = json::array();
  for (const auto& row : rows) {
    if (!row.ok) {
      std::cout << std::left << std::setw(10) << row.family << "  failed: " << row.error << "\n";
      table.push_back({{"family", row.family}, {"error", row.error}});
      continue;
    }
    std::string flags;
    if (std::abs(row.fit.aic - best_aic) < 5e-3) flags += " AIC-best";
    if (std::abs(row.fit.bic - best_bic) < 5e-3) flags += " BIC-best";
    std::cout << std::left << std::setw(10) << row.family << std::right << std::setw(12)
              << row.fit.n_params << std::fixed << std::setprecision(2) << std::setw(14)
              << row.fit.loglik << std::setw(14) << row.fit.aic << std::setw(14) << row.fit.bic
              << std::defaultfloat << " " << flags << "\n";
    json entry = fit_json(row.fit);
    entry["family"] = row.family;
    entry["aic_best"] = std::abs(row.fit.aic - best_aic) < 5e-3;
    entry["bic_best"] = std::abs(row.fit.bic - best_bic) < 5e-3;
    table.push_back(entry);
  }
  if (!out.empty()) {
    std::ofstream file(out);
    file << table.dump(2) << "\n";
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out, 0,
                   {{"command", "compare"}, {"families", families_text}, {"margins", margins},
                    {"max_iter", max_iter}, {"tol", tol}},
                   data_path, wall);
  }
  for (const auto& row : rows)
    if (!row.ok) return kNonConvergence;
  return kOk;
}

int cmd_predict(const std::string& fit_path, const std::string& profiles_path,
                const std::string& out) {
  std::ifstream in(fit_path);
  if (!in) throw ParseError("cannot open '" + fit_path + "'", 0);
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& error) {
    throw ParseError(std::string("bad fit artifact: ") + error.what(), 0);
  }
  const ModelSpec spec = spec_from_json(doc.at("spec"));
  const ParameterSet params = params_from_json(doc.at("params"));
  const int p = design_width(spec, params) - 1;
  validate_parameters(spec, params, p);
  const ProfileTable profiles = read_profiles(profiles_path, p);

  json results = json::array();
  std::cout << std::left << std::setw(16) << "Profile" << std::right << std::setw(14)
            << "TotalMean" << std::setw(14) << "TotalVar" << std::setw(12) << "Var/Mean" << "\n";
  for (Eigen::Index i = 0; i < profiles.design.rows(); ++i) {
    const MomentSummary mom = moments(spec, params, profiles.design.row(i).transpose());
    const double ratio = mom.total_mean > 0 ? mom.total_variance / mom.total_mean : 0.0;
    std::cout << std::left << std::setw(16) << profiles.names[static_cast<std::size_t>(i)]
              << std::right << std::setprecision(6) << std::setw(14) << mom.total_mean
              << std::setw(14) << mom.total_variance << std::setw(12) << ratio << "\n";
    json entry;
    entry["name"] = profiles.names[static_cast<std::size_t>(i)];
    entry["mean"] = std::vector<double>(mom.mean.data(), mom.mean.data() + mom.mean.size());
    entry["variance"] =
        std::vector<double>(mom.variance.data(), mom.variance.data() + mom.variance.size());
    entry["total_mean"] = mom.total_mean;
    entry["total_variance"] = mom.total_variance;
    json cov = json::array();
    for (Eigen::Index r = 0; r < mom.covariance.rows(); ++r)
      cov.push_back(std::vector<double>(mom.covariance.row(r).begin(), mom.covariance.row(r).end()));
    entry["covariance"] = cov;
    results.push_back(entry);
  }
  if (!out.empty()) {
    std::ofstream file(out);
    file << results.dump(2) << "\n";
    write_manifest(out, 0, {{"command", "predict"}, {"fit", fit_path}}, profiles_path, 0.0);
  }
  return kOk;
}

int cmd_deflate(const std::string& data_path, const std::string& format, long keep_count,
                double keep_fraction, std::uint64_t seed, const std::string& out) {
  const ObservationSet data = load_data(data_path, format);
  ObservationSet reduced;
  if (keep_count >= 0 && keep_fraction >= 0)
    throw std::invalid_argument("choose one of --keep-count / --keep-fraction");
  if (keep_count >= 0)
    reduced = deflate_keep_count(data, keep_count, seed);
  else if (keep_fraction >= 0)
    reduced = deflate_keep_fraction(data, keep_fraction, seed);
  else
    throw std::invalid_argument("one of --keep-count / --keep-fraction is required");
  const IngestSummary summary = summarize(reduced);
  std::cout << "kept n " << summary.n << "  zero rows " << summary.zero_rows
            << "  correlation " << std::setprecision(6) << summary.correlation << "\n";
  if (!out.empty()) {
    write_rows_csv(out, reduced);
    write_manifest(out, seed,
                   {{"command", "deflate"}, {"keep_count", keep_count},
                    {"keep_fraction", keep_fraction}},
                   data_path, 0.0);
  }
  return kOk;
}

int cmd_simulate(const std::string& spec_path, long n, std::uint64_t seed,
                 const std::string& out) {
  std::ifstream in(spec_path);
  if (!in) throw ParseError("cannot open '" + spec_path + "'", 0);
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& error) {
    throw ParseError(std::string("bad simulation spec: ") + error.what(), 0);
  }
  const ModelSpec spec = spec_from_json(doc);
  const ParameterSet params = params_from_json(doc.at("params"));
  if (n < 0) throw std::invalid_argument("n must be nonnegative");

  std::vector<double> binary_probs;
  if (doc.contains("design") && doc["design"].contains("binary_probs"))
    binary_probs = doc["design"]["binary_probs"].get<std::vector<double>>();
  const int p = static_cast<int>(binary_probs.size());
  validate_parameters(spec, params, p);

  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  for (long i = 0; i < n; ++i) {
    auto rng = Rng::stream(seed ^ 0x9e3779b97f4a7c15ull, static_cast<std::uint64_t>(i));
    for (int j = 0; j < p; ++j)
      design(i, j + 1) = rng.bernoulli(binary_probs[static_cast<std::size_t>(j)]) ? 1.0 : 0.0;
  }

  ObservationSet sample;
  if (n == 0) {
    sample.counts.resize(0, spec.m);
    sample.design.resize(0, p + 1);
  } else {
    sample = sample_joint(spec, params, design, seed);
  }
  write_rows_csv(out, sample);
  std::cout << "wrote " << n << " rows to " << out << "\n";
  write_manifest(out, seed, {{"command", "simulate"}, {"n", n}, {"spec", spec_path}}, spec_path,
                 0.0);
  return kOk;
}

int cmd_self_check() {
  const SelfCheckReport report = run_self_check();
  for (const auto& message : report.messages) std::cout << message << "\n";
  std::cout << report.passed << " passed, " << report.failed << " failed\n";
  return report.ok() ? kOk : kValidationError;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate zero-inflated / zero-modified claim-count modeling"};
  app.require_subcommand(0, 1);
  bool self_check = false;
  app.add_flag("--self-check", self_check, "Run the built-in oracle battery and exit");

  std::string data_path, format = "rows-csv", out;
  std::string family_text, margins = "usnb", mask = "none";
  std::string families_text = "all15";
  std::string fit_path, profiles_path, spec_path;
  int max_iter = 50000;
  double tol = 1e-8;
  std::uint64_t seed = 1;
  long keep_count = -1, n_rows = 0;
  double keep_fraction = -1.0;

  auto* ingest = app.add_subcommand("ingest", "Read and summarize a dataset");
  ingest->add_option("--data", data_path)->required();
  ingest->add_option("--format", format);
  ingest->add_option("--out", out);

  auto* fit = app.add_subcommand("fit", "Fit one model");
  fit->add_option("--data", data_path)->required();
  fit->add_option("--format", format);
  fit->add_option("--family", family_text)->required();
  fit->add_option("--margins", margins);
  fit->add_option("--covariates", mask);
  fit->add_option("--max-iter", max_iter);
  fit->add_option("--tol", tol);
  fit->add_option("--seed", seed);
  fit->add_option("--out", out);

  auto* compare = app.add_subcommand("compare", "Fit and rank several families");
  compare->add_option("--data", data_path)->required();
  compare->add_option("--format", format);
  compare->add_option("--families", families_text);
  compare->add_option("--margins", margins);
  compare->add_option("--max-iter", max_iter);
  compare->add_option("--tol", tol);
  compare->add_option("--out", out);

  auto* predict = app.add_subcommand("predict", "Moments for risk profiles from a fit artifact");
  predict->add_option("--fit", fit_path)->required();
  predict->add_option("--profiles", profiles_path)->required();
  predict->add_option("--out", out);

  auto* deflate = app.add_subcommand("deflate", "Subsample the all-zero rows");
  deflate->add_option("--data", data_path)->required();
  deflate->add_option("--format", format);
  deflate->add_option("--keep-count", keep_count);
  deflate->add_option("--keep-fraction", keep_fraction);
  deflate->add_option("--seed", seed);
  deflate->add_option("--out", out);

  auto* simulate = app.add_subcommand("simulate", "Draw a synthetic dataset");
  simulate->add_option("--spec", spec_path)->required();
  simulate->add_option("--n", n_rows);
  simulate->add_option("--seed", seed);
  simulate->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    return app.exit(error) == 0 ? kOk : kParseError;
  }

  try {
    (void)thread_cap();
    if (self_check) return cmd_self_check();
    if (ingest->parsed()) return cmd_ingest(data_path, format, out);
    if (fit->parsed())
      return cmd_fit(data_path, format, family_text, margins, mask, max_iter, tol, seed, out);
    if (compare->parsed())
      return cmd_compare(data_path, format, families_text, margins, max_iter, tol, out);
    if (predict->parsed()) return cmd_predict(fit_path, profiles_path, out);
    if (deflate->parsed())
      return cmd_deflate(data_path, format, keep_count, keep_fraction, seed, out);
    if (simulate->parsed()) return cmd_simulate(spec_path, n_rows, seed, out);
    std::cout << app.help();
    return kOk;
  } catch (const ParseError& error) {
    std::cerr << "parse error: " << error.what() << "\n";
    return kParseError;
  } catch (const NonConvergenceError& error) {
    std::cerr << "non-convergence: " << error.what() << "\n";
    return kNonConvergence;
  } catch (const std::invalid_argument& error) {
    std::cerr << "validation error: " << error.what() << "\n";
    return kValidationError;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kValidationError;
  }
}
