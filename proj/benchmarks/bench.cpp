#include <benchmark/benchmark.h>

#include "mzcount/fit_common.hpp"
#include "mzcount/io.hpp"

using namespace mzcount;

namespace {

ModelSpec mzinb1_spec() {
  ModelSpec spec;
  spec.family = ModelFamily::MZINB1;
  return spec;
}

ParameterSet mzinb1_params() {
  ParameterSet params;
  params.gamma = Eigen::VectorXd::Constant(1, 0.5);
  params.beta = {Eigen::VectorXd::Constant(1, std::log(0.4)),
                 Eigen::VectorXd::Constant(1, std::log(0.7))};
  params.phi = {1.2, 0.8};
  return params;
}

void BM_JointPmf(benchmark::State& state) {
  const ModelSpec spec = mzinb1_spec();
  const ParameterSet params = mzinb1_params();
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  Eigen::VectorXi z(2);
  int k = 0;
  for (auto _ : state) {
    z << k % 4, (k / 4) % 4;
    benchmark::DoNotOptimize(log_pmf_joint(spec, params, x, z));
    ++k;
  }
}
BENCHMARK(BM_JointPmf);

void BM_FixtureFit(benchmark::State& state) {
  const ObservationSet data =
      ingest_csv(std::string(MZCOUNT_DATA_DIR) + "/spain_auto_joint_counts.csv",
                 DataFormat::ContingencyCsv);
  ModelSpec spec;
  spec.family = static_cast<ModelFamily>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_model(data, spec));
  }
}
BENCHMARK(BM_FixtureFit)
    ->Arg(static_cast<int>(ModelFamily::MZIP1))
    ->Arg(static_cast<int>(ModelFamily::MZMNB1))
    ->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
