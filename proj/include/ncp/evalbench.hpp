#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncp/datasets.hpp"
#include "ncp/inference.hpp"
#include "ncp/postprocess.hpp"
#include "ncp/trainer.hpp"

namespace ncp {

// Architecture and calibration choices shared by benchmark runs. The train
// seed and the embedding init seed are set per run from the run seed.
struct ModelProfile {
    std::vector<int> hidden_u{64, 64};
    std::vector<int> hidden_v{64, 64};
    int d = 100;
    TrainConfig train;
    FeatureMode mode = FeatureMode::Whitened;
    double whiten_eps = 1e-6;
};

ModelProfile default_profile();

// Sup over the shared grid of |F_a - F_b|. The two grids must carry
// identical point sets.
double ks_distance(const CdfGrid& a, const CdfGrid& b);

struct CdeRun {
    std::uint64_t seed = 0;
    std::vector<double> ks;  // one entry per conditioning point
    double mean_ks = 0.0;
    double runtime_seconds = 0.0;  // not serialized
};

struct BenchmarkReport {
    std::string dataset;
    int n_train = 0;
    std::vector<CdeRun> runs;
    std::vector<std::uint64_t> failed_seeds;
    double mean_ks = 0.0;  // across successful runs
    double std_ks = 0.0;   // sample standard deviation, 0 for a single run
};

// Per seed: draw n train + 1000 validation pairs, fit, recalibrate per the
// profile, and score the conditional CDF against the exact one at 19
// conditioning points between the 5% and 95% x-percentiles on a shared
// 1000-point grid. Divergent seeds are recorded, not retried.
BenchmarkReport run_cde_benchmark(const GeneratorSpec& data, const ModelProfile& profile, int n,
                                  const std::vector<std::uint64_t>& seeds);

struct CoverageRun {
    std::uint64_t seed = 0;
    double coverage = 0.0;
    double mean_width = 0.0;
    double runtime_seconds = 0.0;  // not serialized
};

struct CoverageReport {
    std::string dataset;
    double nominal = 0.0;
    std::vector<CoverageRun> runs;
    std::vector<std::uint64_t> failed_seeds;
    double coverage = 0.0;    // mean across successful runs
    double mean_width = 0.0;  // mean across successful runs
};

// Per seed: fit on n_train pairs (plus 1000 validation), then build a
// minimal-width interval at level alpha for n_test fresh conditioning points
// and report the fraction that contain the paired y and the mean width.
CoverageReport run_coverage_benchmark(const GeneratorSpec& data, const ModelProfile& profile,
                                      double alpha, int n_train, int n_test,
                                      const std::vector<std::uint64_t>& seeds);

// Long-format CSV (dataset,seed,x_index,ks) and JSON summaries. Runtime is
// deliberately left out so reruns are byte-identical.
std::string cde_report_csv(const BenchmarkReport& report);
std::string cde_report_json(const BenchmarkReport& report);
std::string coverage_report_csv(const CoverageReport& report);
std::string coverage_report_json(const CoverageReport& report);

// The 19 conditioning rows used by run_cde_benchmark, exposed for tests:
// scalar x interpolates values between the two percentiles, vector x picks
// training rows at the matching percentile ranks of the first coordinate.
std::vector<std::vector<double>> conditioning_rows(const Matrix& train_x, int count = 19);

}  // namespace ncp
