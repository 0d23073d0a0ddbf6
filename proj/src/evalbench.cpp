#include "ncp/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ncp/mlp.hpp"
#include "ncp/rng.hpp"

namespace ncp {

namespace {

constexpr int kValidationRows = 1000;
constexpr int kGridPoints = 1000;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

SampleSet slice_rows(const SampleSet& s, int begin, int count) {
    std::vector<int> idx(count);
    std::iota(idx.begin(), idx.end(), begin);
    SampleSet out;
    out.x = gather_rows(s.x, idx);
    out.y = gather_rows(s.y, idx);
    out.seed = s.seed;
    return out;
}

FittedModel fit_profile(const ModelProfile& profile, const SampleSet& train,
                        const SampleSet& val, std::uint64_t seed) {
    MlpSpec spec_u{train.x.cols, profile.hidden_u, profile.d, MlpSpec::Activation::Gelu};
    MlpSpec spec_v{train.y.cols, profile.hidden_v, profile.d, MlpSpec::Activation::Gelu};
    EmbeddingModel model = init_embedding(spec_u, spec_v, profile.d, seed);
    TrainConfig cfg = profile.train;
    cfg.seed = seed;
    return train_with_model(train, val, cfg, model);
}

WhitenedModel calibrate(const ModelProfile& profile, FittedModel fitted, const SampleSet& train) {
    switch (profile.mode) {
        case FeatureMode::Raw: return as_raw(std::move(fitted));
        case FeatureMode::Centered: return center(std::move(fitted));
        case FeatureMode::Whitened: return whiten(std::move(fitted), train, profile.whiten_eps);
    }
    throw std::logic_error("unknown feature mode");
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / (static_cast<double>(v.size()) - 1.0));
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

ModelProfile default_profile() { return ModelProfile{}; }

double ks_distance(const CdfGrid& a, const CdfGrid& b) {
    if (a.points.size() != b.points.size()) throw std::invalid_argument("cdf grid sizes differ");
    double sup = 0.0;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        if (a.points[i] != b.points[i]) throw std::invalid_argument("cdf grid points differ");
        sup = std::max(sup, std::abs(a.values[i] - b.values[i]));
    }
    return sup;
}

std::vector<std::vector<double>> conditioning_rows(const Matrix& train_x, int count) {
    if (count < 1) throw std::invalid_argument("need at least one conditioning row");
    int n = train_x.rows;
    if (n < 2) throw std::invalid_argument("need at least two training rows");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return train_x(a, 0) < train_x(b, 0); });

    std::vector<std::vector<double>> rows;
    rows.reserve(count);
    if (train_x.cols == 1) {
        double p5 = train_x(order[static_cast<int>(std::llround(0.05 * (n - 1)))], 0);
        double p95 = train_x(order[static_cast<int>(std::llround(0.95 * (n - 1)))], 0);
        for (int j = 0; j < count; ++j) {
            double frac = count == 1 ? 0.5 : static_cast<double>(j) / (count - 1);
            rows.push_back({p5 + (p95 - p5) * frac});
        }
    } else {
        for (int j = 0; j < count; ++j) {
            double frac = count == 1 ? 0.5 : static_cast<double>(j) / (count - 1);
            double rank = 0.05 + 0.9 * frac;
            int pick = order[static_cast<int>(std::llround(rank * (n - 1)))];
            const double* r = train_x.row(pick);
            rows.emplace_back(r, r + train_x.cols);
        }
    }
    return rows;
}

BenchmarkReport run_cde_benchmark(const GeneratorSpec& data, const ModelProfile& profile, int n,
                                  const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("benchmark needs at least one seed");
    if (n < 2 * profile.train.batch_size)
        throw std::invalid_argument("training size too small for the profile batch size");
    if (!has_true_cdf(data.family)) throw std::invalid_argument("family has no exact cdf");

    BenchmarkReport report;
    report.dataset = family_to_string(data.family);
    report.n_train = n;
    std::vector<double> means;
    for (std::uint64_t seed : seeds) {
        auto start = std::chrono::steady_clock::now();
        GeneratorSpec spec = data;
        spec.seed = seed;
        spec.n = n + kValidationRows;
        SampleSet all = generate(spec);
        SampleSet train = slice_rows(all, 0, n);
        SampleSet val = slice_rows(all, n, kValidationRows);
        try {
            FittedModel fitted = fit_profile(profile, train, val, seed);
            WhitenedModel model = calibrate(profile, std::move(fitted), train);
            InferenceEngine engine(model);
            std::vector<double> grid = engine.default_grid(kGridPoints);

            CdeRun run;
            run.seed = seed;
            for (const auto& row : conditioning_rows(train.x)) {
                CdfGrid est = engine.cond_cdf(ConditioningEvent::at(row), grid, true);
                CdfGrid truth;
                truth.points = grid;
                truth.values.resize(grid.size());
                for (std::size_t k = 0; k < grid.size(); ++k)
                    truth.values[k] = true_cdf(spec, row, grid[k]);
                run.ks.push_back(ks_distance(est, truth));
            }
            run.mean_ks = std::accumulate(run.ks.begin(), run.ks.end(), 0.0) / run.ks.size();
            run.runtime_seconds = seconds_since(start);
            means.push_back(run.mean_ks);
            report.runs.push_back(std::move(run));
        } catch (const TrainingDivergedError&) {
            report.failed_seeds.push_back(seed);
        }
    }
    if (!means.empty()) {
        report.mean_ks = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
        report.std_ks = sample_std(means, report.mean_ks);
    }
    return report;
}

CoverageReport run_coverage_benchmark(const GeneratorSpec& data, const ModelProfile& profile,
                                      double alpha, int n_train, int n_test,
                                      const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("benchmark needs at least one seed");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    if (n_test < 1) throw std::invalid_argument("need at least one test point");
    if (y_dim_of(data) != 1) throw std::invalid_argument("coverage needs scalar y");

    CoverageReport report;
    report.dataset = family_to_string(data.family);
    report.nominal = 1.0 - alpha;
    double cov_acc = 0.0, width_acc = 0.0;
    for (std::uint64_t seed : seeds) {
        auto start = std::chrono::steady_clock::now();
        GeneratorSpec spec = data;
        spec.seed = seed;
        spec.n = n_train + kValidationRows + n_test;
        SampleSet all = generate(spec);
        SampleSet train = slice_rows(all, 0, n_train);
        SampleSet val = slice_rows(all, n_train, kValidationRows);
        SampleSet test = slice_rows(all, n_train + kValidationRows, n_test);
        try {
            FittedModel fitted = fit_profile(profile, train, val, seed);
            WhitenedModel model = calibrate(profile, std::move(fitted), train);
            InferenceEngine engine(model);
            std::vector<double> grid = engine.default_grid(kGridPoints);

            CoverageRun run;
            run.seed = seed;
            int covered = 0;
            double width_sum = 0.0;
            for (int i = 0; i < n_test; ++i) {
                const double* xr = test.x.row(i);
                std::vector<double> point(xr, xr + test.x.cols);
                CdfGrid cdf = engine.cond_cdf(ConditioningEvent::at(std::move(point)), grid, true);
                ConfidenceInterval ci = interval_search(cdf, alpha);
                double y = test.y(i, 0);
                if (y >= ci.lower && y <= ci.upper) ++covered;
                width_sum += ci.upper - ci.lower;
            }
            run.coverage = static_cast<double>(covered) / n_test;
            run.mean_width = width_sum / n_test;
            run.runtime_seconds = seconds_since(start);
            cov_acc += run.coverage;
            width_acc += run.mean_width;
            report.runs.push_back(run);
        } catch (const TrainingDivergedError&) {
            report.failed_seeds.push_back(seed);
        }
    }
    if (!report.runs.empty()) {
        report.coverage = cov_acc / report.runs.size();
        report.mean_width = width_acc / report.runs.size();
    }
    return report;
}

std::string cde_report_csv(const BenchmarkReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "dataset,seed,x_index,ks\n";
    for (const auto& run : report.runs)
        for (std::size_t i = 0; i < run.ks.size(); ++i)
            out << report.dataset << "," << run.seed << "," << i << "," << run.ks[i] << "\n";
    return out.str();
}

std::string cde_report_json(const BenchmarkReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "{\"dataset\": \"" << json_escape(report.dataset) << "\", \"n_train\": "
        << report.n_train << ", \"seeds\": " << report.runs.size()
        << ", \"failed_seeds\": " << report.failed_seeds.size()
        << ", \"mean_ks\": " << report.mean_ks << ", \"std_ks\": " << report.std_ks << "}";
    return out.str();
}

std::string coverage_report_csv(const CoverageReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "dataset,seed,coverage,mean_width\n";
    for (const auto& run : report.runs)
        out << report.dataset << "," << run.seed << "," << run.coverage << "," << run.mean_width
            << "\n";
    return out.str();
}

std::string coverage_report_json(const CoverageReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "{\"dataset\": \"" << json_escape(report.dataset) << "\", \"nominal\": "
        << report.nominal << ", \"seeds\": " << report.runs.size()
        << ", \"failed_seeds\": " << report.failed_seeds.size()
        << ", \"coverage\": " << report.coverage << ", \"mean_width\": " << report.mean_width
        << "}";
    return out.str();
}

}  // namespace ncp
