#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ncp/datasets.hpp"
#include "ncp/evalbench.hpp"
#include "ncp/inference.hpp"
#include "ncp/mlp.hpp"
#include "ncp/postprocess.hpp"
#include "ncp/rng.hpp"

using namespace ncp;

namespace {

CdfGrid grid_of(std::vector<double> t, std::vector<double> f) {
    CdfGrid g;
    g.points = std::move(t);
    g.values = std::move(f);
    return g;
}

ModelProfile tiny_profile() {
    ModelProfile p;
    p.hidden_u = {8};
    p.hidden_v = {8};
    p.d = 4;
    p.train.epochs = 2;
    p.train.patience = 2;
    p.train.batch_size = 16;
    p.mode = FeatureMode::Whitened;
    return p;
}

FittedModel zero_sigma_fit(const Matrix& x, const Matrix& y) {
    MlpSpec su, sv;
    su.input_dim = x.cols;
    su.hidden = {6};
    su.output_dim = 2;
    sv = su;
    sv.input_dim = y.cols;
    FittedModel fit;
    fit.model = init_embedding(su, sv, 2, 0);
    fit.model.w(0, 0) = 40.0;
    fit.model.w(0, 1) = 40.0;
    fit.stats = compute_standardization(x, y);
    fit.train_x_features = forward_u(fit.model, fit.stats.apply_x(x));
    fit.train_y_features = forward_v(fit.model, fit.stats.apply_y(y));
    fit.train_x_values = x;
    fit.train_y_values = y;
    fit.u_mean = col_means(fit.train_x_features);
    fit.v_mean = col_means(fit.train_y_features);
    return fit;
}

}  // namespace

TEST_CASE("ks distance basics") {
    std::vector<double> t = {0.0, 0.5, 1.0};
    CHECK(ks_distance(grid_of(t, {0.1, 0.4, 1.0}), grid_of(t, {0.1, 0.4, 1.0})) == 0.0);
    CHECK(ks_distance(grid_of(t, {0.0, 0.0, 0.0}), grid_of(t, {1.0, 1.0, 1.0})) == 1.0);

    int k = 1001;
    std::vector<double> fine(k), lin(k), quad(k);
    for (int i = 0; i < k; ++i) {
        fine[i] = i / 1000.0;
        lin[i] = fine[i];
        quad[i] = fine[i] * fine[i];
    }
    CHECK(ks_distance(grid_of(fine, lin), grid_of(fine, quad)) ==
          doctest::Approx(0.25).epsilon(1e-6));

    CHECK_THROWS_AS(ks_distance(grid_of({0.0}, {0.5}), grid_of({0.0, 1.0}, {0.5, 1.0})),
                    std::invalid_argument);
    CHECK_THROWS_AS(ks_distance(grid_of({0.0}, {0.5}), grid_of({0.5}, {0.5})),
                    std::invalid_argument);
}

TEST_CASE("ks distance is a metric on shared grids") {
    Rng rng(1);
    std::vector<double> t(20);
    for (int i = 0; i < 20; ++i) t[i] = i;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> fa(20), fb(20), fc(20);
        for (int i = 0; i < 20; ++i) {
            fa[i] = rng.uniform();
            fb[i] = rng.uniform();
            fc[i] = rng.uniform();
        }
        CdfGrid a = grid_of(t, fa), b = grid_of(t, fb), c = grid_of(t, fc);
        CHECK(ks_distance(a, b) == ks_distance(b, a));
        CHECK(ks_distance(a, c) <= ks_distance(a, b) + ks_distance(b, c) + 1e-15);
        CHECK(ks_distance(a, b) >= 0.0);
    }
}

TEST_CASE("conditioning rows interpolate between the 5th and 95th percentiles") {
    int n = 101;
    Matrix x(n, 1);
    Rng rng(2);
    std::vector<int> perm = rng.permutation(n);
    for (int i = 0; i < n; ++i) x(i, 0) = perm[i];

    std::vector<std::vector<double>> rows = conditioning_rows(x, 19);
    REQUIRE(rows.size() == 19);
    for (int j = 0; j < 19; ++j) {
        REQUIRE(rows[j].size() == 1);
        CHECK(rows[j][0] == doctest::Approx(5.0 + 5.0 * j));
    }
    std::vector<std::vector<double>> one = conditioning_rows(x, 1);
    CHECK(one[0][0] == doctest::Approx(50.0));

    CHECK_THROWS_AS(conditioning_rows(x, 0), std::invalid_argument);
    Matrix tiny(1, 1);
    CHECK_THROWS_AS(conditioning_rows(tiny, 19), std::invalid_argument);
}

TEST_CASE("vector conditioning rows are training rows in rank order") {
    int n = 80;
    Matrix x(n, 3);
    Rng rng(3);
    for (double& v : x.data) v = rng.normal();
    std::vector<std::vector<double>> rows = conditioning_rows(x, 7);
    REQUIRE(rows.size() == 7);
    for (std::size_t j = 0; j < rows.size(); ++j) {
        REQUIRE(rows[j].size() == 3);
        bool is_training_row = false;
        for (int r = 0; r < n && !is_training_row; ++r) {
            bool same = true;
            for (int c = 0; c < 3; ++c) same = same && x(r, c) == rows[j][c];
            is_training_row = same;
        }
        CHECK(is_training_row);
        if (j) CHECK(rows[j][0] >= rows[j - 1][0]);
    }
}

TEST_CASE("cde benchmark is reproducible and sane at toy scale") {
    GeneratorSpec spec;
    spec.family = Family::LinearGaussian;
    ModelProfile profile = tiny_profile();
    std::vector<std::uint64_t> seeds = {1, 2};

    BenchmarkReport a = run_cde_benchmark(spec, profile, 200, seeds);
    BenchmarkReport b = run_cde_benchmark(spec, profile, 200, seeds);

    CHECK(a.dataset == "linear_gaussian");
    CHECK(a.n_train == 200);
    REQUIRE(a.runs.size() == 2);
    CHECK(a.failed_seeds.empty());
    for (const CdeRun& run : a.runs) {
        CHECK(run.ks.size() == 19);
        for (double ks : run.ks) {
            CHECK(ks >= 0.0);
            CHECK(ks <= 1.0);
        }
        CHECK(run.runtime_seconds > 0.0);
    }
    double manual = 0.5 * (a.runs[0].mean_ks + a.runs[1].mean_ks);
    CHECK(a.mean_ks == doctest::Approx(manual).epsilon(1e-15));
    CHECK(a.std_ks >= 0.0);

    CHECK(cde_report_csv(a) == cde_report_csv(b));
    CHECK(cde_report_json(a) == cde_report_json(b));
    std::string csv = cde_report_csv(a);
    CHECK(csv.substr(0, 24) == "dataset,seed,x_index,ks\n");
    CHECK(csv.find("runtime") == std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 19);
    std::string js = cde_report_json(a);
    CHECK(js.find("\"dataset\": \"linear_gaussian\"") != std::string::npos);
    CHECK(js.find("\"seeds\": 2") != std::string::npos);
}

TEST_CASE("divergent seeds are recorded instead of raised") {
    GeneratorSpec spec;
    spec.family = Family::LinearGaussian;
    ModelProfile profile = tiny_profile();
    profile.train.learning_rate = 1e10;
    BenchmarkReport report = run_cde_benchmark(spec, profile, 200, {1, 2});
    CHECK(report.runs.empty());
    REQUIRE(report.failed_seeds.size() == 2);
    CHECK(report.mean_ks == 0.0);
    CHECK(cde_report_csv(report) == "dataset,seed,x_index,ks\n");
    CHECK(cde_report_json(report).find("\"failed_seeds\": 2") != std::string::npos);
}

TEST_CASE("benchmark argument validation") {
    GeneratorSpec spec;
    spec.family = Family::LinearGaussian;
    ModelProfile profile = tiny_profile();
    CHECK_THROWS_AS(run_cde_benchmark(spec, profile, 200, {}), std::invalid_argument);
    CHECK_THROWS_AS(run_cde_benchmark(spec, profile, 8, {1}), std::invalid_argument);
    CHECK_THROWS_AS(run_coverage_benchmark(spec, profile, 0.0, 200, 10, {1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_coverage_benchmark(spec, profile, 1.0, 200, 10, {1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_coverage_benchmark(spec, profile, 0.1, 200, 0, {1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_coverage_benchmark(spec, profile, 0.1, 200, 10, {}),
                    std::invalid_argument);
}

TEST_CASE("coverage benchmark reports coverage and width, wider at lower alpha") {
    GeneratorSpec spec;
    spec.family = Family::LaplaceModel;
    ModelProfile profile = tiny_profile();
    std::vector<std::uint64_t> seeds = {3};

    CoverageReport strict = run_coverage_benchmark(spec, profile, 0.1, 200, 25, seeds);
    CoverageReport loose = run_coverage_benchmark(spec, profile, 0.5, 200, 25, seeds);

    CHECK(strict.dataset == "laplace");
    CHECK(strict.nominal == doctest::Approx(0.9));
    REQUIRE(strict.runs.size() == 1);
    CHECK(strict.failed_seeds.empty());
    CHECK(strict.coverage >= 0.0);
    CHECK(strict.coverage <= 1.0);
    CHECK(strict.mean_width > 0.0);
    CHECK(loose.mean_width < strict.mean_width);

    CoverageReport again = run_coverage_benchmark(spec, profile, 0.1, 200, 25, seeds);
    CHECK(coverage_report_csv(strict) == coverage_report_csv(again));
    CHECK(coverage_report_json(strict) == coverage_report_json(again));
    std::string csv = coverage_report_csv(strict);
    CHECK(csv.substr(0, 33) == "dataset,seed,coverage,mean_width\n");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("zero-sigma model yields the marginal interval at every point") {
    Rng rng(5);
    int n = 500;
    Matrix x(n, 1), y(n, 1);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        y(i, 0) = rng.normal() + 0.2 * x(i, 0);
    }
    WhitenedModel wm = as_raw(zero_sigma_fit(x, y));
    InferenceEngine eng(wm);
    std::vector<double> grid = eng.default_grid(400);
    CdfGrid c1 = eng.cond_cdf(ConditioningEvent::at({-2.0}), grid, true);
    CdfGrid c2 = eng.cond_cdf(ConditioningEvent::at({1.5}), grid, true);
    ConfidenceInterval i1 = interval_search(c1, 0.2);
    ConfidenceInterval i2 = interval_search(c2, 0.2);
    CHECK(i1.lower == i2.lower);
    CHECK(i1.upper == i2.upper);
    CHECK(i1.achieved_mass >= 0.8);
}

TEST_CASE("default profile matches the documented shape") {
    ModelProfile p = default_profile();
    CHECK(p.hidden_u == std::vector<int>{64, 64});
    CHECK(p.hidden_v == std::vector<int>{64, 64});
    CHECK(p.d == 100);
    CHECK(p.mode == FeatureMode::Whitened);
    CHECK(p.whiten_eps == 1e-6);
    CHECK(p.train.batch_size == 512);
    CHECK(p.train.learning_rate == 1e-3);
}
