#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ncp/matrix.hpp"
#include "ncp/oracle.hpp"
#include "ncp/rng.hpp"

using namespace ncp;

namespace {

// Frobenius distance between K and its reconstruction from the truth triplets
// mapped back to the Euclidean geometry.
double reconstruction_error(const DiscreteJoint& joint, const OperatorTruth& truth) {
    int nx = joint.nx(), ny = joint.ny();
    double err = 0.0;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            double k = joint.pmf(i, j) / std::sqrt(joint.mu[i] * joint.nu[j]) -
                       std::sqrt(joint.mu[i] * joint.nu[j]);
            double acc = 0.0;
            for (std::size_t c = 0; c < truth.sigma.size(); ++c)
                acc += truth.sigma[c] * std::sqrt(joint.mu[i]) * truth.u(i, static_cast<int>(c)) *
                       std::sqrt(joint.nu[j]) * truth.v(j, static_cast<int>(c));
            err += (k - acc) * (k - acc);
        }
    return std::sqrt(err);
}

}  // namespace

TEST_CASE("joint construction validates mass and marginals") {
    CHECK_THROWS_AS(make_joint(Matrix::from_rows({{0.5, 0.4}})), std::invalid_argument);
    CHECK_THROWS_AS(make_joint(Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}})), std::invalid_argument);
    DiscreteJoint j = make_joint(Matrix::from_rows({{0.4, 0.1}, {0.1, 0.4}}));
    CHECK(j.mu[0] == doctest::Approx(0.5));
    CHECK(j.nu[1] == doctest::Approx(0.5));
    CHECK(j.y_labels(1, 0) == 1.0);
}

TEST_CASE("product joint has zero spectrum") {
    Matrix pmf(2, 3);
    double mu[2] = {0.3, 0.7}, nu[3] = {0.2, 0.5, 0.3};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) pmf(i, j) = mu[i] * nu[j];
    OperatorTruth truth = build_truth(make_joint(pmf));
    for (double s : truth.sigma) CHECK(std::abs(s) < 1e-12);
}

TEST_CASE("symmetric two-state joint has sigma 0.6") {
    OperatorTruth truth = build_truth(make_joint(Matrix::from_rows({{0.4, 0.1}, {0.1, 0.4}})));
    CHECK(truth.sigma[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("deterministic coupling saturates the operator norm") {
    OperatorTruth truth = build_truth(make_joint(Matrix::from_rows({{0.5, 0.0}, {0.0, 0.5}})));
    CHECK(truth.sigma[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("truth satisfies reconstruction and weighted orthonormality") {
    Rng rng(211);
    for (int trial = 0; trial < 25; ++trial) {
        int nx = 2 + static_cast<int>(rng.below(9));
        int ny = 2 + static_cast<int>(rng.below(9));
        DiscreteJoint joint = random_joint(nx, ny, rng);
        OperatorTruth truth = build_truth(joint);

        CHECK(reconstruction_error(joint, truth) < 1e-10);
        CHECK(truth.sigma[0] <= 1.0 + 1e-10);
        for (std::size_t i = 0; i + 1 < truth.sigma.size(); ++i) CHECK(truth.sigma[i] >= truth.sigma[i + 1]);

        int r = static_cast<int>(truth.sigma.size());
        for (int a = 0; a < r; ++a)
            for (int b = 0; b < r; ++b) {
                double gu = 0.0, gv = 0.0;
                for (int i = 0; i < nx; ++i) gu += joint.mu[i] * truth.u(i, a) * truth.u(i, b);
                for (int j = 0; j < ny; ++j) gv += joint.nu[j] * truth.v(j, a) * truth.v(j, b);
                CHECK(std::abs(gu - (a == b ? 1.0 : 0.0)) < 1e-10);
                CHECK(std::abs(gv - (a == b ? 1.0 : 0.0)) < 1e-10);
            }
    }
}

TEST_CASE("chi squared optimum closed forms") {
    Matrix prod(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) prod(i, j) = 0.25;
    CHECK(chi2_optimum(build_truth(make_joint(prod)), 2) == doctest::Approx(0.0));

    OperatorTruth truth = build_truth(make_joint(Matrix::from_rows({{0.4, 0.1}, {0.1, 0.4}})));
    CHECK(chi2_optimum(truth, 1) == doctest::Approx(-0.36).epsilon(1e-10));
    CHECK(chi2_optimum(truth, 50) == doctest::Approx(chi2_optimum(truth, 2)));
}

TEST_CASE("exact conditional statistics by brute force") {
    DiscreteJoint joint = make_joint(Matrix::from_rows({{0.4, 0.1}, {0.1, 0.4}}));
    CondStats all = exact_cond_stats(joint, {0, 1}, {0, 1});
    CHECK(all.p_b_given_a == doctest::Approx(1.0));

    CondStats s = exact_cond_stats(joint, {0}, {0});
    CHECK(s.p_b_given_a == doctest::Approx(0.8));
    CHECK(s.p_b == doctest::Approx(0.5));
    // y labels are the indices, so E[Y|x0] = 0.2 and Var = 0.2*0.8.
    CHECK(s.e_y_given_a(0, 0) == doctest::Approx(0.2));
    CHECK(s.cov_y_given_a(0, 0) == doctest::Approx(0.16));

    Matrix prod(2, 2);
    for (double& v : prod.data) v = 0.25;
    DiscreteJoint ind = make_joint(prod);
    CondStats p = exact_cond_stats(ind, {0}, {1});
    CHECK(p.p_b_given_a == doctest::Approx(p.p_b));

    CHECK_THROWS_AS(exact_cond_stats(joint, {}, {0}), std::invalid_argument);
}

TEST_CASE("truncated model probability recovers the exact value at full rank") {
    Rng rng(223);
    DiscreteJoint joint = random_joint(6, 5, rng);
    OperatorTruth truth = build_truth(joint);
    int full = static_cast<int>(truth.sigma.size());
    for (int a = 0; a < joint.nx(); ++a)
        for (int b = 0; b < joint.ny(); ++b) {
            double exact = exact_cond_stats(joint, {a}, {b}).p_b_given_a;
            CHECK(std::abs(truncated_model_prob(truth, full, joint, {a}, {b}) - exact) < 1e-12);
            CHECK(truncated_model_prob(truth, 0, joint, {a}, {b}) ==
                  doctest::Approx(exact_cond_stats(joint, {a}, {b}).p_b));
        }

    OperatorTruth t2 = build_truth(make_joint(Matrix::from_rows({{0.4, 0.1}, {0.1, 0.4}})));
    DiscreteJoint j2 = make_joint(Matrix::from_rows({{0.4, 0.1}, {0.1, 0.4}}));
    CHECK(truncated_model_prob(t2, 1, j2, {0}, {0}) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("rank truncation bound holds on random joints") {
    Rng rng(227);
    for (int trial = 0; trial < 40; ++trial) {
        int nx = 2 + static_cast<int>(rng.below(11));
        int ny = 2 + static_cast<int>(rng.below(11));
        DiscreteJoint joint = random_joint(nx, ny, rng);
        OperatorTruth truth = build_truth(joint);
        for (int d = 0; d <= static_cast<int>(truth.sigma.size()); ++d)
            for (int a = 0; a < nx; ++a)
                for (int b = 0; b < ny; ++b) {
                    TruncationBoundResult res = truncation_bound_check(truth, d, joint, {a}, {b});
                    CHECK(res.ok);
                    CHECK(res.slack >= -1e-10);
                }
    }

    // Independent joint: both sides of the bound are zero.
    Matrix prod(3, 3);
    for (double& v : prod.data) v = 1.0 / 9.0;
    DiscreteJoint ind = make_joint(prod);
    OperatorTruth truth = build_truth(ind);
    TruncationBoundResult res = truncation_bound_check(truth, 0, ind, {0}, {0});
    CHECK(res.ok);
}

TEST_CASE("finite differences recover simple gradients") {
    auto norm_sq = [](const std::vector<double>& p) {
        double s = 0.0;
        for (double x : p) s += x * x;
        return s;
    };
    std::vector<double> g = finite_diff_gradient(norm_sq, {1.0, 2.0}, 1e-6);
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-6));

    auto constant = [](const std::vector<double>&) { return 3.5; };
    for (double v : finite_diff_gradient(constant, {1.0, -1.0, 0.5}, 1e-5)) CHECK(v == 0.0);
}

TEST_CASE("one-hot samplers reproduce the joint") {
    DiscreteJoint joint = make_joint(Matrix::from_rows({{0.4, 0.1}, {0.1, 0.4}}));

    OnehotSample s = sample_onehot(joint, 20000, 5);
    REQUIRE(s.x.rows == 20000);
    REQUIRE(s.x.cols == 2);
    double freq00 = 0.0;
    for (int r = 0; r < s.x.rows; ++r) {
        CHECK(s.x(r, s.xi[r]) == 1.0);
        CHECK(s.y(r, s.yi[r]) == 1.0);
        if (s.xi[r] == 0 && s.yi[r] == 0) freq00 += 1.0;
    }
    CHECK(freq00 / s.x.rows == doctest::Approx(0.4).epsilon(0.05));

    OnehotSample e = exact_onehot(joint, 10);
    REQUIRE(e.x.rows == 10);
    int count01 = 0;
    for (int r = 0; r < 10; ++r)
        if (e.xi[r] == 0 && e.yi[r] == 1) ++count01;
    CHECK(count01 == 1);
    CHECK_THROWS_AS(exact_onehot(joint, 7), std::invalid_argument);

    OnehotSample s2 = sample_onehot(joint, 100, 5);
    for (int r = 0; r < 100; ++r) {
        CHECK(s2.xi[r] == s.xi[r]);
        CHECK(s2.yi[r] == s.yi[r]);
    }
}

TEST_CASE("joint loads from csv") {
    std::string path = "joint_test_tmp.csv";
    {
        std::ofstream out(path);
        out << "0.4,0.1\n0.1,0.4\n";
    }
    DiscreteJoint j = load_joint_csv(path);
    CHECK(j.nx() == 2);
    CHECK(j.pmf(1, 1) == doctest::Approx(0.4));
    std::remove(path.c_str());
    CHECK_THROWS(load_joint_csv("missing_joint_file.csv"));
}
