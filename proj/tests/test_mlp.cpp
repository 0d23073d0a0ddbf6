#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "ncp/mlp.hpp"
#include "ncp/oracle.hpp"
#include "ncp/rng.hpp"

using namespace ncp;

namespace {

MlpSpec spec(int in, std::vector<int> hidden, int out) {
    return MlpSpec{in, std::move(hidden), out, MlpSpec::Activation::Gelu};
}

}  // namespace

TEST_CASE("init is deterministic per seed") {
    EmbeddingModel a = init_embedding(spec(3, {8}, 4), spec(2, {8}, 4), 4, 42);
    EmbeddingModel b = init_embedding(spec(3, {8}, 4), spec(2, {8}, 4), 4, 42);
    CHECK(a.w.data == b.w.data);
    for (std::size_t l = 0; l < a.u_params.layers.size(); ++l) {
        CHECK(a.u_params.layers[l].w.data == b.u_params.layers[l].w.data);
        CHECK(a.u_params.layers[l].b.data == b.u_params.layers[l].b.data);
    }
    EmbeddingModel c = init_embedding(spec(3, {8}, 4), spec(2, {8}, 4), 4, 43);
    CHECK(a.w.data != c.w.data);
}

TEST_CASE("init draws w at scale 1/d and zero biases") {
    EmbeddingModel m = init_embedding(spec(1, {8}, 100), spec(1, {8}, 100), 100, 0);
    double mean = 0.0;
    for (double x : m.w.data) mean += x;
    mean /= 100.0;
    double var = 0.0;
    for (double x : m.w.data) var += (x - mean) * (x - mean);
    double sd = std::sqrt(var / 99.0);
    CHECK(sd > 0.005);
    CHECK(sd < 0.015);
    for (const DenseLayer& l : m.u_params.layers)
        for (double b : l.b.data) CHECK(b == 0.0);
}

TEST_CASE("init rejects mismatched output dims") {
    CHECK_THROWS_AS(init_embedding(spec(3, {8}, 4), spec(2, {8}, 5), 4, 0), std::invalid_argument);
    CHECK_THROWS_AS(init_embedding(spec(3, {8}, 0), spec(2, {8}, 0), 0, 0), std::invalid_argument);
}

TEST_CASE("sigma closed forms") {
    EmbeddingModel m = init_embedding(spec(1, {4}, 3), spec(1, {4}, 3), 3, 1);
    m.w = Matrix(1, 3, {0.0, 1.0, 2.0});
    std::vector<double> s = sigma_of(m);
    CHECK(s[0] == doctest::Approx(1.0));
    CHECK(s[1] == doctest::Approx(0.367879).epsilon(1e-5));
    CHECK(s[2] == doctest::Approx(0.018316).epsilon(1e-4));

    // Sign flip of w leaves sigma unchanged; larger |w| never increases it.
    m.w = Matrix(1, 3, {-0.5, 0.5, 1.5});
    std::vector<double> s2 = sigma_of(m);
    CHECK(s2[0] == doctest::Approx(s2[1]));
    CHECK(s2[2] < s2[1]);
    for (double v : s2) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("forward with zero parameters is zero") {
    EmbeddingModel m = init_embedding(spec(2, {4}, 3), spec(1, {4}, 3), 3, 5);
    for (DenseLayer& l : m.u_params.layers) {
        for (double& x : l.w.data) x = 0.0;
        for (double& x : l.b.data) x = 0.0;
    }
    Matrix x(5, 2);
    Rng rng(9);
    for (double& v : x.data) v = rng.normal();
    Matrix out = forward_u(m, x);
    for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("a pass-through network exposes the exact gelu") {
    // 1 -> [1] -> 1 with unit weights and zero biases computes gelu(x).
    MlpParams p;
    p.layers.push_back({Matrix(1, 1, {1.0}), Matrix(1, 1, {0.0})});
    p.layers.push_back({Matrix(1, 1, {1.0}), Matrix(1, 1, {0.0})});
    MlpSpec s = spec(1, {1}, 1);
    Matrix out = forward_mlp(p, s, Matrix(2, 1, {0.0, 1.0}));
    CHECK(out(0, 0) == 0.0);
    CHECK(out(1, 0) == doctest::Approx(0.8413447).epsilon(1e-6));
}

TEST_CASE("forward rejects wrong input width") {
    EmbeddingModel m = init_embedding(spec(3, {4}, 2), spec(1, {4}, 2), 2, 0);
    CHECK_THROWS_AS(forward_u(m, Matrix(4, 2)), std::invalid_argument);
}

TEST_CASE("tape forward equals plain forward and differentiates through gelu") {
    EmbeddingModel m = init_embedding(spec(2, {6, 5}, 3), spec(1, {4}, 3), 3, 77);
    Rng rng(78);
    Matrix x(7, 2);
    for (double& v : x.data) v = rng.normal();

    Tape t;
    MlpNodeIds ids = put_mlp_on_tape(t, m.u_params);
    int out = forward_mlp_on_tape(t, ids, m.spec_u, t.constant(x));
    Matrix plain = forward_u(m, x);
    REQUIRE(t.value(out).same_shape(plain));
    for (std::size_t i = 0; i < plain.data.size(); ++i)
        CHECK(t.value(out).data[i] == doctest::Approx(plain.data[i]).epsilon(1e-12));

    // Gradient of sum(forward) w.r.t. the first-layer weights vs finite differences.
    int loss = t.sum_all(out);
    t.backward(loss);
    Matrix analytic = t.grad(ids.layers[0].first);
    Matrix w0 = m.u_params.layers[0].w;
    auto fn = [&](const std::vector<double>& flat) {
        MlpParams p2 = m.u_params;
        p2.layers[0].w = Matrix(w0.rows, w0.cols, flat);
        Matrix o = forward_mlp(p2, m.spec_u, x);
        double s = 0.0;
        for (double v : o.data) s += v;
        return s;
    };
    std::vector<double> numeric = finite_diff_gradient(fn, w0.data, 1e-5);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        double denom = std::max({std::abs(analytic.data[i]), std::abs(numeric[i]), 1e-4});
        CHECK(std::abs(analytic.data[i] - numeric[i]) / denom < 1e-5);
    }
}

TEST_CASE("standardization centers and scales the training split") {
    Rng rng(31);
    Matrix x(200, 2), y(200, 1);
    for (double& v : x.data) v = 3.0 + 2.0 * rng.normal();
    for (double& v : y.data) v = -1.0 + 0.5 * rng.normal();
    StandardizationStats st = compute_standardization(x, y);
    Matrix xs = st.apply_x(x);
    Matrix ys = st.apply_y(y);
    Matrix mx = col_means(xs);
    CHECK(std::abs(mx(0, 0)) < 1e-12);
    CHECK(std::abs(mx(0, 1)) < 1e-12);
    double var = 0.0;
    for (int i = 0; i < ys.rows; ++i) var += ys(i, 0) * ys(i, 0);
    CHECK(var / ys.rows == doctest::Approx(1.0).epsilon(1e-8));
    for (double s : st.x_scale.data) CHECK(s > 0.0);
}

TEST_CASE("flatten and set round-trip all parameters") {
    EmbeddingModel m = init_embedding(spec(2, {5}, 3), spec(3, {4}, 3), 3, 12);
    std::vector<double> flat = flatten_params(m);
    EmbeddingModel m2 = init_embedding(spec(2, {5}, 3), spec(3, {4}, 3), 3, 99);
    set_params(m2, flat);
    CHECK(flatten_params(m2) == flat);
    CHECK(m2.w.data == m.w.data);
    CHECK(m2.u_params.layers[1].b.data == m.u_params.layers[1].b.data);
    CHECK_THROWS_AS(set_params(m2, std::vector<double>(flat.size() - 1)), std::invalid_argument);
}
