#include "ncp/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "ncp/rng.hpp"

namespace ncp {

Matrix StandardizationStats::apply_x(const Matrix& x) const {
    Matrix c = sub_rowvec(x, x_mean);
    for (int i = 0; i < c.rows; ++i) {
        double* row = c.row(i);
        for (int j = 0; j < c.cols; ++j) row[j] /= x_scale.data[j];
    }
    return c;
}

Matrix StandardizationStats::apply_y(const Matrix& y) const {
    Matrix c = sub_rowvec(y, y_mean);
    for (int i = 0; i < c.rows; ++i) {
        double* row = c.row(i);
        for (int j = 0; j < c.cols; ++j) row[j] /= y_scale.data[j];
    }
    return c;
}

namespace {
// Population standard deviation per column, clamped away from zero so that
// constant coordinates do not produce divisions by zero.
Matrix col_stddev(const Matrix& a, const Matrix& mean) {
    Matrix s(1, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* row = a.row(i);
        for (int j = 0; j < a.cols; ++j) {
            double d = row[j] - mean.data[j];
            s.data[j] += d * d;
        }
    }
    for (int j = 0; j < a.cols; ++j) s.data[j] = std::max(std::sqrt(s.data[j] / a.rows), 1e-12);
    return s;
}
}  // namespace

StandardizationStats compute_standardization(const Matrix& x, const Matrix& y) {
    if (x.rows == 0 || x.rows != y.rows)
        throw std::invalid_argument("compute_standardization: bad sample shapes");
    StandardizationStats st;
    st.x_mean = col_means(x);
    st.x_scale = col_stddev(x, st.x_mean);
    st.y_mean = col_means(y);
    st.y_scale = col_stddev(y, st.y_mean);
    return st;
}

namespace {
MlpParams init_mlp(const MlpSpec& spec, Rng& rng) {
    if (spec.hidden.empty()) throw std::invalid_argument("init_embedding: hidden_widths empty");
    if (spec.input_dim < 1 || spec.output_dim < 1)
        throw std::invalid_argument("init_embedding: bad MlpSpec dims");
    std::vector<int> dims;
    dims.push_back(spec.input_dim);
    dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
    dims.push_back(spec.output_dim);
    MlpParams p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        int fan_in = dims[l], fan_out = dims[l + 1];
        DenseLayer layer;
        layer.w = Matrix(fan_in, fan_out);
        double sd = std::sqrt(2.0 / fan_in);
        for (double& v : layer.w.data) v = rng.normal(0.0, sd);
        layer.b = Matrix(1, fan_out);
        p.layers.push_back(std::move(layer));
    }
    return p;
}
}  // namespace

EmbeddingModel init_embedding(const MlpSpec& spec_u, const MlpSpec& spec_v, int d, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("init_embedding: d must be >= 1");
    if (spec_u.output_dim != d || spec_v.output_dim != d)
        throw std::invalid_argument("init_embedding: spec output_dim != d");
    Rng rng(seed);
    EmbeddingModel m;
    m.spec_u = spec_u;
    m.spec_v = spec_v;
    m.d = d;
    m.u_params = init_mlp(spec_u, rng);
    m.v_params = init_mlp(spec_v, rng);
    m.w = Matrix(1, d);
    for (double& v : m.w.data) v = rng.normal(0.0, 1.0 / d);
    return m;
}

std::vector<double> sigma_of(const EmbeddingModel& m) {
    std::vector<double> s(m.d);
    for (int i = 0; i < m.d; ++i) s[i] = std::exp(-m.w.data[i] * m.w.data[i]);
    return s;
}

Matrix forward_mlp(const MlpParams& p, const MlpSpec& spec, const Matrix& x) {
    if (x.cols != spec.input_dim) throw std::invalid_argument("forward_mlp: input dimension mismatch");
    Matrix h = x;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        h = matmul(h, p.layers[l].w);
        for (int i = 0; i < h.rows; ++i) {
            double* row = h.row(i);
            for (int j = 0; j < h.cols; ++j) row[j] += p.layers[l].b.data[j];
        }
        if (l + 1 < p.layers.size())
            for (double& v : h.data) v = gelu_scalar(v);
    }
    return h;
}

Matrix forward_u(const EmbeddingModel& m, const Matrix& x_std) { return forward_mlp(m.u_params, m.spec_u, x_std); }

Matrix forward_v(const EmbeddingModel& m, const Matrix& y_std) { return forward_mlp(m.v_params, m.spec_v, y_std); }

MlpNodeIds put_mlp_on_tape(Tape& t, const MlpParams& p) {
    MlpNodeIds ids;
    for (const DenseLayer& l : p.layers) ids.layers.emplace_back(t.leaf(l.w), t.leaf(l.b));
    return ids;
}

int forward_mlp_on_tape(Tape& t, const MlpNodeIds& ids, const MlpSpec& spec, int x_const) {
    if (t.value(x_const).cols != spec.input_dim)
        throw std::invalid_argument("forward_mlp_on_tape: input dimension mismatch");
    int h = x_const;
    for (std::size_t l = 0; l < ids.layers.size(); ++l) {
        h = t.add_rowvec(t.matmul(h, ids.layers[l].first), ids.layers[l].second);
        if (l + 1 < ids.layers.size()) h = t.gelu(h);
    }
    return h;
}

std::vector<double> flatten_params(const EmbeddingModel& m) {
    std::vector<double> flat;
    for (const MlpParams* p : {&m.u_params, &m.v_params})
        for (const DenseLayer& l : p->layers) {
            flat.insert(flat.end(), l.w.data.begin(), l.w.data.end());
            flat.insert(flat.end(), l.b.data.begin(), l.b.data.end());
        }
    flat.insert(flat.end(), m.w.data.begin(), m.w.data.end());
    return flat;
}

void set_params(EmbeddingModel& m, const std::vector<double>& flat) {
    std::size_t at = 0;
    auto fill = [&](Matrix& t) {
        if (at + t.data.size() > flat.size())
            throw std::invalid_argument("parameter vector too short");
        std::copy(flat.begin() + at, flat.begin() + at + t.data.size(), t.data.begin());
        at += t.data.size();
    };
    for (MlpParams* p : {&m.u_params, &m.v_params})
        for (DenseLayer& l : p->layers) {
            fill(l.w);
            fill(l.b);
        }
    fill(m.w);
    if (at != flat.size()) throw std::invalid_argument("parameter vector too long");
}

}  // namespace ncp
