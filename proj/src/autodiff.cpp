#include "ncp/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace ncp {

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_deriv_scalar(double x) {
    double phi_cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    double phi_pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;  // 1/sqrt(2*pi)
    return phi_cdf + x * phi_pdf;
}

int Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, int)> back) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
}

namespace {

// Reducer results skip the validating constructor: overflow must propagate
// to the objective value, where the trainer's divergence check lives.
Matrix scalar_box(double v) {
    Matrix m(1, 1);
    m.data[0] = v;
    return m;
}

}  // namespace

int Tape::leaf(Matrix v) { return push(std::move(v), true, nullptr); }

int Tape::constant(Matrix v) { return push(std::move(v), false, nullptr); }

const Matrix& Tape::grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.rows == 0) n.grad = Matrix(n.value.rows, n.value.cols);
    return n.grad;
}

void Tape::accum(int id, const Matrix& delta) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.rows == 0) {
        n.grad = delta;
        return;
    }
    for (std::size_t i = 0; i < n.grad.data.size(); ++i) n.grad.data[i] += delta.data[i];
}

void Tape::accum_scaled(int id, const Matrix& delta, double c) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.rows == 0) n.grad = Matrix(n.value.rows, n.value.cols);
    for (std::size_t i = 0; i < n.grad.data.size(); ++i) n.grad.data[i] += c * delta.data[i];
}

int Tape::matmul(int a, int b) {
    Matrix v = ncp::matmul(nodes_[a].value, nodes_[b].value);
    bool rg = needs_grad(a) || needs_grad(b);
    return push(std::move(v), rg, [a, b](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        if (t.needs_grad(a)) t.accum(a, matmul_nt(g, t.nodes_[b].value));
        if (t.needs_grad(b)) t.accum(b, matmul_tn(t.nodes_[a].value, g));
    });
}

int Tape::add(int a, int b) {
    Matrix v = ncp::add(nodes_[a].value, nodes_[b].value);
    return push(std::move(v), needs_grad(a) || needs_grad(b), [a, b](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        t.accum(a, g);
        t.accum(b, g);
    });
}

int Tape::sub(int a, int b) {
    Matrix v = ncp::sub(nodes_[a].value, nodes_[b].value);
    return push(std::move(v), needs_grad(a) || needs_grad(b), [a, b](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        t.accum(a, g);
        t.accum_scaled(b, g, -1.0);
    });
}

int Tape::hadamard(int a, int b) {
    Matrix v = ncp::hadamard(nodes_[a].value, nodes_[b].value);
    return push(std::move(v), needs_grad(a) || needs_grad(b), [a, b](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        if (t.needs_grad(a)) t.accum(a, ncp::hadamard(g, t.nodes_[b].value));
        if (t.needs_grad(b)) t.accum(b, ncp::hadamard(g, t.nodes_[a].value));
    });
}

int Tape::scale(int a, double c) {
    Matrix v = ncp::scale(nodes_[a].value, c);
    return push(std::move(v), needs_grad(a), [a, c](Tape& t, int self) {
        t.accum_scaled(a, t.nodes_[self].grad, c);
    });
}

int Tape::transpose(int a) {
    Matrix v = ncp::transpose(nodes_[a].value);
    return push(std::move(v), needs_grad(a), [a](Tape& t, int self) {
        t.accum(a, ncp::transpose(t.nodes_[self].grad));
    });
}

int Tape::add_rowvec(int a, int m) {
    if (nodes_[m].value.rows != 1 || nodes_[m].value.cols != nodes_[a].value.cols)
        throw std::invalid_argument("add_rowvec: shape mismatch");
    Matrix v = nodes_[a].value;
    const Matrix& mv = nodes_[m].value;
    for (int i = 0; i < v.rows; ++i) {
        double* row = v.row(i);
        for (int j = 0; j < v.cols; ++j) row[j] += mv.data[j];
    }
    return push(std::move(v), needs_grad(a) || needs_grad(m), [a, m](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        t.accum(a, g);
        if (t.needs_grad(m)) t.accum(m, col_sums(g));
    });
}

int Tape::sub_rowvec(int a, int m) {
    if (nodes_[m].value.rows != 1 || nodes_[m].value.cols != nodes_[a].value.cols)
        throw std::invalid_argument("sub_rowvec: shape mismatch");
    Matrix v = ncp::sub_rowvec(nodes_[a].value, nodes_[m].value);
    return push(std::move(v), needs_grad(a) || needs_grad(m), [a, m](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        t.accum(a, g);
        if (t.needs_grad(m)) t.accum_scaled(m, col_sums(g), -1.0);
    });
}

int Tape::mul_rowvec(int a, int m) {
    if (nodes_[m].value.rows != 1 || nodes_[m].value.cols != nodes_[a].value.cols)
        throw std::invalid_argument("mul_rowvec: shape mismatch");
    Matrix v = ncp::mul_rowvec(nodes_[a].value, nodes_[m].value);
    return push(std::move(v), needs_grad(a) || needs_grad(m), [a, m](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        if (t.needs_grad(a)) t.accum(a, ncp::mul_rowvec(g, t.nodes_[m].value));
        if (t.needs_grad(m)) t.accum(m, col_sums(ncp::hadamard(g, t.nodes_[a].value)));
    });
}

int Tape::mean_rows(int a) {
    Matrix v = col_means(nodes_[a].value);
    int n = nodes_[a].value.rows;
    return push(std::move(v), needs_grad(a), [a, n](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;  // 1 x d
        Matrix d(t.nodes_[a].value.rows, t.nodes_[a].value.cols);
        for (int i = 0; i < d.rows; ++i) {
            double* row = d.row(i);
            for (int j = 0; j < d.cols; ++j) row[j] = g.data[j] / n;
        }
        t.accum(a, d);
    });
}

int Tape::row_sums(int a) {
    const Matrix& av = nodes_[a].value;
    Matrix v(av.rows, 1);
    for (int i = 0; i < av.rows; ++i) {
        double acc = 0.0;
        const double* row = av.row(i);
        for (int j = 0; j < av.cols; ++j) acc += row[j];
        v(i, 0) = acc;
    }
    return push(std::move(v), needs_grad(a), [a](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;  // n x 1
        Matrix d(t.nodes_[a].value.rows, t.nodes_[a].value.cols);
        for (int i = 0; i < d.rows; ++i) {
            double* row = d.row(i);
            for (int j = 0; j < d.cols; ++j) row[j] = g(i, 0);
        }
        t.accum(a, d);
    });
}

int Tape::slice_rows(int a, int begin, int count) {
    const Matrix& av = nodes_[a].value;
    if (begin < 0 || count < 0 || begin + count > av.rows)
        throw std::invalid_argument("slice_rows: range out of bounds");
    Matrix v(count, av.cols);
    std::copy(av.row(begin), av.row(begin) + static_cast<std::size_t>(count) * av.cols, v.data.begin());
    return push(std::move(v), needs_grad(a), [a, begin, count](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix d(t.nodes_[a].value.rows, t.nodes_[a].value.cols);
        std::copy(g.data.begin(), g.data.end(), d.row(begin));
        (void)count;
        t.accum(a, d);
    });
}

int Tape::sum_all(int a) {
    double acc = 0.0;
    for (double x : nodes_[a].value.data) acc += x;
    return push(scalar_box(acc), needs_grad(a), [a](Tape& t, int self) {
        double g = t.nodes_[self].grad(0, 0);
        Matrix d(t.nodes_[a].value.rows, t.nodes_[a].value.cols);
        for (double& x : d.data) x = g;
        t.accum(a, d);
    });
}

int Tape::mean_all(int a) {
    double acc = 0.0;
    for (double x : nodes_[a].value.data) acc += x;
    double denom = static_cast<double>(nodes_[a].value.data.size());
    return push(scalar_box(acc / denom), needs_grad(a), [a, denom](Tape& t, int self) {
        double g = t.nodes_[self].grad(0, 0) / denom;
        Matrix d(t.nodes_[a].value.rows, t.nodes_[a].value.cols);
        for (double& x : d.data) x = g;
        t.accum(a, d);
    });
}

int Tape::trace(int a) {
    return push(scalar_box(trace_of(nodes_[a].value)), needs_grad(a), [a](Tape& t, int self) {
        double g = t.nodes_[self].grad(0, 0);
        const Matrix& av = t.nodes_[a].value;
        Matrix d(av.rows, av.cols);
        for (int i = 0; i < av.rows; ++i) d(i, i) = g;
        t.accum(a, d);
    });
}

int Tape::frobenius_sq(int a) {
    return push(scalar_box(ncp::frobenius_sq(nodes_[a].value)), needs_grad(a), [a](Tape& t, int self) {
        double g = 2.0 * t.nodes_[self].grad(0, 0);
        t.accum_scaled(a, t.nodes_[a].value, g);
    });
}

namespace {
template <typename F>
Matrix map_matrix(const Matrix& a, F f) {
    Matrix r(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) r.data[i] = f(a.data[i]);
    return r;
}
}  // namespace

int Tape::gelu(int a) {
    Matrix v = map_matrix(nodes_[a].value, gelu_scalar);
    return push(std::move(v), needs_grad(a), [a](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& x = t.nodes_[a].value;
        Matrix d(x.rows, x.cols);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            d.data[i] = g.data[i] * gelu_deriv_scalar(x.data[i]);
        t.accum(a, d);
    });
}

int Tape::exp(int a) {
    Matrix v = map_matrix(nodes_[a].value, [](double x) { return std::exp(x); });
    return push(std::move(v), needs_grad(a), [a](Tape& t, int self) {
        t.accum(a, ncp::hadamard(t.nodes_[self].grad, t.nodes_[self].value));
    });
}

int Tape::neg(int a) {
    Matrix v = ncp::scale(nodes_[a].value, -1.0);
    return push(std::move(v), needs_grad(a), [a](Tape& t, int self) {
        t.accum_scaled(a, t.nodes_[self].grad, -1.0);
    });
}

int Tape::square(int a) {
    Matrix v = ncp::hadamard(nodes_[a].value, nodes_[a].value);
    return push(std::move(v), needs_grad(a), [a](Tape& t, int self) {
        Matrix d = ncp::hadamard(t.nodes_[self].grad, t.nodes_[a].value);
        t.accum_scaled(a, d, 2.0);
    });
}

int Tape::sqrt(int a) {
    Matrix v = map_matrix(nodes_[a].value, [](double x) { return std::sqrt(x); });
    return push(std::move(v), needs_grad(a), [a](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& out = t.nodes_[self].value;
        Matrix d(out.rows, out.cols);
        for (std::size_t i = 0; i < out.data.size(); ++i) d.data[i] = 0.5 * g.data[i] / out.data[i];
        t.accum(a, d);
    });
}

double Tape::scalar(int id) const {
    const Matrix& v = nodes_[id].value;
    if (v.rows != 1 || v.cols != 1) throw std::logic_error("scalar: node is not 1x1");
    return v(0, 0);
}

void Tape::backward(int output) {
    const Matrix& out = nodes_[output].value;
    if (out.rows != 1 || out.cols != 1) throw std::logic_error("backward: output is not scalar");
    nodes_[output].grad = Matrix(1, 1, {1.0});
    for (int id = output; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.rows == 0 || !n.back) continue;
        n.back(*this, id);
    }
}

}  // namespace ncp
