#include "ncp/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace ncp {

double loss_cov_form(const Matrix& u, const Matrix& v, const std::vector<double>& sigma) {
    if (u.rows != v.rows || u.cols != v.cols) throw std::invalid_argument("loss_cov_form: shape mismatch");
    if (u.rows < 2) throw std::invalid_argument("loss_cov_form: batch size must be >= 2");
    if (static_cast<int>(sigma.size()) != u.cols) throw std::invalid_argument("loss_cov_form: sigma length");
    const int n = u.rows, d = u.cols;
    Matrix rs(1, d);
    for (int j = 0; j < d; ++j) rs.data[j] = std::sqrt(sigma[j]);
    Matrix zu = mul_rowvec(sub_rowvec(u, col_means(u)), rs);
    Matrix zv = mul_rowvec(sub_rowvec(v, col_means(v)), rs);
    Matrix var_u = scale(matmul_tn(zu, zu), 1.0 / n);
    Matrix var_v = scale(matmul_tn(zv, zv), 1.0 / n);
    Matrix cov_uv = scale(matmul_tn(zu, zv), 1.0 / n);
    // var_u, var_v symmetric: tr(var_u var_v) = sum_ij var_u_ij var_v_ij
    double t1 = 0.0;
    for (std::size_t i = 0; i < var_u.data.size(); ++i) t1 += var_u.data[i] * var_v.data[i];
    return t1 - 2.0 * trace_of(cov_uv);
}

double reg_cov_form(const Matrix& u, const Matrix& v) {
    if (u.rows != v.rows) throw std::invalid_argument("reg_cov_form: row counts differ");
    if (u.rows < 1) throw std::invalid_argument("reg_cov_form: empty batch");
    const int n = u.rows;
    auto term = [n](const Matrix& f) {
        Matrix m2 = scale(matmul_tn(f, f), 1.0 / n);
        for (int i = 0; i < m2.rows; ++i) m2(i, i) -= 1.0;
        Matrix mean = col_means(f);
        return frobenius_sq(m2) + 2.0 * frobenius_sq(mean);
    };
    return term(u) + term(v);
}

namespace {
double dot_scaled(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * s[i] * b[i];
    return acc;
}
double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}
}  // namespace

double loss_pairwise(const std::vector<double>& u, const std::vector<double>& u2,
                     const std::vector<double>& v, const std::vector<double>& v2,
                     const std::vector<double>& s) {
    double a = dot_scaled(u, v2, s);
    double b = dot_scaled(v, u2, s);
    return 0.5 * a * a + 0.5 * b * b - dot_scaled(u, v, s) - dot_scaled(u2, v2, s);
}

double reg_pairwise(const std::vector<double>& u, const std::vector<double>& u2,
                    const std::vector<double>& v, const std::vector<double>& v2) {
    const int d = static_cast<int>(u.size());
    double uu = dot(u, u2), vv = dot(v, v2);
    double du = 0.0, dv = 0.0;
    for (int i = 0; i < d; ++i) {
        du += (u[i] - u2[i]) * (u[i] - u2[i]);
        dv += (v[i] - v2[i]) * (v[i] - v2[i]);
    }
    return uu * uu - du + vv * vv - dv + 2.0 * d;
}

int loss_cov_form_node(Tape& t, int u, int v, int sigma) {
    const int n = t.value(u).rows;
    if (n < 2) throw std::invalid_argument("loss_cov_form_node: batch size must be >= 2");
    int rs = t.sqrt(sigma);
    int uc = t.sub_rowvec(u, t.mean_rows(u));
    int vc = t.sub_rowvec(v, t.mean_rows(v));
    int zu = t.mul_rowvec(uc, rs);
    int zv = t.mul_rowvec(vc, rs);
    int var_u = t.scale(t.matmul(t.transpose(zu), zu), 1.0 / n);
    int var_v = t.scale(t.matmul(t.transpose(zv), zv), 1.0 / n);
    int cov_uv = t.scale(t.matmul(t.transpose(zu), zv), 1.0 / n);
    return t.sub(t.trace(t.matmul(var_u, var_v)), t.scale(t.trace(cov_uv), 2.0));
}

int reg_cov_form_node(Tape& t, int u, int v) {
    const int n = t.value(u).rows;
    const int d = t.value(u).cols;
    int eye = t.constant(Matrix::identity(d));
    auto term = [&](int f) {
        int m2 = t.scale(t.matmul(t.transpose(f), f), 1.0 / n);
        int dev = t.frobenius_sq(t.sub(m2, eye));
        int mean_sq = t.frobenius_sq(t.mean_rows(f));
        return t.add(dev, t.scale(mean_sq, 2.0));
    };
    return t.add(term(u), term(v));
}

namespace {

// mean_i of u_i^T diag(s) v_i via rowsums of the scaled hadamard product.
int mean_paired_bilinear(Tape& t, int zu, int zv) { return t.mean_all(t.row_sums(t.hadamard(zu, zv))); }

int loss_pairwise_mean_node(Tape& t, int zu1, int zu2, int zv1, int zv2) {
    int a = t.row_sums(t.hadamard(zu1, zv2));
    int b = t.row_sums(t.hadamard(zv1, zu2));
    int sq = t.scale(t.add(t.square(a), t.square(b)), 0.5);
    int cross = t.add(t.row_sums(t.hadamard(zu1, zv1)), t.row_sums(t.hadamard(zu2, zv2)));
    return t.mean_all(t.sub(sq, cross));
}

int loss_pairwise_ustat_node(Tape& t, int zu1, int zu2, int zv1, int zv2) {
    const int n1 = t.value(zu1).rows, n2 = t.value(zu2).rows;
    double inv = 1.0 / (static_cast<double>(n1) * n2);
    int g1 = t.scale(t.frobenius_sq(t.matmul(zu1, t.transpose(zv2))), 0.5 * inv);
    int g2 = t.scale(t.frobenius_sq(t.matmul(zv1, t.transpose(zu2))), 0.5 * inv);
    int cross = t.add(mean_paired_bilinear(t, zu1, zv1), mean_paired_bilinear(t, zu2, zv2));
    return t.sub(t.add(g1, g2), cross);
}

int reg_pairwise_mean_node(Tape& t, int u1, int u2, int v1, int v2) {
    const int d = t.value(u1).cols;
    auto part = [&](int a, int b) {
        int dotsq = t.square(t.row_sums(t.hadamard(a, b)));
        int diff = t.row_sums(t.square(t.sub(a, b)));
        return t.sub(dotsq, diff);
    };
    int body = t.mean_all(t.add(part(u1, u2), part(v1, v2)));
    return t.add(body, t.constant(Matrix(1, 1, {2.0 * d})));
}

int reg_pairwise_ustat_node(Tape& t, int u1, int u2, int v1, int v2) {
    const int d = t.value(u1).cols;
    const int n1 = t.value(u1).rows, n2 = t.value(u2).rows;
    double inv = 1.0 / (static_cast<double>(n1) * n2);
    auto part = [&](int a, int b) {
        int gram = t.scale(t.frobenius_sq(t.matmul(a, t.transpose(b))), inv);
        // mean over all pairs of ||a_i - b_j||^2
        int sq_norms = t.add(t.mean_all(t.row_sums(t.square(a))), t.mean_all(t.row_sums(t.square(b))));
        int mean_dot = t.sum_all(t.hadamard(t.mean_rows(a), t.mean_rows(b)));
        int dist = t.sub(sq_norms, t.scale(mean_dot, 2.0));
        return t.sub(gram, dist);
    };
    int body = t.add(part(u1, u2), part(v1, v2));
    return t.add(body, t.constant(Matrix(1, 1, {2.0 * d})));
}

}  // namespace

TotalLossNodes total_loss_node(Tape& t, int u_pool, int v_pool, int sigma, int half,
                               const LossConfig& cfg) {
    if (cfg.gamma < 0.0) throw std::invalid_argument("total_loss: gamma must be >= 0");
    TotalLossNodes out{};
    if (cfg.estimator == LossConfig::Estimator::CovarianceForm) {
        out.lhat = loss_cov_form_node(t, u_pool, v_pool, sigma);
        out.rhat = reg_cov_form_node(t, u_pool, v_pool);
    } else {
        if (2 * half != t.value(u_pool).rows)
            throw std::invalid_argument("total_loss: pooled rows != 2 * half");
        int rs = t.sqrt(sigma);
        int mu = t.mean_rows(u_pool);
        int mv = t.mean_rows(v_pool);
        int u1 = t.slice_rows(u_pool, 0, half), u2 = t.slice_rows(u_pool, half, half);
        int v1 = t.slice_rows(v_pool, 0, half), v2 = t.slice_rows(v_pool, half, half);
        int zu1 = t.mul_rowvec(t.sub_rowvec(u1, mu), rs), zu2 = t.mul_rowvec(t.sub_rowvec(u2, mu), rs);
        int zv1 = t.mul_rowvec(t.sub_rowvec(v1, mv), rs), zv2 = t.mul_rowvec(t.sub_rowvec(v2, mv), rs);
        if (cfg.estimator == LossConfig::Estimator::PairwiseBatchMean) {
            out.lhat = loss_pairwise_mean_node(t, zu1, zu2, zv1, zv2);
            out.rhat = reg_pairwise_mean_node(t, u1, u2, v1, v2);
        } else {
            out.lhat = loss_pairwise_ustat_node(t, zu1, zu2, zv1, zv2);
            out.rhat = reg_pairwise_ustat_node(t, u1, u2, v1, v2);
        }
    }
    out.total = cfg.gamma == 0.0 ? out.lhat : t.add(out.lhat, t.scale(out.rhat, cfg.gamma));
    return out;
}

LossBuild total_loss(Tape& t, const EmbeddingModel& model, const Matrix& x1, const Matrix& x2,
                     const Matrix& y1, const Matrix& y2, const LossConfig& cfg) {
    if (x1.rows != x2.rows || y1.rows != y2.rows || x1.rows != y1.rows)
        throw std::invalid_argument("total_loss: batch sizes differ");
    LossBuild b;
    b.u_ids = put_mlp_on_tape(t, model.u_params);
    b.v_ids = put_mlp_on_tape(t, model.v_params);
    b.w_id = t.leaf(model.w);
    b.sigma_id = t.exp(t.neg(t.square(b.w_id)));
    int x_pool = t.constant(vconcat(x1, x2));
    int y_pool = t.constant(vconcat(y1, y2));
    int u_pool = forward_mlp_on_tape(t, b.u_ids, model.spec_u, x_pool);
    int v_pool = forward_mlp_on_tape(t, b.v_ids, model.spec_v, y_pool);
    b.nodes = total_loss_node(t, u_pool, v_pool, b.sigma_id, x1.rows, cfg);
    return b;
}

}  // namespace ncp
