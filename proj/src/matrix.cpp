#include "ncp/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ncp {

Matrix::Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
}

Matrix::Matrix(int r, int c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
    if (data.size() != static_cast<std::size_t>(r) * c)
        throw std::invalid_argument("Matrix: data length does not match rows*cols");
    if (!all_finite(*this)) throw std::invalid_argument("Matrix: non-finite entry");
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> r) {
    int nr = static_cast<int>(r.size());
    int nc = nr == 0 ? 0 : static_cast<int>(r.begin()->size());
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(nr) * nc);
    for (const auto& row : r) {
        if (static_cast<int>(row.size()) != nc)
            throw std::invalid_argument("Matrix::from_rows: ragged rows");
        d.insert(d.end(), row.begin(), row.end());
    }
    return Matrix(nr, nc, std::move(d));
}

bool all_finite(const Matrix& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols);
    const int K = a.cols, N = b.cols;
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int k = 0; k < K; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < N; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: row counts differ");
    Matrix c(a.cols, b.cols);
    const int N = b.cols, M = a.cols;
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (int i = 0; i < M; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.row(i);
            for (int j = 0; j < N; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: column counts differ");
    Matrix c(a.rows, b.rows);
    const int K = a.cols;
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

static void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

Matrix add(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add");
    Matrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] + b.data[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "sub");
    Matrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] - b.data[i];
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "hadamard");
    Matrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] * b.data[i];
    return c;
}

Matrix scale(const Matrix& a, double c) {
    Matrix r(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) r.data[i] = a.data[i] * c;
    return r;
}

double trace_of(const Matrix& a) {
    if (a.rows != a.cols) throw std::invalid_argument("trace_of: matrix not square");
    double t = 0.0;
    for (int i = 0; i < a.rows; ++i) t += a(i, i);
    return t;
}

double frobenius_sq(const Matrix& a) {
    double t = 0.0;
    for (double v : a.data) t += v * v;
    return t;
}

double frobenius(const Matrix& a) { return std::sqrt(frobenius_sq(a)); }

Matrix col_sums(const Matrix& a) {
    Matrix m(1, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        for (int j = 0; j < a.cols; ++j) m.data[j] += arow[j];
    }
    return m;
}

Matrix col_means(const Matrix& a) {
    if (a.rows == 0) throw std::invalid_argument("col_means: empty matrix");
    Matrix m = col_sums(a);
    for (int j = 0; j < a.cols; ++j) m.data[j] /= a.rows;
    return m;
}

Matrix sub_rowvec(const Matrix& a, const Matrix& m) {
    if (m.rows != 1 || m.cols != a.cols) throw std::invalid_argument("sub_rowvec: shape mismatch");
    Matrix c(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int j = 0; j < a.cols; ++j) crow[j] = arow[j] - m.data[j];
    }
    return c;
}

Matrix mul_rowvec(const Matrix& a, const Matrix& m) {
    if (m.rows != 1 || m.cols != a.cols) throw std::invalid_argument("mul_rowvec: shape mismatch");
    Matrix c(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int j = 0; j < a.cols; ++j) crow[j] = arow[j] * m.data[j];
    }
    return c;
}

Matrix gather_rows(const Matrix& a, const std::vector<int>& idx) {
    Matrix c(static_cast<int>(idx.size()), a.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= a.rows) throw std::invalid_argument("gather_rows: index out of range");
        std::copy(a.row(idx[i]), a.row(idx[i]) + a.cols, c.row(static_cast<int>(i)));
    }
    return c;
}

Matrix vconcat(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw std::invalid_argument("vconcat: column counts differ");
    Matrix c(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), c.data.begin());
    std::copy(b.data.begin(), b.data.end(), c.data.begin() + a.data.size());
    return c;
}

// ---------------------------------------------------------------------------
// One-sided Jacobi SVD.
//
// Works on a column-major copy W of the input (tall orientation); plane
// rotations orthogonalize column pairs until every pair is numerically
// orthogonal. Then A = U diag(s) V^T with s_j = ||w_j||, u_j = w_j / s_j and
// V the accumulated rotations.
// ---------------------------------------------------------------------------

namespace {

struct ColMat {
    int rows, cols;
    std::vector<double> d;  // column-major
    ColMat(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * c, 0.0) {}
    double* col(int j) { return d.data() + static_cast<std::size_t>(j) * rows; }
};

// Orthonormalize candidate basis vectors against the accepted columns of u
// to fill columns whose singular value is numerically zero. The unit vector
// with the largest residual is always numerically independent: with f filled
// columns its residual norm is at least sqrt((m - f) / m).
void complete_basis(Matrix& u, std::vector<bool>& filled) {
    int m = u.rows, r = u.cols;
    for (int j = 0; j < r; ++j) {
        if (filled[j]) continue;
        std::vector<double> best;
        double best_nrm = -1.0;
        for (int cand = 0; cand < m; ++cand) {
            std::vector<double> v(m, 0.0);
            v[cand] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (int k = 0; k < r; ++k) {
                    if (!filled[k]) continue;
                    double dot = 0.0;
                    for (int i = 0; i < m; ++i) dot += v[i] * u(i, k);
                    for (int i = 0; i < m; ++i) v[i] -= dot * u(i, k);
                }
            }
            double nrm = 0.0;
            for (double x : v) nrm += x * x;
            nrm = std::sqrt(nrm);
            if (nrm > best_nrm) {
                best_nrm = nrm;
                best = std::move(v);
            }
            if (best_nrm > 0.9) break;
        }
        if (best_nrm <= 1e-6) throw std::runtime_error("svd_full: basis completion failed");
        for (int i = 0; i < m; ++i) u(i, j) = best[i] / best_nrm;
        filled[j] = true;
    }
}

SvdResult svd_tall(const Matrix& a) {
    const int m = a.rows, n = a.cols;
    ColMat w(m, n), v(n, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) w.col(j)[i] = a(i, j);
    for (int j = 0; j < n; ++j) v.col(j)[j] = 1.0;

    const int sweep_cap = 10 * std::max(m, n);
    const double tol = 1e-15;
    // Rotations are orthogonal on the right, so the total Frobenius mass is
    // invariant; columns below its roundoff floor are numerically zero and
    // rotating them would chase noise forever.
    double fro2 = 0.0;
    for (double x : a.data) fro2 += x * x;
    const double dead2 = fro2 * 1e-30;
    bool converged = (n < 2);
    for (int sweep = 0; sweep < sweep_cap && !converged; ++sweep) {
        converged = true;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double* wp = w.col(p);
                double* wq = w.col(q);
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (int i = 0; i < m; ++i) {
                    alpha += wp[i] * wp[i];
                    beta += wq[i] * wq[i];
                    gamma += wp[i] * wq[i];
                }
                if (alpha <= dead2 || beta <= dead2) continue;
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                converged = false;
                double zeta = (beta - alpha) / (2.0 * gamma);
                double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (int i = 0; i < m; ++i) {
                    double xp = wp[i], xq = wq[i];
                    wp[i] = c * xp - s * xq;
                    wq[i] = s * xp + c * xq;
                }
                double* vp = v.col(p);
                double* vq = v.col(q);
                for (int i = 0; i < n; ++i) {
                    double xp = vp[i], xq = vq[i];
                    vp[i] = c * xp - s * xq;
                    vq[i] = s * xp + c * xq;
                }
            }
        }
    }
    if (!converged) throw std::runtime_error("svd_full: no convergence within sweep cap");

    std::vector<double> norms(n);
    double max_norm = 0.0;
    for (int j = 0; j < n; ++j) {
        double t = 0.0;
        const double* wj = w.col(j);
        for (int i = 0; i < m; ++i) t += wj[i] * wj[i];
        norms[j] = std::sqrt(t);
        max_norm = std::max(max_norm, norms[j]);
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return norms[x] > norms[y]; });

    SvdResult r;
    r.u = Matrix(m, n);
    r.vt = Matrix(n, n);
    r.s.resize(n);
    const double zero_cut = max_norm * 1e-13;
    std::vector<bool> filled(n, false);
    for (int j = 0; j < n; ++j) {
        int src = order[j];
        r.s[j] = norms[src];
        for (int i = 0; i < n; ++i) r.vt(j, i) = v.col(src)[i];
        if (norms[src] > zero_cut && norms[src] > 0.0) {
            const double* wj = w.col(src);
            for (int i = 0; i < m; ++i) r.u(i, j) = wj[i] / norms[src];
            filled[j] = true;
        }
    }
    complete_basis(r.u, filled);
    return r;
}

}  // namespace

SvdResult svd_full(const Matrix& a) {
    if (!all_finite(a)) throw std::invalid_argument("svd_full: non-finite entry");
    if (a.rows == 0 || a.cols == 0) throw std::invalid_argument("svd_full: empty matrix");
    if (a.rows >= a.cols) return svd_tall(a);
    // A = (A^T)^T: svd(A^T) = Ub S Vb^T gives A = Vb S Ub^T.
    SvdResult t = svd_tall(transpose(a));
    SvdResult r;
    r.s = std::move(t.s);
    r.u = transpose(t.vt);
    r.vt = transpose(t.u);
    return r;
}

EigResult eigh(const Matrix& sym) {
    if (sym.rows != sym.cols) throw std::invalid_argument("eigh: matrix not square");
    const int n = sym.rows;
    // Symmetrize; callers pass covariance products that are symmetric to roundoff.
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = 0.5 * (sym(i, j) + sym(j, i));
    Matrix v = Matrix::identity(n);

    const double tol = 1e-15 * std::max(frobenius(a), 1e-300);
    const int sweep_cap = 10 * std::max(n, 1);
    bool converged = (n < 2);
    for (int sweep = 0; sweep < sweep_cap && !converged; ++sweep) {
        converged = true;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (std::abs(apq) <= tol) continue;
                converged = false;
                double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                double app = a(p, p), aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (int i = 0; i < n; ++i) {
                    if (i != p && i != q) {
                        double aip = a(i, p), aiq = a(i, q);
                        a(i, p) = c * aip - s * aiq;
                        a(p, i) = a(i, p);
                        a(i, q) = s * aip + c * aiq;
                        a(q, i) = a(i, q);
                    }
                    double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    if (!converged) throw std::runtime_error("eigh: no convergence within sweep cap");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) > a(y, y); });
    EigResult r;
    r.values.resize(n);
    r.vectors = Matrix(n, n);
    for (int j = 0; j < n; ++j) {
        r.values[j] = a(order[j], order[j]);
        for (int i = 0; i < n; ++i) r.vectors(i, j) = v(i, order[j]);
    }
    return r;
}

Matrix inv_sqrt_psd(const Matrix& m, double eps) {
    if (eps < 0.0) throw std::invalid_argument("inv_sqrt_psd: negative eps");
    EigResult e = eigh(m);
    const int n = m.rows;
    std::vector<double> inv_root(n);
    for (int i = 0; i < n; ++i) {
        double lam = e.values[i];
        if (lam < -1e-8) throw std::domain_error("inv_sqrt_psd: matrix not PSD");
        lam = std::max(lam, 0.0) + eps;
        if (lam < 1e-300) throw std::domain_error("inv_sqrt_psd: singular matrix and eps too small");
        inv_root[i] = 1.0 / std::sqrt(lam);
    }
    // V diag(1/sqrt(lam)) V^T
    Matrix scaled(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scaled(i, j) = e.vectors(i, j) * inv_root[j];
    Matrix r = matmul_nt(scaled, e.vectors);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double v = 0.5 * (r(i, j) + r(j, i));
            r(i, j) = v;
            r(j, i) = v;
        }
    return r;
}

}  // namespace ncp
