#include "ncp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ncp {

namespace {

void validate_pmf(const Matrix& pmf) {
    if (pmf.rows < 1 || pmf.cols < 1) throw std::invalid_argument("joint pmf must be nonempty");
    double total = 0.0;
    for (double p : pmf.data) {
        if (!(p >= 0.0)) throw std::invalid_argument("joint pmf entries must be nonnegative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("joint pmf must sum to 1");
}

std::vector<double> row_marginal(const Matrix& pmf) {
    std::vector<double> mu(pmf.rows, 0.0);
    for (int i = 0; i < pmf.rows; ++i)
        for (int j = 0; j < pmf.cols; ++j) mu[i] += pmf(i, j);
    return mu;
}

std::vector<double> col_marginal(const Matrix& pmf) {
    std::vector<double> nu(pmf.cols, 0.0);
    for (int i = 0; i < pmf.rows; ++i)
        for (int j = 0; j < pmf.cols; ++j) nu[j] += pmf(i, j);
    return nu;
}

void check_states(const std::vector<int>& idx, int limit, const char* name) {
    if (idx.empty()) throw std::invalid_argument(std::string(name) + " state set is empty");
    for (int s : idx)
        if (s < 0 || s >= limit) throw std::invalid_argument(std::string(name) + " state out of range");
}

}  // namespace

DiscreteJoint make_joint(Matrix pmf) {
    int ny = pmf.cols;
    Matrix labels(ny, 1);
    for (int j = 0; j < ny; ++j) labels(j, 0) = static_cast<double>(j);
    return make_joint(std::move(pmf), std::move(labels));
}

DiscreteJoint make_joint(Matrix pmf, Matrix y_labels) {
    validate_pmf(pmf);
    if (y_labels.rows != pmf.cols) throw std::invalid_argument("y_labels rows must match y states");
    DiscreteJoint joint;
    joint.mu = row_marginal(pmf);
    joint.nu = col_marginal(pmf);
    for (double m : joint.mu)
        if (!(m > 0.0)) throw std::invalid_argument("zero x-marginal mass");
    for (double m : joint.nu)
        if (!(m > 0.0)) throw std::invalid_argument("zero y-marginal mass");
    joint.pmf = std::move(pmf);
    joint.y_labels = std::move(y_labels);
    return joint;
}

DiscreteJoint load_joint_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open joint csv: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged joint csv: " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("empty joint csv: " + path);
    Matrix pmf(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < pmf.rows; ++i)
        for (int j = 0; j < pmf.cols; ++j) pmf(i, j) = rows[i][j];
    return make_joint(std::move(pmf));
}

DiscreteJoint random_joint(int nx, int ny, Rng& rng) {
    Matrix pmf(nx, ny);
    double total = 0.0;
    for (double& p : pmf.data) {
        p = rng.uniform(0.01, 1.0);
        total += p;
    }
    for (double& p : pmf.data) p /= total;
    // Normalization drift from the division is re-absorbed into one cell.
    double sum = std::accumulate(pmf.data.begin(), pmf.data.end(), 0.0);
    pmf.data[0] += 1.0 - sum;
    return make_joint(std::move(pmf));
}

OperatorTruth build_truth(const DiscreteJoint& joint) {
    int nx = joint.nx(), ny = joint.ny();
    Matrix k(nx, ny);
    for (int i = 0; i < nx; ++i) {
        double rmu = std::sqrt(joint.mu[i]);
        for (int j = 0; j < ny; ++j) {
            double rnu = std::sqrt(joint.nu[j]);
            k(i, j) = joint.pmf(i, j) / (rmu * rnu) - rmu * rnu;
        }
    }
    SvdResult svd = svd_full(k);
    OperatorTruth truth;
    truth.sigma = svd.s;
    truth.u = Matrix(nx, static_cast<int>(svd.s.size()));
    truth.v = Matrix(ny, static_cast<int>(svd.s.size()));
    for (int i = 0; i < nx; ++i) {
        double rmu = std::sqrt(joint.mu[i]);
        for (int c = 0; c < truth.u.cols; ++c) truth.u(i, c) = svd.u(i, c) / rmu;
    }
    for (int j = 0; j < ny; ++j) {
        double rnu = std::sqrt(joint.nu[j]);
        for (int c = 0; c < truth.v.cols; ++c) truth.v(j, c) = svd.vt(c, j) / rnu;
    }
    return truth;
}

double chi2_optimum(const OperatorTruth& truth, int d) {
    if (d < 1) throw std::invalid_argument("chi2_optimum requires d >= 1");
    double acc = 0.0;
    int avail = static_cast<int>(truth.sigma.size());
    for (int i = 0; i < std::min(d, avail); ++i) acc += truth.sigma[i] * truth.sigma[i];
    return -acc;
}

CondStats exact_cond_stats(const DiscreteJoint& joint, const std::vector<int>& a,
                           const std::vector<int>& b) {
    check_states(a, joint.nx(), "A");
    check_states(b, joint.ny(), "B");
    double pa = 0.0;
    for (int x : a) pa += joint.mu[x];
    if (!(pa > 0.0)) throw std::invalid_argument("conditioning set A has zero mass");

    CondStats out;
    for (int y : b) out.p_b += joint.nu[y];
    double pab = 0.0;
    for (int x : a)
        for (int y : b) pab += joint.pmf(x, y);
    out.p_b_given_a = pab / pa;

    int q = joint.y_labels.cols;
    out.e_y_given_a = Matrix(1, q);
    Matrix second(q, q);
    for (int y = 0; y < joint.ny(); ++y) {
        double w = 0.0;
        for (int x : a) w += joint.pmf(x, y);
        w /= pa;
        if (w == 0.0) continue;
        for (int r = 0; r < q; ++r) {
            out.e_y_given_a(0, r) += w * joint.y_labels(y, r);
            for (int c = 0; c < q; ++c)
                second(r, c) += w * joint.y_labels(y, r) * joint.y_labels(y, c);
        }
    }
    out.cov_y_given_a = Matrix(q, q);
    for (int r = 0; r < q; ++r)
        for (int c = 0; c < q; ++c)
            out.cov_y_given_a(r, c) = second(r, c) - out.e_y_given_a(0, r) * out.e_y_given_a(0, c);
    return out;
}

double truncated_model_prob(const OperatorTruth& truth, int d, const DiscreteJoint& joint,
                            const std::vector<int>& a, const std::vector<int>& b) {
    if (d < 0) throw std::invalid_argument("rank d must be nonnegative");
    check_states(a, joint.nx(), "A");
    check_states(b, joint.ny(), "B");
    double pa = 0.0;
    for (int x : a) pa += joint.mu[x];
    if (!(pa > 0.0)) throw std::invalid_argument("conditioning set A has zero mass");
    double pb = 0.0;
    for (int y : b) pb += joint.nu[y];

    double acc = pb;
    int avail = static_cast<int>(truth.sigma.size());
    for (int i = 0; i < std::min(d, avail); ++i) {
        double eu = 0.0;
        for (int x : a) eu += joint.mu[x] * truth.u(x, i);
        double ev = 0.0;
        for (int y : b) ev += joint.nu[y] * truth.v(y, i);
        acc += truth.sigma[i] * (eu / pa) * ev;
    }
    return acc;
}

TruncationBoundResult truncation_bound_check(const OperatorTruth& truth, int d,
                                             const DiscreteJoint& joint,
                                             const std::vector<int>& a, const std::vector<int>& b) {
    double exact = exact_cond_stats(joint, a, b).p_b_given_a;
    double truncated = truncated_model_prob(truth, d, joint, a, b);
    double pa = 0.0;
    for (int x : a) pa += joint.mu[x];
    double pb = 0.0;
    for (int y : b) pb += joint.nu[y];
    double tail = d < static_cast<int>(truth.sigma.size()) ? truth.sigma[d] : 0.0;
    double bound = tail * std::sqrt(pb / pa);
    TruncationBoundResult res;
    res.slack = bound - std::abs(exact - truncated);
    res.ok = res.slack >= -1e-10;
    return res;
}

std::vector<double> finite_diff_gradient(const std::function<double(const std::vector<double>&)>& fn,
                                         const std::vector<double>& point, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite difference step must be positive");
    std::vector<double> grad(point.size());
    std::vector<double> p = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        p[i] = point[i] + step;
        double hi = fn(p);
        p[i] = point[i] - step;
        double lo = fn(p);
        p[i] = point[i];
        grad[i] = (hi - lo) / (2.0 * step);
    }
    return grad;
}

OnehotSample sample_onehot(const DiscreteJoint& joint, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample count must be positive");
    std::vector<double> cdf(joint.pmf.data.size());
    double acc = 0.0;
    for (std::size_t c = 0; c < cdf.size(); ++c) {
        acc += joint.pmf.data[c];
        cdf[c] = acc;
    }
    cdf.back() = 1.0;

    Rng rng(seed);
    OnehotSample out;
    out.x = Matrix(n, joint.nx());
    out.y = Matrix(n, joint.ny());
    out.xi.resize(n);
    out.yi.resize(n);
    for (int r = 0; r < n; ++r) {
        double u = rng.uniform();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        int cell = static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(),
                                                             static_cast<std::ptrdiff_t>(cdf.size()) - 1));
        int xi = cell / joint.ny();
        int yi = cell % joint.ny();
        out.x(r, xi) = 1.0;
        out.y(r, yi) = 1.0;
        out.xi[r] = xi;
        out.yi[r] = yi;
    }
    return out;
}

OnehotSample exact_onehot(const DiscreteJoint& joint, int total) {
    if (total < 1) throw std::invalid_argument("total count must be positive");
    std::vector<int> counts(joint.pmf.data.size());
    int used = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        double want = joint.pmf.data[c] * total;
        int k = static_cast<int>(std::llround(want));
        if (std::abs(want - k) > 1e-9)
            throw std::invalid_argument("pmf mass times total is not an integer");
        counts[c] = k;
        used += k;
    }
    if (used != total) throw std::invalid_argument("cell counts do not add up to total");

    OnehotSample out;
    out.x = Matrix(total, joint.nx());
    out.y = Matrix(total, joint.ny());
    out.xi.resize(total);
    out.yi.resize(total);
    int r = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        int xi = static_cast<int>(c) / joint.ny();
        int yi = static_cast<int>(c) % joint.ny();
        for (int k = 0; k < counts[c]; ++k, ++r) {
            out.x(r, xi) = 1.0;
            out.y(r, yi) = 1.0;
            out.xi[r] = xi;
            out.yi[r] = yi;
        }
    }
    return out;
}

}  // namespace ncp
