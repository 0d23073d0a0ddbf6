#include "ncp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ncp/mlp.hpp"

namespace ncp {

namespace {

// Mode pipeline on raw feature rows: center (all but raw mode), scale by
// sqrt(sigma_theta) (whitened mode), rotate, then fold sqrt(new_sigma) so the
// bilinear weight between the two sides is new_sigma itself.
Matrix fold_features(const Matrix& raw, const Matrix& mean, const Matrix& transform,
                     const std::vector<double>& sigma_theta, const std::vector<double>& new_sigma,
                     FeatureMode mode) {
    Matrix work = raw;
    if (mode != FeatureMode::Raw) work = sub_rowvec(work, mean);
    if (mode == FeatureMode::Whitened) {
        Matrix root(1, work.cols);
        for (int j = 0; j < work.cols; ++j) root(0, j) = std::sqrt(sigma_theta[j]);
        work = mul_rowvec(work, root);
    }
    work = matmul(work, transform);
    Matrix fold(1, work.cols);
    for (int j = 0; j < work.cols; ++j)
        fold(0, j) = std::sqrt(std::min(std::max(new_sigma[j], 0.0), 1.0));
    return mul_rowvec(work, fold);
}

void check_unit_interval(double q, const char* what) {
    if (!(q > 0.0) || !(q < 1.0)) throw std::invalid_argument(std::string(what) + " must be in (0,1)");
}

}  // namespace

ConditioningEvent ConditioningEvent::at(std::vector<double> point) {
    ConditioningEvent ev;
    ev.kind = Kind::Point;
    ev.x = std::move(point);
    return ev;
}

ConditioningEvent ConditioningEvent::box(std::vector<double> lo, std::vector<double> hi) {
    if (lo.size() != hi.size()) throw std::invalid_argument("box bounds differ in length");
    ConditioningEvent ev;
    ev.kind = Kind::Box;
    ev.lo = std::move(lo);
    ev.hi = std::move(hi);
    return ev;
}

ConditioningEvent ConditioningEvent::indicator(std::vector<double> mask) {
    ConditioningEvent ev;
    ev.kind = Kind::Indicator;
    ev.mask = std::move(mask);
    return ev;
}

CdfGrid sanitize_cdf(CdfGrid grid) {
    auto& v = grid.values;
    for (double& f : v) f = std::min(std::max(f, 0.0), 1.0);

    // Pool-adjacent-violators: L2 projection onto nondecreasing sequences.
    std::size_t n = v.size();
    std::vector<double> block_sum(n), block_val(n);
    std::vector<int> block_len(n);
    int top = 0;
    for (std::size_t i = 0; i < n; ++i) {
        block_sum[top] = v[i];
        block_len[top] = 1;
        block_val[top] = v[i];
        ++top;
        while (top >= 2 && block_val[top - 1] < block_val[top - 2]) {
            block_sum[top - 2] += block_sum[top - 1];
            block_len[top - 2] += block_len[top - 1];
            block_val[top - 2] = block_sum[top - 2] / block_len[top - 2];
            --top;
        }
    }
    std::size_t out = 0;
    for (int b = 0; b < top; ++b)
        for (int k = 0; k < block_len[b]; ++k) v[out++] = block_val[b];

    double last = v.empty() ? 0.0 : v.back();
    if (last < 1e-300) {
        // Degenerate grid with no mass: a point mass at the last grid value.
        if (!v.empty()) {
            std::fill(v.begin(), v.end(), 0.0);
            v.back() = 1.0;
        }
    } else {
        for (double& f : v) f = std::min(f / last, 1.0);
    }
    return grid;
}

ConfidenceInterval interval_search(const CdfGrid& grid, double alpha) {
    check_unit_interval(alpha, "alpha");
    std::size_t k = grid.points.size();
    if (k == 0 || grid.values.size() != k) throw std::invalid_argument("empty or ragged cdf grid");
    double need = 1.0 - alpha;

    const auto& t = grid.points;
    const auto& f = grid.values;
    bool found = false;
    std::size_t best_lo = 0, best_hi = 0;
    double best_width = 0.0;
    std::size_t lo = 0;
    for (std::size_t hi = 0; hi < k; ++hi) {
        if (f[hi] - f[0] < need) continue;
        while (lo < hi && f[hi] - f[lo + 1] >= need) ++lo;
        double width = t[hi] - t[lo];
        if (!found || width < best_width) {
            found = true;
            best_width = width;
            best_lo = lo;
            best_hi = hi;
        }
    }
    if (!found) throw std::runtime_error("no grid window reaches the requested mass");
    ConfidenceInterval ci;
    ci.lower = t[best_lo];
    ci.upper = t[best_hi];
    ci.nominal_coverage = need;
    ci.achieved_mass = f[best_hi] - f[best_lo];
    return ci;
}

std::string cdf_to_csv(const CdfGrid& grid) {
    std::ostringstream out;
    out.precision(17);
    out << "t,F\n";
    for (std::size_t i = 0; i < grid.points.size(); ++i)
        out << grid.points[i] << "," << grid.values[i] << "\n";
    return out.str();
}

std::string interval_to_json(const ConfidenceInterval& ci) {
    std::ostringstream out;
    out.precision(17);
    out << "{\"lower\": " << ci.lower << ", \"upper\": " << ci.upper
        << ", \"nominal\": " << ci.nominal_coverage << ", \"achieved\": " << ci.achieved_mass
        << "}";
    return out.str();
}

InferenceEngine::InferenceEngine(const WhitenedModel& model) : model_(&model) {
    const FittedModel& base = model.base;
    std::vector<double> sigma_theta = sigma_of(base.model);
    psi_u_ = fold_features(base.train_x_features, base.u_mean, model.u_transform, sigma_theta,
                           model.new_sigma, model.mode);
    psi_v_ = fold_features(base.train_y_features, base.v_mean, model.v_transform, sigma_theta,
                           model.new_sigma, model.mode);
    int n = psi_v_.rows, d = psi_v_.cols;

    if (base.train_y_values.cols == 1) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return base.train_y_values(a, 0) < base.train_y_values(b, 0);
        });
        y_sorted_.resize(n);
        v_prefix_ = Matrix(n + 1, d);
        for (int m = 0; m < n; ++m) {
            y_sorted_[m] = base.train_y_values(order[m], 0);
            for (int j = 0; j < d; ++j)
                v_prefix_(m + 1, j) = v_prefix_(m, j) + psi_v_(order[m], j);
        }
    }
}

std::vector<double> InferenceEngine::transform_u_rowvec(const Matrix& raw_row) const {
    std::vector<double> sigma_theta = sigma_of(model_->base.model);
    Matrix folded = fold_features(raw_row, model_->base.u_mean, model_->u_transform, sigma_theta,
                                  model_->new_sigma, model_->mode);
    return folded.data;
}

std::vector<double> InferenceEngine::event_weights(const ConditioningEvent& ev) const {
    const FittedModel& base = model_->base;
    int n = psi_u_.rows, d = psi_u_.cols;
    switch (ev.kind) {
        case ConditioningEvent::Kind::Point: {
            if (static_cast<int>(ev.x.size()) != base.train_x_values.cols)
                throw std::invalid_argument("conditioning point has wrong width");
            Matrix row(1, static_cast<int>(ev.x.size()), ev.x);
            Matrix raw = forward_u(base.model, base.stats.apply_x(row));
            return transform_u_rowvec(raw);
        }
        case ConditioningEvent::Kind::Box: {
            if (static_cast<int>(ev.lo.size()) != base.train_x_values.cols)
                throw std::invalid_argument("box has wrong width");
            std::vector<double> acc(d, 0.0);
            int hits = 0;
            for (int r = 0; r < n; ++r) {
                bool in = true;
                for (int c = 0; c < base.train_x_values.cols && in; ++c) {
                    double x = base.train_x_values(r, c);
                    in = x >= ev.lo[c] && x <= ev.hi[c];
                }
                if (!in) continue;
                ++hits;
                for (int j = 0; j < d; ++j) acc[j] += psi_u_(r, j);
            }
            if (hits == 0) throw std::domain_error("conditioning box has empty empirical mass");
            for (double& a : acc) a /= hits;
            return acc;
        }
        case ConditioningEvent::Kind::Indicator: {
            if (static_cast<int>(ev.mask.size()) != n)
                throw std::invalid_argument("indicator mask length must match retained rows");
            std::vector<double> acc(d, 0.0);
            int hits = 0;
            for (int r = 0; r < n; ++r) {
                double m = ev.mask[r];
                if (m == 0.0) continue;
                if (m != 1.0) throw std::invalid_argument("indicator mask must be 0/1");
                ++hits;
                for (int j = 0; j < d; ++j) acc[j] += psi_u_(r, j);
            }
            if (hits == 0) throw std::domain_error("conditioning set has empty empirical mass");
            for (double& a : acc) a /= hits;
            return acc;
        }
    }
    throw std::logic_error("unknown event kind");
}

double InferenceEngine::cond_expectation(const std::vector<double>& f_values,
                                         const ConditioningEvent& ev) const {
    int n = psi_v_.rows, d = psi_v_.cols;
    if (static_cast<int>(f_values.size()) != n)
        throw std::invalid_argument("f values must cover the retained rows");
    std::vector<double> w = event_weights(ev);
    double marginal = 0.0;
    std::vector<double> vf(d, 0.0);
    for (int r = 0; r < n; ++r) {
        marginal += f_values[r];
        for (int j = 0; j < d; ++j) vf[j] += psi_v_(r, j) * f_values[r];
    }
    double acc = marginal / n;
    for (int j = 0; j < d; ++j) acc += w[j] * vf[j] / n;
    return acc;
}

double InferenceEngine::cond_probability(const std::vector<double>& indicator,
                                         const ConditioningEvent& ev, bool sanitized) const {
    for (double v : indicator)
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("set indicator must be 0/1");
    double p = cond_expectation(indicator, ev);
    return sanitized ? std::min(std::max(p, 0.0), 1.0) : p;
}

CdfGrid InferenceEngine::cond_cdf(const ConditioningEvent& ev,
                                  const std::vector<double>& grid_points, bool sanitize) const {
    if (y_dim() != 1) throw std::invalid_argument("conditional cdf needs scalar y");
    if (grid_points.empty()) throw std::invalid_argument("empty cdf grid");
    for (std::size_t i = 1; i < grid_points.size(); ++i)
        if (!(grid_points[i] > grid_points[i - 1]))
            throw std::invalid_argument("cdf grid must be strictly increasing");

    std::vector<double> w = event_weights(ev);
    int n = psi_v_.rows, d = psi_v_.cols;
    CdfGrid grid;
    grid.points = grid_points;
    grid.values.resize(grid_points.size());
    int m = 0;
    for (std::size_t k = 0; k < grid_points.size(); ++k) {
        while (m < n && y_sorted_[m] <= grid_points[k]) ++m;
        double acc = static_cast<double>(m) / n;
        for (int j = 0; j < d; ++j) acc += w[j] * v_prefix_(m, j) / n;
        grid.values[k] = acc;
    }
    return sanitize ? sanitize_cdf(std::move(grid)) : grid;
}

double InferenceEngine::cond_quantile(const ConditioningEvent& ev, double q,
                                      const std::vector<double>& grid_points) const {
    check_unit_interval(q, "quantile level");
    CdfGrid grid = cond_cdf(ev, grid_points, true);
    for (std::size_t k = 0; k < grid.points.size(); ++k)
        if (grid.values[k] >= q) return grid.points[k];
    return grid.points.back();
}

double InferenceEngine::cond_moment(const ConditioningEvent& ev, double order) const {
    if (!(order >= 1.0)) throw std::invalid_argument("moment order must be >= 1");
    if (y_dim() != 1) throw std::invalid_argument("moments need scalar y");
    const Matrix& y = model_->base.train_y_values;
    std::vector<double> f(y.rows);
    for (int r = 0; r < y.rows; ++r) f[r] = std::pow(y(r, 0), order);
    return cond_expectation(f, ev);
}

double InferenceEngine::cond_mean(const ConditioningEvent& ev) const { return cond_moment(ev, 1.0); }

Matrix InferenceEngine::cond_covariance(const ConditioningEvent& ev, bool psd_project) const {
    const Matrix& y = model_->base.train_y_values;
    int q = y.cols, n = y.rows;
    std::vector<double> mean(q);
    std::vector<double> f(n);
    for (int c = 0; c < q; ++c) {
        for (int r = 0; r < n; ++r) f[r] = y(r, c);
        mean[c] = cond_expectation(f, ev);
    }
    Matrix cov(q, q);
    for (int a = 0; a < q; ++a)
        for (int b = a; b < q; ++b) {
            for (int r = 0; r < n; ++r) f[r] = y(r, a) * y(r, b);
            double second = cond_expectation(f, ev);
            cov(a, b) = cov(b, a) = second - mean[a] * mean[b];
        }
    if (psd_project) {
        EigResult eig = eigh(cov);
        Matrix scaled = eig.vectors;
        for (int c = 0; c < q; ++c) {
            double lam = std::max(eig.values[c], 0.0);
            for (int r = 0; r < q; ++r) scaled(r, c) *= lam;
        }
        cov = matmul_nt(scaled, eig.vectors);
        for (int a = 0; a < q; ++a)
            for (int b = a + 1; b < q; ++b) cov(a, b) = cov(b, a) = 0.5 * (cov(a, b) + cov(b, a));
    }
    return cov;
}

std::vector<double> InferenceEngine::default_grid(int k) const {
    if (y_dim() != 1) throw std::invalid_argument("default grid needs scalar y");
    if (k < 2) throw std::invalid_argument("grid needs at least two points");
    std::vector<double> y = y_sorted_;
    int n = static_cast<int>(y.size());
    double med = 0.5 * (y[(n - 1) / 2] + y[n / 2]);
    std::vector<double> dev(n);
    for (int i = 0; i < n; ++i) dev[i] = std::abs(y[i] - med);
    std::sort(dev.begin(), dev.end());
    double mad = 0.5 * (dev[(n - 1) / 2] + dev[n / 2]);
    double lo = y.front() - 3.0 * mad;
    double hi = y.back() + 3.0 * mad;
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    std::vector<double> grid(k);
    for (int i = 0; i < k; ++i) grid[i] = lo + (hi - lo) * i / (k - 1);
    return grid;
}

}  // namespace ncp
