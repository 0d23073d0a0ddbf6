#include "ncp/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ncp/mlp.hpp"

namespace ncp {

namespace {

// Permutation matrix sorting sigma descending: column j of the result picks
// the feature column holding the j-th largest sigma.
WhitenedModel sorted_passthrough(FittedModel fitted, FeatureMode mode) {
    std::vector<double> sigma = sigma_of(fitted.model);
    int d = static_cast<int>(sigma.size());
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return sigma[a] > sigma[b]; });
    WhitenedModel out;
    out.u_transform = Matrix(d, d);
    out.v_transform = Matrix(d, d);
    out.new_sigma.resize(d);
    for (int j = 0; j < d; ++j) {
        out.u_transform(order[j], j) = 1.0;
        out.v_transform(order[j], j) = 1.0;
        out.new_sigma[j] = sigma[order[j]];
    }
    out.mode = mode;
    out.base = std::move(fitted);
    return out;
}

}  // namespace

WhitenedModel as_raw(FittedModel fitted) {
    return sorted_passthrough(std::move(fitted), FeatureMode::Raw);
}

WhitenedModel center(FittedModel fitted) {
    return sorted_passthrough(std::move(fitted), FeatureMode::Centered);
}

WhitenResult whiten_features(const Matrix& psi_u, const Matrix& psi_v, double eps) {
    if (psi_u.rows != psi_v.rows) throw std::invalid_argument("feature row counts differ");
    if (psi_u.cols != psi_v.cols) throw std::invalid_argument("feature widths differ");
    int n = psi_u.rows, d = psi_u.cols;
    if (n < d) throw std::invalid_argument("whitening needs at least d rows");

    double inv_n = 1.0 / n;
    Matrix cx = scale(matmul_tn(psi_u, psi_u), inv_n);
    Matrix cy = scale(matmul_tn(psi_v, psi_v), inv_n);
    Matrix cxy = scale(matmul_tn(psi_u, psi_v), inv_n);

    Matrix wx = inv_sqrt_psd(cx, eps);
    Matrix wy = inv_sqrt_psd(cy, eps);
    SvdResult svd = svd_full(matmul(matmul(wx, cxy), wy));

    int r = static_cast<int>(svd.s.size());
    Matrix v = transpose(svd.vt);
    // Sign convention: the largest-magnitude entry of each left singular
    // vector is made positive; the matching right vector flips with it.
    for (int j = 0; j < r; ++j) {
        int arg = 0;
        double best = -1.0;
        for (int i = 0; i < d; ++i) {
            double m = std::abs(svd.u(i, j));
            if (m > best) {
                best = m;
                arg = i;
            }
        }
        if (svd.u(arg, j) < 0.0) {
            for (int i = 0; i < d; ++i) {
                svd.u(i, j) = -svd.u(i, j);
                v(i, j) = -v(i, j);
            }
        }
    }

    WhitenResult out;
    out.u_transform = matmul(wx, svd.u);
    out.v_transform = matmul(wy, v);
    out.new_sigma.resize(r);
    for (int j = 0; j < r; ++j) out.new_sigma[j] = std::min(std::max(svd.s[j], 0.0), 1.0);
    return out;
}

WhitenedModel whiten(FittedModel fitted, const SampleSet& data, double eps) {
    int d = fitted.model.d;
    if (data.x.rows != data.y.rows) throw std::invalid_argument("paired data row counts differ");
    if (data.x.rows < d) throw std::invalid_argument("whitening needs at least d rows");

    Matrix u_feat = forward_u(fitted.model, fitted.stats.apply_x(data.x));
    Matrix v_feat = forward_v(fitted.model, fitted.stats.apply_y(data.y));
    std::vector<double> sigma = sigma_of(fitted.model);
    Matrix root_sigma(1, d);
    for (int j = 0; j < d; ++j) root_sigma(0, j) = std::sqrt(sigma[j]);

    Matrix psi_u = mul_rowvec(sub_rowvec(u_feat, fitted.u_mean), root_sigma);
    Matrix psi_v = mul_rowvec(sub_rowvec(v_feat, fitted.v_mean), root_sigma);

    WhitenResult res = whiten_features(psi_u, psi_v, eps);
    WhitenedModel out;
    out.base = std::move(fitted);
    out.u_transform = std::move(res.u_transform);
    out.v_transform = std::move(res.v_transform);
    out.new_sigma = std::move(res.new_sigma);
    out.mode = FeatureMode::Whitened;
    return out;
}

}  // namespace ncp
