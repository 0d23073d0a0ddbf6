#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ncp/matrix.hpp"
#include "ncp/rng.hpp"

namespace ncp {

// Finite discrete joint law over |X| x |Y| states. Marginals are derived at
// construction and every marginal mass must be strictly positive.
struct DiscreteJoint {
    Matrix pmf;              // nx x ny, nonnegative, sums to 1 within 1e-12
    std::vector<double> mu;  // row marginal, size nx
    std::vector<double> nu;  // column marginal, size ny
    Matrix y_labels;         // ny x q numeric labels for moment queries

    int nx() const { return pmf.rows; }
    int ny() const { return pmf.cols; }
};

// Default y labels are the state indices 0..ny-1 as a single column.
DiscreteJoint make_joint(Matrix pmf);
DiscreteJoint make_joint(Matrix pmf, Matrix y_labels);

// CSV layout: one row per x-state, one comma-separated mass per y-state.
DiscreteJoint load_joint_csv(const std::string& path);

// Joint with entries drawn uniformly from [0.01, 1] then normalized, so all
// marginal masses stay bounded away from zero.
DiscreteJoint random_joint(int nx, int ny, Rng& rng);

// Exact SVD of the deflated conditional expectation operator in the weighted
// geometry: columns of u and v are the singular functions over the X and Y
// states, orthonormal under the mu and nu inner products.
struct OperatorTruth {
    std::vector<double> sigma;  // nonincreasing, each in [0, 1]
    Matrix u;                   // nx x r
    Matrix v;                   // ny x r
};

OperatorTruth build_truth(const DiscreteJoint& joint);

// -sum of the d largest squared singular values; d beyond the spectrum length
// sums what is available.
double chi2_optimum(const OperatorTruth& truth, int d);

struct CondStats {
    double p_b_given_a = 0.0;
    double p_b = 0.0;
    Matrix e_y_given_a;    // 1 x q
    Matrix cov_y_given_a;  // q x q
};

// Brute-force conditional statistics over the table for index sets A over X
// states and B over Y states. Requires P[A] > 0.
CondStats exact_cond_stats(const DiscreteJoint& joint, const std::vector<int>& a,
                           const std::vector<int>& b);

// Rank-d conditional probability approximation:
//   P[B] + sum_{i<=d} sigma_i * E[u_i 1_A]/P[A] * E[v_i 1_B].
double truncated_model_prob(const OperatorTruth& truth, int d, const DiscreteJoint& joint,
                            const std::vector<int>& a, const std::vector<int>& b);

struct TruncationBoundResult {
    bool ok = false;
    double slack = 0.0;  // bound minus |exact - truncated|; ok iff slack >= -1e-10
};

// Checks |exact - truncated| <= sigma_{d+1} * sqrt(P[B]/P[A]) on one event pair.
TruncationBoundResult truncation_bound_check(const OperatorTruth& truth, int d,
                                             const DiscreteJoint& joint,
                                             const std::vector<int>& a, const std::vector<int>& b);

std::vector<double> finite_diff_gradient(const std::function<double(const std::vector<double>&)>& fn,
                                         const std::vector<double>& point, double step);

// Paired one-hot draws from the joint: row k of x is the indicator of the
// sampled x-state, likewise for y. State indices are kept alongside.
struct OnehotSample {
    Matrix x;  // n x nx
    Matrix y;  // n x ny
    std::vector<int> xi;
    std::vector<int> yi;
};

OnehotSample sample_onehot(const DiscreteJoint& joint, int n, std::uint64_t seed);

// Deterministic dataset whose empirical distribution equals the joint exactly.
// Requires every pmf entry times total to be an integer within 1e-9. Rows are
// grouped by cell in row-major order.
OnehotSample exact_onehot(const DiscreteJoint& joint, int total);

}  // namespace ncp
