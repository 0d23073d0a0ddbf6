#pragma once

#include <vector>

#include "ncp/autodiff.hpp"
#include "ncp/matrix.hpp"
#include "ncp/mlp.hpp"

namespace ncp {

struct LossConfig {
    enum class Estimator { CovarianceForm, PairwiseBatchMean, PairwiseUstat };
    double gamma = 1e-3;
    Estimator estimator = Estimator::CovarianceForm;
};

// ---------------------------------------------------------------------------
// Plain evaluations (no gradients). Moment matrices use 1/n normalization;
// this is what makes the pairwise <-> covariance identities exact.
// ---------------------------------------------------------------------------

// tr(Var(sqrt(s) . u) Var(sqrt(s) . v)) - 2 tr(Cov(sqrt(s) . u, sqrt(s) . v)),
// with U, V centered by their own column means. n >= 2 required.
double loss_cov_form(const Matrix& u, const Matrix& v, const std::vector<double>& sigma);

// ||E[uu^T] - I||_F^2 + ||E[vv^T] - I||_F^2 + 2||E u||^2 + 2||E v||^2 with
// uncentered 1/n moments.
double reg_cov_form(const Matrix& u, const Matrix& v);

// L(u,u',v,v',s) on single (pre-centered) feature vectors.
double loss_pairwise(const std::vector<double>& u, const std::vector<double>& u2,
                     const std::vector<double>& v, const std::vector<double>& v2,
                     const std::vector<double>& s);

// R(u,u',v,v') on raw feature vectors (means are penalized, so no centering).
double reg_pairwise(const std::vector<double>& u, const std::vector<double>& u2,
                    const std::vector<double>& v, const std::vector<double>& v2);

// ---------------------------------------------------------------------------
// Tape builders.
// ---------------------------------------------------------------------------

int loss_cov_form_node(Tape& t, int u, int v, int sigma);
int reg_cov_form_node(Tape& t, int u, int v);

struct TotalLossNodes {
    int total;  // lhat + gamma * rhat
    int lhat;
    int rhat;
};

// u_pool/v_pool hold the two half-batches stacked (2*half rows). The L part
// centers features by the pooled mean; the R part uses them raw. The pairwise
// estimators split the pool back into the two halves.
TotalLossNodes total_loss_node(Tape& t, int u_pool, int v_pool, int sigma, int half,
                               const LossConfig& cfg);

// Full builder for one optimization step: parameters on tape, pooled forward,
// estimator per config. Batches must have equal row counts.
struct LossBuild {
    TotalLossNodes nodes;
    MlpNodeIds u_ids, v_ids;
    int w_id;
    int sigma_id;
};
LossBuild total_loss(Tape& t, const EmbeddingModel& model, const Matrix& x1, const Matrix& x2,
                     const Matrix& y1, const Matrix& y2, const LossConfig& cfg);

}  // namespace ncp
