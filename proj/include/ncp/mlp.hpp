#pragma once

#include <cstdint>
#include <vector>

#include "ncp/autodiff.hpp"
#include "ncp/matrix.hpp"

namespace ncp {

struct MlpSpec {
    enum class Activation { Gelu };
    int input_dim = 1;
    std::vector<int> hidden;  // nonempty
    int output_dim = 1;
    Activation activation = Activation::Gelu;
};

struct DenseLayer {
    Matrix w;  // fan_in x fan_out
    Matrix b;  // 1 x fan_out
};

struct MlpParams {
    std::vector<DenseLayer> layers;
};

// Per-coordinate centering/scaling fitted on the training split only.
struct StandardizationStats {
    Matrix x_mean, x_scale;  // 1 x d_x, scale strictly positive
    Matrix y_mean, y_scale;  // 1 x d_y

    Matrix apply_x(const Matrix& x) const;
    Matrix apply_y(const Matrix& y) const;
};

StandardizationStats compute_standardization(const Matrix& x, const Matrix& y);

// The learned triple (u^theta, v^theta, w^theta); sigma^theta = exp(-w^2).
struct EmbeddingModel {
    MlpSpec spec_u, spec_v;
    MlpParams u_params, v_params;
    Matrix w;  // 1 x d singular-value logits
    int d = 0;
};

// Deterministic init: layer weights ~ N(0, 2/fan_in) (variance), biases 0,
// w ~ N(0, (1/d)^2). Both specs must output d.
EmbeddingModel init_embedding(const MlpSpec& spec_u, const MlpSpec& spec_v, int d, std::uint64_t seed);

// exp(-w_i^2), each in (0, 1].
std::vector<double> sigma_of(const EmbeddingModel& m);

// Plain forward pass (no gradients); exact GELU between layers, linear output.
Matrix forward_mlp(const MlpParams& p, const MlpSpec& spec, const Matrix& x);
Matrix forward_u(const EmbeddingModel& m, const Matrix& x_std);
Matrix forward_v(const EmbeddingModel& m, const Matrix& y_std);

// Tape-based forward for training.
struct MlpNodeIds {
    std::vector<std::pair<int, int>> layers;  // (w, b) leaf ids
};
MlpNodeIds put_mlp_on_tape(Tape& t, const MlpParams& p);
int forward_mlp_on_tape(Tape& t, const MlpNodeIds& ids, const MlpSpec& spec, int x_const);

// All trainable parameters as one vector (u layers w,b; v layers w,b; w), in
// the optimizer's update order.
std::vector<double> flatten_params(const EmbeddingModel& m);
void set_params(EmbeddingModel& m, const std::vector<double>& flat);

}  // namespace ncp
