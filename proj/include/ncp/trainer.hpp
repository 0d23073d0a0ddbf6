#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ncp/loss.hpp"
#include "ncp/matrix.hpp"
#include "ncp/mlp.hpp"

namespace ncp {

struct SampleSet;  // datasets.hpp

struct TrainConfig {
    int epochs = 200;
    int batch_size = 512;  // even, >= 4
    double learning_rate = 1e-3;
    double gamma = 1e-3;
    int patience = 50;  // epochs since best validation loss
    std::uint64_t seed = 0;
    LossConfig::Estimator estimator = LossConfig::Estimator::CovarianceForm;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int retain_cap = 100000;  // max training rows cached for inference
};

struct EpochRecord {
    int epoch;
    double train_loss;  // mean per-step L-hat
    double train_reg;   // mean per-step R-hat
    double val_loss;    // covariance-form L-hat + gamma * R-hat on the validation set
};

// Raised when the loss turns non-finite; carries the epoch index.
struct TrainingDivergedError : std::runtime_error {
    int epoch;
    explicit TrainingDivergedError(int ep);
};

// Frozen training result plus the caches inference needs: retained feature
// rows and raw values on both sides, and the feature means over the retained
// rows.
struct FittedModel {
    EmbeddingModel model;
    StandardizationStats stats;
    Matrix train_x_features;  // n_ret x d, raw u^theta outputs
    Matrix train_y_features;  // n_ret x d, raw v^theta outputs
    Matrix train_x_values;    // n_ret x d_x, original units
    Matrix train_y_values;    // n_ret x d_y, original units
    Matrix u_mean, v_mean;    // 1 x d feature means over retained rows
    std::vector<EpochRecord> loss_history;
    TrainConfig config;
};

// Algorithm: standardize with training stats; per epoch, shuffle and walk the
// data in windows of 2*batch_size split into two disjoint halves; Adam step
// per window; validation loss every epoch (covariance-form estimator); the
// best-validation-epoch parameters are restored at the end.
// train() uses the default architecture (two hidden layers of 64 units,
// d = 100) seeded from cfg.seed; train_with_model takes explicit initial
// parameters.
FittedModel train(const SampleSet& data, const SampleSet& val, const TrainConfig& cfg);
FittedModel train_with_model(const SampleSet& data, const SampleSet& val, const TrainConfig& cfg,
                             EmbeddingModel model);

}  // namespace ncp
