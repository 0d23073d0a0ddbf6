#include "ncp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ncp/datasets.hpp"
#include "ncp/rng.hpp"

namespace ncp {

TrainingDivergedError::TrainingDivergedError(int ep)
    : std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(ep)), epoch(ep) {}

namespace {

struct AdamState {
    std::vector<Matrix> m, v;
    long step = 0;
};

// Parameter tensors in a fixed order: u layers (w, b), v layers (w, b), w.
std::vector<Matrix*> param_refs(EmbeddingModel& model) {
    std::vector<Matrix*> refs;
    for (DenseLayer& l : model.u_params.layers) {
        refs.push_back(&l.w);
        refs.push_back(&l.b);
    }
    for (DenseLayer& l : model.v_params.layers) {
        refs.push_back(&l.w);
        refs.push_back(&l.b);
    }
    refs.push_back(&model.w);
    return refs;
}

std::vector<const Matrix*> grad_refs(Tape& t, const LossBuild& build) {
    std::vector<const Matrix*> refs;
    for (auto [w, b] : build.u_ids.layers) {
        refs.push_back(&t.grad(w));
        refs.push_back(&t.grad(b));
    }
    for (auto [w, b] : build.v_ids.layers) {
        refs.push_back(&t.grad(w));
        refs.push_back(&t.grad(b));
    }
    refs.push_back(&t.grad(build.w_id));
    return refs;
}

void adam_step(std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
               AdamState& st, const TrainConfig& cfg) {
    if (st.m.empty()) {
        for (Matrix* p : params) {
            st.m.emplace_back(p->rows, p->cols);
            st.v.emplace_back(p->rows, p->cols);
        }
    }
    st.step += 1;
    double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    double corr1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    double corr2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        const Matrix& g = *grads[k];
        Matrix& m = st.m[k];
        Matrix& v = st.v[k];
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            double gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
            v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
            double mhat = m.data[i] / corr1;
            double vhat = v.data[i] / corr2;
            p.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

double validation_loss(const EmbeddingModel& model, const Matrix& xv_std, const Matrix& yv_std,
                       double gamma) {
    Matrix u = forward_u(model, xv_std);
    Matrix v = forward_v(model, yv_std);
    std::vector<double> sig = sigma_of(model);
    return loss_cov_form(u, v, sig) + gamma * reg_cov_form(u, v);
}

}  // namespace

FittedModel train(const SampleSet& data, const SampleSet& val, const TrainConfig& cfg) {
    MlpSpec spec_u, spec_v;
    spec_u.input_dim = data.x.cols;
    spec_v.input_dim = data.y.cols;
    spec_u.hidden = {64, 64};
    spec_v.hidden = {64, 64};
    spec_u.output_dim = 100;
    spec_v.output_dim = 100;
    EmbeddingModel model = init_embedding(spec_u, spec_v, 100, cfg.seed);
    return train_with_model(data, val, cfg, std::move(model));
}

FittedModel train_with_model(const SampleSet& data, const SampleSet& val, const TrainConfig& cfg,
                             EmbeddingModel model) {
    const int n = data.x.rows;
    if (cfg.batch_size < 4 || cfg.batch_size % 2 != 0)
        throw std::invalid_argument("train: batch_size must be even and >= 4");
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be > 0");
    if (cfg.patience > cfg.epochs) throw std::invalid_argument("train: patience must be <= epochs");
    if (n < 2 * cfg.batch_size) throw std::invalid_argument("train: need at least 2*batch_size rows");
    if (val.x.rows < 2) throw std::invalid_argument("train: validation set too small");
    if (model.spec_u.input_dim != data.x.cols || model.spec_v.input_dim != data.y.cols)
        throw std::invalid_argument("train: model input dims do not match data");

    FittedModel fit;
    fit.config = cfg;
    fit.stats = compute_standardization(data.x, data.y);
    Matrix xs = fit.stats.apply_x(data.x);
    Matrix ys = fit.stats.apply_y(data.y);
    Matrix xv = fit.stats.apply_x(val.x);
    Matrix yv = fit.stats.apply_y(val.y);

    LossConfig loss_cfg;
    loss_cfg.gamma = cfg.gamma;
    loss_cfg.estimator = cfg.estimator;

    Rng rng(mix_seed(cfg.seed, 1));
    AdamState adam;
    std::vector<Matrix*> params = param_refs(model);

    EmbeddingModel best_model = model;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    const int b = cfg.batch_size;
    const int windows = n / (2 * b);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> perm = rng.permutation(n);
        double lhat_sum = 0.0, rhat_sum = 0.0;
        for (int w = 0; w < windows; ++w) {
            std::vector<int> idx1(perm.begin() + 2 * w * b, perm.begin() + (2 * w + 1) * b);
            std::vector<int> idx2(perm.begin() + (2 * w + 1) * b, perm.begin() + (2 * w + 2) * b);
            Matrix x1 = gather_rows(xs, idx1), x2 = gather_rows(xs, idx2);
            Matrix y1 = gather_rows(ys, idx1), y2 = gather_rows(ys, idx2);

            Tape tape;
            LossBuild build = total_loss(tape, model, x1, x2, y1, y2, loss_cfg);
            double step_loss = tape.scalar(build.nodes.total);
            if (!std::isfinite(step_loss)) throw TrainingDivergedError(epoch);
            lhat_sum += tape.scalar(build.nodes.lhat);
            rhat_sum += tape.scalar(build.nodes.rhat);
            tape.backward(build.nodes.total);
            std::vector<const Matrix*> grads = grad_refs(tape, build);
            adam_step(params, grads, adam, cfg);
        }
        double vloss = validation_loss(model, xv, yv, cfg.gamma);
        if (!std::isfinite(vloss)) throw TrainingDivergedError(epoch);
        fit.loss_history.push_back(EpochRecord{epoch, lhat_sum / windows, rhat_sum / windows, vloss});

        if (vloss < best_val) {
            best_val = vloss;
            best_model = model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    model = std::move(best_model);

    // Retained rows for inference: everything up to the cap, uniform subsample
    // beyond it (seeded by the run seed).
    std::vector<int> retained(n);
    for (int i = 0; i < n; ++i) retained[i] = i;
    if (n > cfg.retain_cap) {
        Rng sub(mix_seed(cfg.seed, 2));
        sub.shuffle(retained);
        retained.resize(cfg.retain_cap);
        std::sort(retained.begin(), retained.end());
    }
    Matrix xr = gather_rows(xs, retained);
    Matrix yr = gather_rows(ys, retained);
    fit.train_x_features = forward_u(model, xr);
    fit.train_y_features = forward_v(model, yr);
    fit.train_x_values = gather_rows(data.x, retained);
    fit.train_y_values = gather_rows(data.y, retained);
    fit.u_mean = col_means(fit.train_x_features);
    fit.v_mean = col_means(fit.train_y_features);
    fit.model = std::move(model);
    return fit;
}

}  // namespace ncp
