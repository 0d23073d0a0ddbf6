#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ncp/archive.hpp"
#include "ncp/datasets.hpp"
#include "ncp/inference.hpp"
#include "ncp/mlp.hpp"
#include "ncp/postprocess.hpp"
#include "ncp/trainer.hpp"

using namespace ncp;

namespace {

WhitenedModel trained_model(FeatureMode mode) {
    GeneratorSpec spec;
    spec.family = Family::LinearGaussian;
    spec.n = 128;
    spec.seed = 1;
    SampleSet data = generate(spec);
    spec.n = 32;
    spec.seed = 2;
    SampleSet val = generate(spec);

    MlpSpec su, sv;
    su.input_dim = 1;
    su.hidden = {6, 5};
    su.output_dim = 3;
    sv.input_dim = 1;
    sv.hidden = {7};
    sv.output_dim = 3;
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.patience = 3;
    cfg.batch_size = 8;
    cfg.seed = 4;
    FittedModel fit = train_with_model(data, val, cfg, init_embedding(su, sv, 3, 4));
    switch (mode) {
        case FeatureMode::Raw: return as_raw(std::move(fit));
        case FeatureMode::Centered: return center(std::move(fit));
        case FeatureMode::Whitened: return whiten(std::move(fit), data, 1e-6);
    }
    return as_raw(std::move(fit));
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("whitened model round-trips bitwise") {
    WhitenedModel model = trained_model(FeatureMode::Whitened);
    const std::string path = "archive_rt_tmp.ncpm";
    save_model(model, path);
    WhitenedModel back = load_model(path);
    std::remove(path.c_str());

    CHECK(back.mode == FeatureMode::Whitened);
    CHECK(flatten_params(back.base.model) == flatten_params(model.base.model));
    CHECK(back.base.model.spec_u.hidden == model.base.model.spec_u.hidden);
    CHECK(back.base.model.spec_v.hidden == model.base.model.spec_v.hidden);
    CHECK(back.base.model.d == 3);
    CHECK(back.base.stats.x_mean.data == model.base.stats.x_mean.data);
    CHECK(back.base.stats.y_scale.data == model.base.stats.y_scale.data);
    CHECK(back.base.train_x_features.data == model.base.train_x_features.data);
    CHECK(back.base.train_y_features.data == model.base.train_y_features.data);
    CHECK(back.base.train_x_values.data == model.base.train_x_values.data);
    CHECK(back.base.train_y_values.data == model.base.train_y_values.data);
    CHECK(back.base.u_mean.data == model.base.u_mean.data);
    CHECK(back.base.v_mean.data == model.base.v_mean.data);
    CHECK(back.u_transform.data == model.u_transform.data);
    CHECK(back.v_transform.data == model.v_transform.data);
    CHECK(back.new_sigma == model.new_sigma);
    CHECK(back.base.config.seed == model.base.config.seed);
    CHECK(back.base.config.epochs == model.base.config.epochs);
    CHECK(back.base.config.learning_rate == model.base.config.learning_rate);
    REQUIRE(back.base.loss_history.size() == model.base.loss_history.size());
    for (std::size_t i = 0; i < back.base.loss_history.size(); ++i) {
        CHECK(back.base.loss_history[i].epoch == model.base.loss_history[i].epoch);
        CHECK(back.base.loss_history[i].val_loss == model.base.loss_history[i].val_loss);
    }

    // The reloaded model answers queries identically.
    InferenceEngine before(model), after(back);
    ConditioningEvent ev = ConditioningEvent::at({0.3});
    CHECK(before.cond_mean(ev) == after.cond_mean(ev));
    CHECK(before.cond_moment(ev, 2.0) == after.cond_moment(ev, 2.0));
}

TEST_CASE("raw and centered modes survive the trip") {
    for (FeatureMode mode : {FeatureMode::Raw, FeatureMode::Centered}) {
        WhitenedModel model = trained_model(mode);
        const std::string path = "archive_mode_tmp.ncpm";
        save_model(model, path);
        WhitenedModel back = load_model(path);
        std::remove(path.c_str());
        CHECK(back.mode == mode);
        CHECK(back.u_transform.data == model.u_transform.data);
        CHECK(back.new_sigma == model.new_sigma);
    }
}

TEST_CASE("saving twice writes identical bytes") {
    WhitenedModel model = trained_model(FeatureMode::Whitened);
    save_model(model, "archive_a_tmp.ncpm");
    save_model(model, "archive_b_tmp.ncpm");
    std::string a = slurp("archive_a_tmp.ncpm");
    std::string b = slurp("archive_b_tmp.ncpm");
    std::remove("archive_a_tmp.ncpm");
    std::remove("archive_b_tmp.ncpm");
    CHECK(!a.empty());
    CHECK(a == b);
    CHECK(a.substr(0, 4) == "NCPM");
}

TEST_CASE("load rejects missing, foreign, truncated, and future files") {
    CHECK_THROWS_AS(load_model("no_such_file.ncpm"), std::runtime_error);

    spit("archive_bad_tmp.ncpm", "totally not a model archive");
    CHECK_THROWS_AS(load_model("archive_bad_tmp.ncpm"), std::runtime_error);
    std::remove("archive_bad_tmp.ncpm");

    WhitenedModel model = trained_model(FeatureMode::Raw);
    const std::string path = "archive_cut_tmp.ncpm";
    save_model(model, path);
    std::string bytes = slurp(path);

    spit(path, bytes.substr(0, bytes.size() - 64));
    CHECK_THROWS_AS(load_model(path), std::runtime_error);

    std::string future = bytes;
    future[4] = static_cast<char>(kArchiveVersion + 1);  // little-endian version field
    spit(path, future);
    CHECK_THROWS_AS(load_model(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("config hash keys on every field") {
    TrainConfig base;
    CHECK(config_hash(base) == config_hash(TrainConfig{}));

    TrainConfig c = base;
    c.epochs += 1;
    CHECK(config_hash(c) != config_hash(base));
    c = base;
    c.batch_size += 2;
    CHECK(config_hash(c) != config_hash(base));
    c = base;
    c.learning_rate *= 2.0;
    CHECK(config_hash(c) != config_hash(base));
    c = base;
    c.gamma *= 10.0;
    CHECK(config_hash(c) != config_hash(base));
    c = base;
    c.seed += 1;
    CHECK(config_hash(c) != config_hash(base));
    c = base;
    c.estimator = LossConfig::Estimator::PairwiseUstat;
    CHECK(config_hash(c) != config_hash(base));
    c = base;
    c.retain_cap += 1;
    CHECK(config_hash(c) != config_hash(base));
}
