#include "ncp/archive.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "ncp/mlp.hpp"

namespace ncp {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'N', 'C', 'P', 'M'};

struct NamedTensor {
    std::string name;
    const Matrix* m;
};

json spec_json(const MlpSpec& spec) {
    return json{{"input", spec.input_dim}, {"hidden", spec.hidden}, {"output", spec.output_dim}};
}

MlpSpec spec_from_json(const json& j) {
    MlpSpec spec;
    spec.input_dim = j.at("input").get<int>();
    spec.hidden = j.at("hidden").get<std::vector<int>>();
    spec.output_dim = j.at("output").get<int>();
    spec.activation = MlpSpec::Activation::Gelu;
    return spec;
}

void collect_tensors(const WhitenedModel& model, const Matrix& history,
                     std::vector<NamedTensor>& out) {
    const FittedModel& base = model.base;
    for (std::size_t i = 0; i < base.model.u_params.layers.size(); ++i) {
        out.push_back({"u_layer" + std::to_string(i) + "_w", &base.model.u_params.layers[i].w});
        out.push_back({"u_layer" + std::to_string(i) + "_b", &base.model.u_params.layers[i].b});
    }
    for (std::size_t i = 0; i < base.model.v_params.layers.size(); ++i) {
        out.push_back({"v_layer" + std::to_string(i) + "_w", &base.model.v_params.layers[i].w});
        out.push_back({"v_layer" + std::to_string(i) + "_b", &base.model.v_params.layers[i].b});
    }
    out.push_back({"w", &base.model.w});
    out.push_back({"x_mean", &base.stats.x_mean});
    out.push_back({"x_scale", &base.stats.x_scale});
    out.push_back({"y_mean", &base.stats.y_mean});
    out.push_back({"y_scale", &base.stats.y_scale});
    out.push_back({"u_mean", &base.u_mean});
    out.push_back({"v_mean", &base.v_mean});
    out.push_back({"train_x_features", &base.train_x_features});
    out.push_back({"train_y_features", &base.train_y_features});
    out.push_back({"train_x_values", &base.train_x_values});
    out.push_back({"train_y_values", &base.train_y_values});
    out.push_back({"u_transform", &model.u_transform});
    out.push_back({"v_transform", &model.v_transform});
    out.push_back({"loss_history", &history});
}

json config_json(const TrainConfig& c) {
    return json{{"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"learning_rate", c.learning_rate},
                {"gamma", c.gamma},
                {"patience", c.patience},
                {"seed", c.seed},
                {"estimator", static_cast<int>(c.estimator)},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"retain_cap", c.retain_cap}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.estimator = static_cast<LossConfig::Estimator>(j.at("estimator").get<int>());
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.retain_cap = j.at("retain_cap").get<int>();
    return c;
}

}  // namespace

std::uint64_t config_hash(const TrainConfig& cfg) {
    std::ostringstream s;
    s.precision(17);
    s << "epochs=" << cfg.epochs << ";batch_size=" << cfg.batch_size
      << ";learning_rate=" << cfg.learning_rate << ";gamma=" << cfg.gamma
      << ";patience=" << cfg.patience << ";seed=" << cfg.seed
      << ";estimator=" << static_cast<int>(cfg.estimator) << ";adam_beta1=" << cfg.adam_beta1
      << ";adam_beta2=" << cfg.adam_beta2 << ";adam_eps=" << cfg.adam_eps
      << ";retain_cap=" << cfg.retain_cap;
    std::string text = s.str();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void save_model(const WhitenedModel& model, const std::string& path) {
    const FittedModel& base = model.base;
    Matrix history(static_cast<int>(base.loss_history.size()), 4);
    for (int e = 0; e < history.rows; ++e) {
        const EpochRecord& r = base.loss_history[e];
        history(e, 0) = r.epoch;
        history(e, 1) = r.train_loss;
        history(e, 2) = r.train_reg;
        history(e, 3) = r.val_loss;
    }

    std::vector<NamedTensor> tensors;
    collect_tensors(model, history, tensors);

    json header;
    header["version"] = kArchiveVersion;
    header["mode"] = static_cast<int>(model.mode);
    header["d"] = base.model.d;
    header["spec_u"] = spec_json(base.model.spec_u);
    header["spec_v"] = spec_json(base.model.spec_v);
    header["config"] = config_json(base.config);
    header["config_hash"] = config_hash(base.config);
    header["new_sigma"] = model.new_sigma;
    json shapes = json::array();
    for (const auto& t : tensors)
        shapes.push_back(json{{"name", t.name}, {"rows", t.m->rows}, {"cols", t.m->cols}});
    header["tensors"] = shapes;

    // new_sigma rides in the header as text; keep a binary copy so every
    // double in the model round-trips bitwise.
    Matrix sigma_bits(1, static_cast<int>(model.new_sigma.size()), model.new_sigma);
    tensors.push_back({"new_sigma_bits", &sigma_bits});
    header["tensors"].push_back(
        json{{"name", "new_sigma_bits"}, {"rows", sigma_bits.rows}, {"cols", sigma_bits.cols}});

    std::string head = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write archive: " + path);
    out.write(kMagic, 4);
    std::uint32_t version = kArchiveVersion;
    std::uint64_t head_len = head.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& t : tensors)
        out.write(reinterpret_cast<const char*>(t.m->data.data()),
                  static_cast<std::streamsize>(t.m->data.size() * sizeof(double)));
    if (!out) throw std::runtime_error("archive write failed: " + path);
}

WhitenedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open archive: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a model archive: " + path);
    std::uint32_t version = 0;
    std::uint64_t head_len = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    if (!in || version != kArchiveVersion)
        throw std::runtime_error("unsupported archive version in " + path);
    std::string head(head_len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head_len));
    if (!in) throw std::runtime_error("truncated archive header: " + path);
    json header = json::parse(head);

    std::map<std::string, Matrix> tensors;
    for (const auto& shape : header.at("tensors")) {
        int rows = shape.at("rows").get<int>();
        int cols = shape.at("cols").get<int>();
        Matrix m(rows, cols);
        in.read(reinterpret_cast<char*>(m.data.data()),
                static_cast<std::streamsize>(m.data.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated archive payload: " + path);
        tensors.emplace(shape.at("name").get<std::string>(), std::move(m));
    }
    auto take = [&](const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::runtime_error("archive misses tensor " + name);
        return std::move(it->second);
    };

    WhitenedModel model;
    FittedModel& base = model.base;
    base.model.spec_u = spec_from_json(header.at("spec_u"));
    base.model.spec_v = spec_from_json(header.at("spec_v"));
    base.model.d = header.at("d").get<int>();
    std::size_t u_layers = base.model.spec_u.hidden.size() + 1;
    std::size_t v_layers = base.model.spec_v.hidden.size() + 1;
    for (std::size_t i = 0; i < u_layers; ++i)
        base.model.u_params.layers.push_back(DenseLayer{
            take("u_layer" + std::to_string(i) + "_w"), take("u_layer" + std::to_string(i) + "_b")});
    for (std::size_t i = 0; i < v_layers; ++i)
        base.model.v_params.layers.push_back(DenseLayer{
            take("v_layer" + std::to_string(i) + "_w"), take("v_layer" + std::to_string(i) + "_b")});
    base.model.w = take("w");
    base.stats.x_mean = take("x_mean");
    base.stats.x_scale = take("x_scale");
    base.stats.y_mean = take("y_mean");
    base.stats.y_scale = take("y_scale");
    base.u_mean = take("u_mean");
    base.v_mean = take("v_mean");
    base.train_x_features = take("train_x_features");
    base.train_y_features = take("train_y_features");
    base.train_x_values = take("train_x_values");
    base.train_y_values = take("train_y_values");
    base.config = config_from_json(header.at("config"));
    Matrix history = take("loss_history");
    for (int e = 0; e < history.rows; ++e)
        base.loss_history.push_back(EpochRecord{static_cast<int>(history(e, 0)), history(e, 1),
                                                history(e, 2), history(e, 3)});

    model.u_transform = take("u_transform");
    model.v_transform = take("v_transform");
    model.new_sigma = take("new_sigma_bits").data;
    model.mode = static_cast<FeatureMode>(header.at("mode").get<int>());
    return model;
}

}  // namespace ncp
