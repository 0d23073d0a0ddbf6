#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ncp/archive.hpp"
#include "ncp/config.hpp"
#include "ncp/datasets.hpp"
#include "ncp/evalbench.hpp"
#include "ncp/inference.hpp"
#include "ncp/loss.hpp"
#include "ncp/mlp.hpp"
#include "ncp/oracle.hpp"
#include "ncp/postprocess.hpp"
#include "ncp/rng.hpp"
#include "ncp/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ncp;

constexpr int kExitBadInput = 2;
constexpr int kExitDiverged = 3;

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::string profile;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool paper_scale = false;
};

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(std::stoi(cell));
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(std::stod(cell));
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

GeneratorSpec dataset_from_config(const ConfigMap& cfg, const GlobalOpts& g) {
    GeneratorSpec spec;
    spec.family = family_from_string(config_str(cfg, "dataset.family", "linear_gaussian"));
    spec.n = static_cast<int>(config_num(cfg, "dataset.n", 10000));
    spec.seed = g.seed_given ? g.seed
                             : static_cast<std::uint64_t>(config_num(cfg, "dataset.seed", 0));
    for (const auto& [key, value] : cfg) {
        const std::string prefix = "dataset.";
        if (key.rfind(prefix, 0) != 0) continue;
        std::string name = key.substr(prefix.size());
        if (name == "family" || name == "n" || name == "seed") continue;
        spec.params[name] = std::stod(value);
    }
    return spec;
}

TrainConfig train_config_from(const ConfigMap& cfg, std::uint64_t seed) {
    TrainConfig tc;
    tc.epochs = static_cast<int>(config_num(cfg, "train.epochs", tc.epochs));
    tc.batch_size = static_cast<int>(config_num(cfg, "train.batch_size", tc.batch_size));
    tc.learning_rate = config_num(cfg, "train.learning_rate", tc.learning_rate);
    tc.gamma = config_num(cfg, "train.gamma", tc.gamma);
    tc.patience = static_cast<int>(config_num(cfg, "train.patience", tc.patience));
    tc.retain_cap = static_cast<int>(config_num(cfg, "train.retain_cap", tc.retain_cap));
    std::string est = config_str(cfg, "train.estimator", "cov");
    if (est == "cov")
        tc.estimator = LossConfig::Estimator::CovarianceForm;
    else if (est == "pairwise")
        tc.estimator = LossConfig::Estimator::PairwiseBatchMean;
    else if (est == "ustat")
        tc.estimator = LossConfig::Estimator::PairwiseUstat;
    else
        throw std::runtime_error("unknown estimator: " + est);
    tc.seed = seed;
    return tc;
}

FeatureMode mode_from(const ConfigMap& cfg) {
    std::string mode = config_str(cfg, "postprocess.mode", "whitened");
    if (mode == "raw") return FeatureMode::Raw;
    if (mode == "centered") return FeatureMode::Centered;
    if (mode == "whitened") return FeatureMode::Whitened;
    throw std::runtime_error("unknown postprocess mode: " + mode);
}

SampleSet slice_rows(const SampleSet& s, int begin, int count) {
    std::vector<int> idx(count);
    std::iota(idx.begin(), idx.end(), begin);
    SampleSet out;
    out.x = gather_rows(s.x, idx);
    out.y = gather_rows(s.y, idx);
    out.seed = s.seed;
    return out;
}

std::string history_csv(const FittedModel& fitted) {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,train_loss,train_reg,val_loss\n";
    for (const EpochRecord& r : fitted.loss_history)
        out << r.epoch << "," << r.train_loss << "," << r.train_reg << "," << r.val_loss << "\n";
    return out.str();
}

int cmd_train(const GlobalOpts& g) {
    ConfigMap cfg;
    if (!g.config_path.empty()) cfg = load_config(g.config_path);

    SampleSet train, val;
    std::uint64_t seed = g.seed_given ? g.seed
                                      : static_cast<std::uint64_t>(config_num(cfg, "dataset.seed", 0));
    std::string csv = config_str(cfg, "dataset.csv", "");
    if (!csv.empty()) {
        if (!fs::exists(csv)) {
            std::cerr << "error: dataset csv not found: " << csv << "\n";
            return kExitBadInput;
        }
        std::vector<std::string> x_cols, y_cols;
        {
            std::stringstream sx(config_str(cfg, "dataset.x_cols", "x"));
            std::string cell;
            while (std::getline(sx, cell, ',')) x_cols.push_back(cell);
            std::stringstream sy(config_str(cfg, "dataset.y_cols", "y"));
            while (std::getline(sy, cell, ',')) y_cols.push_back(cell);
        }
        CsvSplit split = load_csv(csv, x_cols, y_cols, config_num(cfg, "dataset.train_frac", 0.8),
                                  config_num(cfg, "dataset.val_frac", 0.1), seed);
        train = split.train;
        val = split.val;
    } else {
        GeneratorSpec spec = dataset_from_config(cfg, g);
        int n_val = static_cast<int>(config_num(cfg, "dataset.n_val", 1000));
        spec.n += n_val;
        SampleSet all = generate(spec);
        train = slice_rows(all, 0, spec.n - n_val);
        val = slice_rows(all, spec.n - n_val, n_val);
    }

    TrainConfig tc = train_config_from(cfg, seed);
    int d = static_cast<int>(config_num(cfg, "train.d", 100));
    std::vector<int> hidden_u = parse_int_list(config_str(cfg, "train.hidden_u", "64,64"));
    std::vector<int> hidden_v = parse_int_list(config_str(cfg, "train.hidden_v", "64,64"));
    MlpSpec spec_u{train.x.cols, hidden_u, d, MlpSpec::Activation::Gelu};
    MlpSpec spec_v{train.y.cols, hidden_v, d, MlpSpec::Activation::Gelu};
    EmbeddingModel embedding = init_embedding(spec_u, spec_v, d, seed);

    FittedModel fitted;
    try {
        fitted = train_with_model(train, val, tc, embedding);
    } catch (const TrainingDivergedError& e) {
        std::cerr << "error: training diverged at epoch " << e.epoch << "\n";
        return kExitDiverged;
    }

    WhitenedModel model;
    FeatureMode mode = mode_from(cfg);
    double eps = config_num(cfg, "postprocess.eps", 1e-6);
    std::string history = history_csv(fitted);
    switch (mode) {
        case FeatureMode::Raw: model = as_raw(std::move(fitted)); break;
        case FeatureMode::Centered: model = center(std::move(fitted)); break;
        case FeatureMode::Whitened: model = whiten(std::move(fitted), train, eps); break;
    }

    fs::create_directories(g.out_dir);
    fs::path model_path = fs::path(g.out_dir) / "model.ncpm";
    save_model(model, model_path.string());
    write_file(fs::path(g.out_dir) / "history.csv", history);
    std::cout << "trained " << model_path.string() << " (" << model.base.loss_history.size()
              << " epochs, sigma_1 = " << (model.new_sigma.empty() ? 0.0 : model.new_sigma[0])
              << ")\n";
    return 0;
}

struct InferOpts {
    std::string model_path;
    std::string statistic;
    std::string x_text, box_lo_text, box_hi_text;
    double q = 0.5;
    double alpha = 0.1;
    double order = 1.0;
    double b_lo = 0.0, b_hi = 0.0;
    bool b_given = false;
    int grid_points = 1000;
};

int cmd_infer(const GlobalOpts& g, const InferOpts& opt) {
    if (!fs::exists(opt.model_path)) {
        std::cerr << "error: model archive not found: " << opt.model_path << "\n";
        return kExitBadInput;
    }
    WhitenedModel model = load_model(opt.model_path);
    InferenceEngine engine(model);

    ConditioningEvent event;
    if (!opt.x_text.empty()) {
        event = ConditioningEvent::at(parse_double_list(opt.x_text));
    } else if (!opt.box_lo_text.empty() && !opt.box_hi_text.empty()) {
        event = ConditioningEvent::box(parse_double_list(opt.box_lo_text),
                                       parse_double_list(opt.box_hi_text));
    } else {
        std::cerr << "error: provide --x or --box-lo/--box-hi\n";
        return kExitBadInput;
    }

    std::vector<double> grid = engine.default_grid(opt.grid_points);
    std::ostringstream out;
    out.precision(17);
    std::string ext = "json";
    if (opt.statistic == "cdf") {
        CdfGrid raw = engine.cond_cdf(event, grid, false);
        CdfGrid clean = sanitize_cdf(raw);
        out << "t,F_raw,F_sanitized\n";
        for (std::size_t i = 0; i < raw.points.size(); ++i)
            out << raw.points[i] << "," << raw.values[i] << "," << clean.values[i] << "\n";
        ext = "csv";
    } else if (opt.statistic == "quantile") {
        out << "{\"q\": " << opt.q << ", \"value\": " << engine.cond_quantile(event, opt.q, grid)
            << "}\n";
    } else if (opt.statistic == "interval") {
        CdfGrid cdf = engine.cond_cdf(event, grid, true);
        out << interval_to_json(interval_search(cdf, opt.alpha)) << "\n";
    } else if (opt.statistic == "mean") {
        out << "{\"mean\": " << engine.cond_mean(event) << "}\n";
    } else if (opt.statistic == "moment") {
        out << "{\"order\": " << opt.order << ", \"value\": "
            << engine.cond_moment(event, opt.order) << "}\n";
    } else if (opt.statistic == "cov") {
        Matrix cov = engine.cond_covariance(event);
        for (int r = 0; r < cov.rows; ++r) {
            for (int c = 0; c < cov.cols; ++c) out << (c ? "," : "") << cov(r, c);
            out << "\n";
        }
        ext = "csv";
    } else if (opt.statistic == "prob") {
        if (!opt.b_given) {
            std::cerr << "error: prob needs --b-lo and --b-hi\n";
            return kExitBadInput;
        }
        const Matrix& y = model.base.train_y_values;
        if (y.cols != 1) {
            std::cerr << "error: prob needs scalar y\n";
            return kExitBadInput;
        }
        std::vector<double> ind(y.rows);
        for (int r = 0; r < y.rows; ++r)
            ind[r] = (y(r, 0) >= opt.b_lo && y(r, 0) <= opt.b_hi) ? 1.0 : 0.0;
        double raw = engine.cond_probability(ind, event, false);
        double clean = engine.cond_probability(ind, event, true);
        out << "{\"raw\": " << raw << ", \"sanitized\": " << clean << "}\n";
    } else {
        std::cerr << "error: unknown statistic: " << opt.statistic << "\n";
        return kExitBadInput;
    }

    if (g.out_dir != ".") {
        fs::create_directories(g.out_dir);
        write_file(fs::path(g.out_dir) / ("infer_" + opt.statistic + "." + ext), out.str());
    }
    std::cout << out.str();
    return 0;
}

int cmd_benchmark(const GlobalOpts& g, int n_override, int seed_count_override, double alpha) {
    if (g.profile.empty()) {
        std::cerr << "error: --profile is required for benchmark\n";
        return kExitBadInput;
    }
    ConfigMap cfg;
    if (!g.config_path.empty()) cfg = load_config(g.config_path);

    ModelProfile profile;
    profile.train = train_config_from(cfg, 0);
    profile.d = static_cast<int>(config_num(cfg, "train.d", profile.d));
    profile.hidden_u = parse_int_list(config_str(cfg, "train.hidden_u", "64,64"));
    profile.hidden_v = parse_int_list(config_str(cfg, "train.hidden_v", "64,64"));
    profile.mode = mode_from(cfg);
    profile.whiten_eps = config_num(cfg, "postprocess.eps", 1e-6);

    std::uint64_t base_seed = g.seed_given ? g.seed : 0;
    bool coverage = g.profile == "laplace_coverage" || g.profile == "cauchy_coverage";
    int seed_count = coverage ? 1 : 3;
    if (g.paper_scale) seed_count = 10;
    if (seed_count_override > 0) seed_count = seed_count_override;
    std::vector<std::uint64_t> seeds(seed_count);
    std::iota(seeds.begin(), seeds.end(), base_seed);

    fs::create_directories(g.out_dir);
    if (coverage) {
        GeneratorSpec spec;
        spec.family = g.profile == "laplace_coverage" ? Family::LaplaceModel : Family::CauchyModel;
        int n_train = n_override > 0 ? n_override : 20000;
        int n_test = g.paper_scale ? 1000 : 200;
        CoverageReport report =
            run_coverage_benchmark(spec, profile, alpha, n_train, n_test, seeds);
        std::string tag = family_to_string(spec.family);
        write_file(fs::path(g.out_dir) / ("coverage_" + tag + ".csv"), coverage_report_csv(report));
        write_file(fs::path(g.out_dir) / ("coverage_" + tag + ".json"),
                   coverage_report_json(report));
        std::cout << coverage_report_json(report) << "\n";
        return 0;
    }

    GeneratorSpec spec;
    try {
        spec.family = family_from_string(g.profile);
    } catch (const std::exception&) {
        std::cerr << "error: unknown profile: " << g.profile << "\n";
        return kExitBadInput;
    }
    if (!has_true_cdf(spec.family)) {
        std::cerr << "error: profile lacks an exact cdf: " << g.profile << "\n";
        return kExitBadInput;
    }
    int n = n_override > 0 ? n_override : (g.paper_scale ? 100000 : 10000);
    BenchmarkReport report = run_cde_benchmark(spec, profile, n, seeds);
    std::string tag = family_to_string(spec.family);
    write_file(fs::path(g.out_dir) / ("cde_" + tag + ".csv"), cde_report_csv(report));
    write_file(fs::path(g.out_dir) / ("cde_" + tag + ".json"), cde_report_json(report));
    std::cout << cde_report_json(report) << "\n";
    return 0;
}

bool check(const char* name, bool ok, int& failures) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
    return ok;
}

int cmd_oracle_check(const GlobalOpts& g, const std::string& sizes_text, int trials,
                     bool force_failure) {
    std::vector<int> sizes = parse_int_list(sizes_text);
    if (sizes.empty()) {
        std::cerr << "error: --sizes must list at least one state count\n";
        return kExitBadInput;
    }
    for (int s : sizes)
        if (s < 2) {
            std::cerr << "error: joint sizes must be >= 2\n";
            return kExitBadInput;
        }
    int failures = 0;
    Rng rng(g.seed_given ? g.seed : 0);

    {
        bool ok = true;
        for (int size : sizes)
            for (int t = 0; t < trials && ok; ++t) {
                DiscreteJoint joint = random_joint(size, size, rng);
                OperatorTruth truth = build_truth(joint);
                if (force_failure) truth.sigma[0] += 0.1;
                // Reconstruction in the weighted geometry.
                Matrix k(size, size);
                for (int i = 0; i < size; ++i)
                    for (int j = 0; j < size; ++j) {
                        double acc = 0.0;
                        for (std::size_t c = 0; c < truth.sigma.size(); ++c)
                            acc += truth.sigma[c] * truth.u(i, static_cast<int>(c)) *
                                   truth.v(j, static_cast<int>(c));
                        k(i, j) = joint.mu[i] * joint.nu[j] * (1.0 + acc);
                    }
                double err = 0.0;
                for (int i = 0; i < size; ++i)
                    for (int j = 0; j < size; ++j) err = std::max(err, std::abs(k(i, j) - joint.pmf(i, j)));
                ok = err < 1e-10 && truth.sigma[0] <= 1.0 + 1e-10;
            }
        check("operator reconstruction", ok, failures);
    }
    {
        bool ok = true;
        for (int size : sizes)
            for (int t = 0; t < trials && ok; ++t) {
                DiscreteJoint joint = random_joint(size, size, rng);
                OperatorTruth truth = build_truth(joint);
                for (int d = 0; d <= size && ok; ++d)
                    for (int a = 0; a < size && ok; ++a)
                        for (int b = 0; b < size && ok; ++b)
                            ok = lemma1_check(truth, d, joint, {a}, {b}).ok;
            }
        check("rank truncation bound", ok, failures);
    }
    {
        Matrix pmf = Matrix::from_rows({{0.4, 0.1}, {0.1, 0.4}});
        OperatorTruth truth = build_truth(make_joint(pmf));
        bool ok = std::abs(chi2_optimum(truth, 1) + 0.36) < 1e-10 &&
                  std::abs(truth.sigma[0] - 0.6) < 1e-10;
        check("divergence optimum", ok, failures);
    }
    {
        bool ok = true;
        for (int t = 0; t < trials && ok; ++t) {
            int n = 4 + 2 * rng.below(15);
            int d = 1 + rng.below(6);
            Matrix u(n, d), u2(n, d), v(n, d), v2(n, d);
            std::vector<double> sigma(d);
            for (double& x : u.data) x = rng.normal();
            for (double& x : u2.data) x = rng.normal();
            for (double& x : v.data) x = rng.normal();
            for (double& x : v2.data) x = rng.normal();
            for (double& s : sigma) s = rng.uniform();
            Matrix pool_u = vconcat(u, u2), pool_v = vconcat(v, v2);
            Matrix mu = col_means(pool_u), mv = col_means(pool_v);
            Matrix cu = sub_rowvec(pool_u, mu), cv = sub_rowvec(pool_v, mv);
            double pair_acc = 0.0;
            for (int i = 0; i < 2 * n; ++i)
                for (int j = 0; j < 2 * n; ++j)
                    pair_acc += loss_pairwise(std::vector<double>(cu.row(i), cu.row(i) + d),
                                              std::vector<double>(cu.row(j), cu.row(j) + d),
                                              std::vector<double>(cv.row(i), cv.row(i) + d),
                                              std::vector<double>(cv.row(j), cv.row(j) + d), sigma);
            pair_acc /= 4.0 * n * n;
            double cov_form = loss_cov_form(pool_u, pool_v, sigma);
            ok = std::abs(pair_acc - cov_form) < 1e-10;
        }
        check("loss estimator identity", ok, failures);
    }
    {
        bool ok = true;
        for (int t = 0; t < 3 && ok; ++t) {
            MlpSpec su{2, {6}, 3, MlpSpec::Activation::Gelu};
            MlpSpec sv{1, {5}, 3, MlpSpec::Activation::Gelu};
            EmbeddingModel model = init_embedding(su, sv, 3, 100 + t);
            Matrix x1(6, 2), x2(6, 2), y1(6, 1), y2(6, 1);
            for (double& v : x1.data) v = rng.normal();
            for (double& v : x2.data) v = rng.normal();
            for (double& v : y1.data) v = rng.normal();
            for (double& v : y2.data) v = rng.normal();
            LossConfig lc;
            auto eval = [&](const std::vector<double>& p) {
                EmbeddingModel m = model;
                set_params(m, p);
                Tape tape;
                LossBuild build = total_loss(tape, m, x1, x2, y1, y2, lc);
                return tape.scalar(build.nodes.total);
            };
            std::vector<double> at = flatten_params(model);
            Tape tape;
            LossBuild build = total_loss(tape, model, x1, x2, y1, y2, lc);
            tape.backward(build.nodes.total);
            std::vector<double> numeric = finite_diff_gradient(eval, at, 1e-5);
            std::vector<double> exact;
            auto append_grad = [&](int id) {
                const Matrix& grad = tape.grad(id);
                exact.insert(exact.end(), grad.data.begin(), grad.data.end());
            };
            for (const auto& [w_id, b_id] : build.u_ids.layers) {
                append_grad(w_id);
                append_grad(b_id);
            }
            for (const auto& [w_id, b_id] : build.v_ids.layers) {
                append_grad(w_id);
                append_grad(b_id);
            }
            append_grad(build.w_id);
            double worst = 0.0;
            for (std::size_t i = 0; i < exact.size(); ++i) {
                double scale = std::max({std::abs(exact[i]), std::abs(numeric[i]), 1e-6});
                worst = std::max(worst, std::abs(exact[i] - numeric[i]) / scale);
            }
            ok = worst < 1e-5;
        }
        check("loss gradients", ok, failures);
    }

    if (failures > 0) {
        std::cout << failures << " oracle check(s) failed\n";
        return 1;
    }
    std::cout << "all oracle checks passed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural conditional probability toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Base seed for all randomness");
    app.add_option("--config", g.config_path, "Key-value config file");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--profile", g.profile, "Benchmark profile name");
    app.add_flag("--paper-scale", g.paper_scale, "Use full-scale sample and seed counts");

    app.add_subcommand("train", "Fit a model and write the archive");

    InferOpts infer;
    auto* infer_cmd = app.add_subcommand("infer", "Query a trained model");
    infer_cmd->add_option("--model", infer.model_path, "Model archive path")->required();
    infer_cmd->add_option("--statistic", infer.statistic,
                          "cdf | quantile | interval | mean | moment | cov | prob")
        ->required();
    infer_cmd->add_option("--x", infer.x_text, "Conditioning point (comma separated)");
    infer_cmd->add_option("--box-lo", infer.box_lo_text, "Box lower corner");
    infer_cmd->add_option("--box-hi", infer.box_hi_text, "Box upper corner");
    infer_cmd->add_option("--q", infer.q, "Quantile level");
    infer_cmd->add_option("--alpha", infer.alpha, "Interval miscoverage level");
    infer_cmd->add_option("--order", infer.order, "Moment order");
    auto* blo = infer_cmd->add_option("--b-lo", infer.b_lo, "Event lower bound on y");
    infer_cmd->add_option("--b-hi", infer.b_hi, "Event upper bound on y")->needs(blo);
    infer_cmd->add_option("--grid-points", infer.grid_points, "CDF grid size");

    int bench_n = 0, bench_seeds = 0;
    double bench_alpha = 0.1;
    auto* bench_cmd = app.add_subcommand("benchmark", "Run a synthetic benchmark profile");
    bench_cmd->add_option("--n", bench_n, "Training sample count override");
    bench_cmd->add_option("--seed-count", bench_seeds, "Number of repetitions override");
    bench_cmd->add_option("--alpha", bench_alpha, "Coverage miscoverage level");

    std::string sizes_text = "2,4,8,12";
    int trials = 25;
    bool force_failure = false;
    auto* oracle_cmd = app.add_subcommand("oracle-check", "Run the exact-reference suites");
    oracle_cmd->add_option("--sizes", sizes_text, "Comma list of joint sizes");
    oracle_cmd->add_option("--trials", trials, "Random trials per size");
    oracle_cmd->add_flag("--force-failure", force_failure, "Corrupt the spectrum to prove failure detection");

    CLI11_PARSE(app, argc, argv);
    g.seed_given = seed_opt->count() > 0;

    try {
        if (!g.config_path.empty() && !fs::exists(g.config_path)) {
            std::cerr << "error: config not found: " << g.config_path << "\n";
            return kExitBadInput;
        }
        if (app.got_subcommand("train")) return cmd_train(g);
        if (app.got_subcommand("infer")) {
            infer.b_given = blo->count() > 0;
            return cmd_infer(g, infer);
        }
        if (app.got_subcommand("benchmark")) return cmd_benchmark(g, bench_n, bench_seeds, bench_alpha);
        if (app.got_subcommand("oracle-check"))
            return cmd_oracle_check(g, sizes_text, trials, force_failure);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
